#include "testing.hpp"

using namespace hsl;
using hsl::testing::random_twisted;

namespace {

Mat3 direct_eval(TwistedLoop const& l, cplx z) {
    Mat3 acc;
    for (int k = -l.modes_limit(); k <= l.modes_limit(); ++k) acc += l[k] * std::pow(z, k);
    return acc;
}

std::vector<cplx> circle16() { return unit_circle_samples(16, 0.31); }

}  // namespace

TEST(TwistedLoop, Construction) {
    EXPECT_THROW(TwistedLoop(-1), InvalidInput);
    EXPECT_THROW(TwistedLoop(4, 1.0), InvalidInput);
    TwistedLoop l(3);
    EXPECT_THROW(l.at(4), InvalidInput);
    EXPECT_EQ(l[7], Mat3{});
    EXPECT_EQ(l.min_mode(), 0);
}

TEST(Eval, Examples) {
    auto const id = TwistedLoop::identity(6);
    EXPECT_LT(norm(eval(id, cplx(0.3, 0.8)) - Mat3::identity()), 1e-15);
    auto const A = fixtures::dressing_vacuum().A();
    EXPECT_LT(norm(eval(TwistedLoop::monomial(-2, A, 4), 1.0) - A), 1e-15);
    auto const eta = fixtures::vacuum_generator(fixtures::dressing_vacuum(), 4);
    EXPECT_LT(norm(eval(eta, kI) + A + real_conjugate(A)), 1e-14);
    EXPECT_THROW(eval(eta, 0.0), InvalidInput);
    EXPECT_LT(norm(eval(TwistedLoop::monomial(2, A, 4), 0.0)), 1e-15);
}

TEST(Sampler, InterpolateInvertsEvaluate) {
    std::mt19937_64 rng(11);
    auto const l = random_twisted(rng, 10, 10, 1.0);
    auto const& sm = sampler(10);
    auto const back = sm.interpolate(sm.evaluate(l));
    EXPECT_LT(max_distance(back, l), 1e-13);
    EXPECT_LT(back.tail_mass, 1e-12);
}

TEST(Multiply, MatchesPointwiseProducts) {
    std::mt19937_64 rng(12);
    auto const a = random_twisted(rng, 12, 5, 0.5), b = random_twisted(rng, 12, 6, 0.5);
    auto const p = multiply(a, b);
    for (cplx z : circle16()) EXPECT_LT(norm(eval(p, z) - direct_eval(a, z) * direct_eval(b, z)), 1e-12);
    EXPECT_EQ(p.tail_mass, 0.0);
}

TEST(Multiply, GroupProductStaysTwisted) {
    std::mt19937_64 rng(22);
    auto const a = fixtures::random_group_loop(rng, 24, 0.5), b = fixtures::random_group_loop(rng, 24, 0.5);
    auto const p = multiply(a, b);
    EXPECT_LT(group_twist_defect(p), 1e-10);
    for (cplx z : circle16()) EXPECT_LT(norm(apply_tau(eval(p, z)) - eval(p, kI * z)), 1e-10);
}

TEST(Multiply, TruncationReportsTail) {
    std::mt19937_64 rng(13);
    auto const a = random_twisted(rng, 6, 6, 1.0), b = random_twisted(rng, 6, 6, 1.0);
    auto const p = multiply(a, b);
    EXPECT_GT(p.tail_mass, 0.0);
    EXPECT_TRUE(p.truncation_warning());
    double err = 0;
    for (cplx z : circle16()) err = std::max(err, norm(eval(p, z) - direct_eval(a, z) * direct_eval(b, z)));
    EXPECT_LE(err, p.tail_mass * (1 + 1e-12));
}

TEST(Multiply, InverseAndExp) {
    std::mt19937_64 rng(14);
    auto const g = fixtures::random_group_loop(rng, 24, 0.5);
    EXPECT_LT(max_distance(multiply(g, invert(g)), TwistedLoop::identity(24)), 1e-10);
    EXPECT_LT(max_distance(exp_loop(TwistedLoop(8), 0.7), TwistedLoop::identity(8)), 1e-15);
    auto const xi = random_twisted(rng, 24, 3, 0.2);
    auto const e = exp_loop(xi, 1.0);
    for (cplx z : circle16()) EXPECT_LT(norm(eval(e, z) - expm(direct_eval(xi, z))), 1e-12);
}

TEST(Twist, DefectsAndPredicates) {
    std::mt19937_64 rng(15);
    auto xi = random_twisted(rng, 24, 4, 0.03);
    EXPECT_LT(twist_defect(xi), 1e-15);
    auto const g = exp_loop(xi, 1.0);
    EXPECT_LT(group_twist_defect(g), 1e-12);
    // tau(g(zeta)) = g(i zeta)
    for (cplx z : circle16()) EXPECT_LT(norm(apply_tau(eval(g, z)) - eval(g, kI * z)), 1e-12);
    xi.at(1) += Mat3::diag(1.0, -1.0, 0.0) * 0.01;
    EXPECT_GT(twist_defect(xi), 1e-3);
}

TEST(Reality, EquivalentToUnitarity) {
    std::mt19937_64 rng(16);
    auto const xi = random_real_loop(rng, 3, 0.5, 16);
    EXPECT_LT(reality_defect(xi), 1e-15);
    auto const g = exp_loop(xi, 1.0);
    EXPECT_LT(unitarity_defect(g), 1e-9);
    for (cplx z : circle16()) EXPECT_LT(norm(adjoint(eval(g, z)) * eval(g, z) - Mat3::identity()), 1e-9);
    auto const h = exp_loop(random_twisted(rng, 16, 3, 0.3), 1.0);
    EXPECT_GT(unitarity_defect(h), 1e-3);
}

TEST(LogLoop, InvertsExp) {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 5; ++t) {
        auto const g = fixtures::random_group_loop(rng, 24, 0.8);
        EXPECT_LT(sampled_distance(exp_loop(log_loop(g), 1.0), g), 1e-10);
    }
}

// the exponent of exp(zeta^-2 A + zeta^2 Abar), a = -1, z = 0.3+0.2i passes
// the principal branch cut on the circle; the log must still give a path
TEST(LogLoop, ContinuousBranch) {
    VacuumData const vac{-1.0};
    int const n = 48;
    auto const g = exp_loop(fixtures::vacuum_generator(vac, n), cplx(0.3, 0.2));
    auto const lg = log_loop(g);
    EXPECT_LT(sampled_distance(exp_loop(lg, 1.0), g), 1e-10);
    auto const half = exp_loop(lg, 0.5);
    EXPECT_LT(sampled_distance(multiply(half, half), g), 1e-9);
}

TEST(Untwist, DiagonalExample) {
    auto const A = fixtures::dressing_vacuum().A();
    auto const h = untwist(TwistedLoop::monomial(-2, A, 4));
    EXPECT_LT(norm(h[-1] - A), 1e-15);
    for (int k = -h.modes_limit(); k <= h.modes_limit(); ++k)
        if (k != -1) {
            EXPECT_LT(norm(h[k]), 1e-15);
        }
}

TEST(Untwist, HomomorphismAndRoundTrip) {
    std::mt19937_64 rng(18);
    auto const a = fixtures::random_group_loop(rng, 20, 0.5), b = fixtures::random_group_loop(rng, 20, 0.5);
    auto const ua = untwist(a), ub = untwist(b), uab = untwist(multiply(a, b));
    for (cplx z : circle16()) {
        cplx const lam = z * z;
        EXPECT_LT(norm(eval(uab, lam) - eval(ua, lam) * eval(ub, lam)), 1e-11);
        // kappa^-1 g kappa at zeta
        EXPECT_LT(norm(eval(ua, lam) - inverse(kappa(z)) * eval(a, z) * kappa(z)), 1e-11);
    }
    EXPECT_LT(max_distance(retwist(ua, 20), a), 1e-14);
}

TEST(Untwist, CheckTau) {
    std::mt19937_64 rng(19);
    EXPECT_LT(check_tau_untwisted(untwist(TwistedLoop::identity(4))), 1e-15);
    auto const g = fixtures::random_group_loop(rng, 24, 0.5);
    EXPECT_LT(check_tau_untwisted(untwist(g)), 1e-9);
    // oracle: S_lambda^{-1} ghat(lambda)* S_lambda versus ghat(-lambda) by direct evaluation
    auto const h = untwist(g);
    for (cplx z : circle16()) {
        cplx const lam = z * z;
        Mat3 const star = transpose(inverse(eval(h, lam)));
        EXPECT_LT(norm(eval(h, -lam) - inverse(S_lambda(lam)) * star * S_lambda(lam)), 1e-9);
    }
    auto bad = g;
    bad.at(1) += Mat3::diag(0.05, -0.05, 0.0);
    EXPECT_THROW(untwist(bad), InvalidInput);
}

TEST(Untwist, PlusLoopShapeAtZero) {
    auto const g = fixtures::dressing_element(16);
    auto const h = untwist(g);
    EXPECT_LT(negative_mode_mass(g), 1e-14);
    for (int k = 1; k <= h.modes_limit(); ++k) EXPECT_LT(norm(h[-k]), 1e-14);
    Mat3 const h0 = h[0];
    EXPECT_LT(std::abs(h0(1, 0)) + std::abs(h0(2, 0)) + std::abs(h0(2, 1)), 1e-14);
}

TEST(Arithmetic, ResizeShiftAndMasses) {
    std::mt19937_64 rng(20);
    auto const a = random_twisted(rng, 6, 2);
    auto const r = resize(a, 10);
    EXPECT_EQ(r.modes_limit(), 10);
    EXPECT_LT(max_distance(r, a), 1e-16);
    auto const s = shift(a, 4);
    EXPECT_EQ(s[3], a[-1]);
    EXPECT_NEAR(mass_outside(a, -1, 1), norm(a[-2]) + norm(a[2]), 1e-15);
    EXPECT_GT(negative_mode_mass(a), 0.0);
    EXPECT_TRUE(a == a);
    EXPECT_FALSE(a == r);
    auto c = a;
    c += a;
    EXPECT_LT(max_distance(c, a * 2.0), 1e-16);
    EXPECT_LT(max_distance(loop_commutator(a, a), TwistedLoop(6)), 1e-15);
}
