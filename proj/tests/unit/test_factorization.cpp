#include "testing.hpp"

using namespace hsl;
using hsl::testing::random_twisted;

namespace {

// real twisted loop with modes -top..top
TwistedLoop random_real(std::mt19937_64& rng, int n, int top, double scale) {
    return random_real_loop(rng, top, scale, n);
}

// plus loop with constant term in Lie(B)
TwistedLoop random_plus(std::mt19937_64& rng, int n, int top, double scale) {
    auto x = random_twisted(rng, n, top, scale);
    for (int k = -top; k < 0; ++k) x.at(k) = Mat3{};
    Mat3 b;
    std::normal_distribution<double> nd;
    b(0, 0) = nd(rng) * scale;
    b(1, 1) = -b(0, 0);
    b(0, 1) = cplx(nd(rng), nd(rng)) * scale;
    x.at(0) = b;
    return x;
}

}  // namespace

TEST(AlgebraSplit, RealAndPlusInputs) {
    std::mt19937_64 rng(21);
    auto const r = random_real(rng, 8, 4, 1.0);
    auto const s = algebra_split(r);
    EXPECT_LT(max_distance(s.e, r), 1e-15);
    EXPECT_LT(max_distance(s.i, TwistedLoop(8)), 1e-15);
    auto const p = random_plus(rng, 8, 4, 1.0);
    auto const s2 = algebra_split(p);
    EXPECT_LT(max_distance(s2.e, TwistedLoop(8)), 1e-15);
    EXPECT_LT(max_distance(s2.i, p), 1e-15);
}

// the split is unique: summing known parts and splitting recovers them
TEST(AlgebraSplit, RecoversConstructedParts) {
    std::mt19937_64 rng(22);
    for (int t = 0; t < 20; ++t) {
        auto const e = random_real(rng, 8, 8, 1.0);
        auto const i = random_plus(rng, 8, 8, 1.0);
        auto const s = algebra_split(e + i);
        EXPECT_LT(max_distance(s.e, e), 1e-14);
        EXPECT_LT(max_distance(s.i, i), 1e-14);
    }
}

TEST(AlgebraSplit, ResumAndMemberships) {
    std::mt19937_64 rng(23);
    for (int t = 0; t < 20; ++t) {
        auto const xi = random_twisted(rng, 8, 8, 0.5);
        auto const s = algebra_split(xi);
        EXPECT_LE(max_distance(s.e + s.i, xi), 1e-15);
        EXPECT_LT(reality_defect(s.e), 1e-15);
        EXPECT_EQ(negative_mode_mass(s.i), 0.0);
        EXPECT_LT(twist_defect(s.e) + twist_defect(s.i), 1e-14);
        Mat3 const b = s.i[0];
        EXPECT_EQ(b(1, 0), cplx{});
        EXPECT_EQ(b(0, 0).imag(), 0.0);
    }
}

TEST(AlgebraSplit, RejectsTwistViolation) {
    TwistedLoop xi(4);
    xi.at(1) = Mat3::diag(1.0, -1.0, 0.0);
    EXPECT_THROW(algebra_split(xi), InvalidInput);
}

TEST(Iwasawa, Identity) {
    auto const f = iwasawa_factorize(TwistedLoop::identity(12));
    EXPECT_LT(max_distance(f.e_part, TwistedLoop::identity(12)), 1e-15);
    EXPECT_LT(max_distance(f.i_part, TwistedLoop::identity(12)), 1e-15);
    EXPECT_EQ(f.residual, 0.0);
}

TEST(Iwasawa, RealLoopIsItsOwnEPart) {
    std::mt19937_64 rng(24);
    auto const g = exp_loop(random_real(rng, 24, 3, 0.5), 1.0);
    auto const f = iwasawa_factorize(g);
    EXPECT_LT(max_distance(f.i_part, TwistedLoop::identity(24)), 1e-9);
    EXPECT_LT(max_distance(f.e_part, g), 1e-9);
}

TEST(Iwasawa, PlusLoopIsItsOwnIPart) {
    auto const g = fixtures::dressing_element(24);
    auto const f = iwasawa_factorize(g);
    EXPECT_LT(max_distance(f.e_part, TwistedLoop::identity(24)), 1e-9);
    EXPECT_LT(max_distance(f.i_part, g), 1e-9);
}

TEST(Iwasawa, RandomLoopsRoundTripAndMemberships) {
    std::mt19937_64 rng(25);
    for (int t = 0; t < 10; ++t) {
        auto const g = fixtures::random_group_loop(rng, 16, 0.5);
        auto const f = iwasawa_factorize(g);
        EXPECT_LT(f.residual, 1e-9);
        EXPECT_LT(sampled_distance(multiply(f.e_part, f.i_part), g), 1e-8);
        EXPECT_LT(unitarity_defect(f.e_part), 1e-9);
        EXPECT_LT(negative_mode_mass(f.i_part), 1e-10);
        EXPECT_LT(b_normalization_defect(f.i_part), 1e-10);
        EXPECT_LT(group_twist_defect(f.e_part) + group_twist_defect(f.i_part), 1e-9);
        auto const f2 = iwasawa_factorize(multiply(f.e_part, f.i_part));
        EXPECT_LT(max_distance(f2.e_part, f.e_part), 1e-9);
        EXPECT_LT(max_distance(f2.i_part, f.i_part), 1e-9);
    }
}

// All matrices diagonal and commuting: exp(z eta) = exp(z zeta^-2 A + zbar zeta^2 Abar) exp((z - zbar) zeta^2 Abar)
TEST(Iwasawa, DiagonalClosedForm) {
    VacuumData const vac{1.0};
    cplx const z(0.3, 0.2);
    int const n = 48;
    auto const g = exp_loop(fixtures::vacuum_generator(vac, n), z);
    auto const f = iwasawa_factorize(g);
    TwistedLoop e_or(n), i_or(n);
    // entrywise double series, independent of vacuum_frame
    for (int d = 0; d < 3; ++d) {
        cplx const p = z * vac.A()(d, d), q = std::conj(z) * vac.A_bar()(d, d), r = (z - std::conj(z)) * vac.A_bar()(d, d);
        for (int m = 0; m < 70; ++m)
            for (int l = 0; l < 70; ++l) {
                int const k = 2 * (l - m);
                if (!e_or.in_range(k)) continue;
                e_or.at(k)(d, d) += std::pow(p, m) * std::pow(q, l) / (std::tgamma(m + 1.0) * std::tgamma(l + 1.0));
            }
        for (int l = 0; 2 * l <= n; ++l) i_or.at(2 * l)(d, d) = std::pow(r, l) / std::tgamma(l + 1.0);
    }
    EXPECT_LT(max_distance(f.e_part, e_or), 1e-12);
    EXPECT_LT(max_distance(f.i_part, i_or), 1e-12);
}

TEST(Iwasawa, GuessesGiveSameAnswer) {
    std::mt19937_64 rng(26);
    auto const g = fixtures::random_group_loop(rng, 16, 0.5);
    auto const f = iwasawa_factorize(g);
    FactorizeOptions o;
    o.e_guess = f.e_part;
    o.i_guess = f.i_part;
    auto const f2 = iwasawa_factorize(g, o);
    EXPECT_LT(max_distance(f2.e_part, f.e_part), 1e-10);
    EXPECT_LE(f2.iterations, 3);
}

TEST(Iwasawa, Errors) {
    TwistedLoop sing(4);
    sing.at(0) = Mat3::diag(1.0, 0.0, 1.0);
    EXPECT_THROW(iwasawa_factorize(sing), InvalidInput);
    std::mt19937_64 rng(27);
    auto const g = fixtures::random_group_loop(rng, 16, 3.0);
    FactorizeOptions o;
    o.max_iterations = 1;
    o.min_step = 0.5;
    try {
        iwasawa_factorize(g, o);
        FAIL() << "expected a convergence failure";
    } catch (ConvergenceFailure const& e) {
        EXPECT_NE(std::string(e.what()).find("residual trace"), std::string::npos);
    }
}
