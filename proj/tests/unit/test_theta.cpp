#include "testing.hpp"

using namespace hsl;

namespace {

// plain box sum, |n_k| <= r
cplx brute_theta(CVec const& w, CMat const& om, int r) {
    int const g = static_cast<int>(w.size());
    std::vector<int> n(g, -r);
    cplx sum = 0;
    for (;;) {
        CVec v(g);
        for (int k = 0; k < g; ++k) v(k) = n[k];
        sum += std::exp(kI * kPi * v.dot(om * v) + 2.0 * kPi * kI * v.dot(w));
        int k = 0;
        while (k < g && ++n[k] > r) n[k++] = -r;
        if (k == g) break;
    }
    return sum;
}

ReconstructionData genus1_data() {
    ReconstructionData d;
    d.g = 1;
    CMat om(1, 1);
    om(0, 0) = cplx(0.2, 1.1);
    d.omega = PeriodMatrix(om);
    d.abel_shift2 = CVec::Constant(1, cplx(0.31, 0.12));
    d.abel_shift3 = CVec::Constant(1, cplx(-0.17, 0.05));
    d.kappa = CVec::Constant(1, cplx(0.08, -0.03));
    d.c1 = cplx(0.7, 0.2);
    d.c2 = cplx(-0.4, 0.9);
    d.U = CVec(3);
    d.U << cplx(0.3, 0.1), cplx(-0.2, 0.25), cplx(0.05, -0.4);
    return d;
}

}  // namespace

TEST(Theta, JacobiConstant) {
    double direct = 0;
    for (int n = -8; n <= 8; ++n) direct += std::exp(-kPi * n * n);
    EXPECT_NEAR(direct, fixtures::kJacobiTheta, 1e-15);
    CMat om(1, 1);
    om(0, 0) = kI;
    EXPECT_NEAR(std::abs(theta(CVec::Zero(1), PeriodMatrix(om)) - direct), 0.0, 1e-15);
}

TEST(Theta, MatchesBoxSum) {
    std::mt19937_64 rng(71);
    std::normal_distribution<double> nd;
    for (int g = 1; g <= 3; ++g)
        for (int t = 0; t < 3; ++t) {
            CMat const om = fixtures::random_period_matrix(rng, g);
            CVec w(g);
            for (int k = 0; k < g; ++k) w(k) = cplx(nd(rng), 0.3 * nd(rng));
            cplx const ref = brute_theta(w, om, g == 3 ? 7 : 10);
            EXPECT_LT(std::abs(theta(w, PeriodMatrix(om)) - ref) / std::abs(ref), 1e-12) << "g=" << g;
        }
}

TEST(Theta, PeriodicityParityAndQuasiPeriodicity) {
    std::mt19937_64 rng(72);
    std::normal_distribution<double> nd;
    PeriodMatrix const P(fixtures::random_period_matrix(rng, 2));
    CVec w(2);
    w << cplx(0.3, 0.1), cplx(-0.6, 0.2);
    cplx const t0 = theta(w, P);
    CVec m(2);
    m << 1.0, -2.0;
    EXPECT_LT(std::abs(theta(w + m, P) - t0), 1e-12);
    EXPECT_LT(std::abs(theta(-w, P) - t0), 1e-12);
    // re-indexing n -> n + m in the defining sum
    cplx const lhs = theta(w + P.omega() * m, P);
    cplx const rhs = std::exp(-kI * kPi * m.dot(P.omega() * m) - 2.0 * kPi * kI * m.dot(w)) * t0;
    EXPECT_LT(std::abs(lhs - rhs) / std::abs(rhs), 1e-10);
}

TEST(Theta, GenusZeroIsOne) {
    PeriodMatrix const P(CMat(0, 0));
    EXPECT_EQ(P.genus(), 0);
    EXPECT_EQ(theta(CVec(0), P), cplx(1.0));
}

TEST(PeriodMatrix, Rejections) {
    EXPECT_THROW(PeriodMatrix(CMat::Identity(2, 3)), InvalidInput);
    CMat ns(2, 2);
    ns << kI, 0.5, 0.0, kI;
    EXPECT_THROW(PeriodMatrix{ns}, InvalidInput);
    CMat indef(2, 2);
    indef << kI, 0.0, 0.0, -kI;
    EXPECT_THROW(PeriodMatrix{indef}, InvalidInput);
    CMat om(1, 1);
    om(0, 0) = kI;
    EXPECT_THROW(theta(CVec::Zero(2), PeriodMatrix(om)), InvalidInput);
}

TEST(Reconstruction, Validation) {
    auto d = genus1_data();
    EXPECT_NO_THROW(d.validate());
    auto bad = d;
    bad.U = CVec::Zero(2);
    EXPECT_THROW(bad.validate(), InvalidInput);
    bad = d;
    bad.c2 = 0.0;
    EXPECT_THROW(bad.validate(), InvalidInput);
    bad = d;
    bad.kappa = CVec(0);
    EXPECT_THROW(bad.validate(), InvalidInput);
    EXPECT_THROW(phi_sections(CVec::Zero(2), d), InvalidInput);
}

TEST(Reconstruction, ProjectiveInvariances) {
    auto const d = genus1_data();
    CVec wt(3);
    wt << cplx(0.21, 0.1), 0.4, -0.35;
    Vec3 const p = theta_map(wt, d);
    EXPECT_NEAR(vnorm(p), 1.0, 1e-15);
    for (int k = 0; k < 3; ++k) {
        CVec s = wt;
        s(k) += k == 0 ? 1.0 : -3.0;
        EXPECT_LT(fs_distance(theta_map(s, d), p), 1e-12) << k;
    }
    auto scaled = d;
    cplx const c(2.5, -1.3);
    scaled.c0 *= c;
    scaled.c1 *= c;
    scaled.c2 *= c;
    EXPECT_LT(fs_distance(theta_map(wt, scaled), p), 1e-14);
}

TEST(Reconstruction, ThetaDivisorThrows) {
    auto d = genus1_data();
    d.kappa = CVec::Zero(1);
    CMat om(1, 1);
    om(0, 0) = kI;
    d.omega = PeriodMatrix(om);
    // theta(.; i) vanishes at (1 + i)/2
    CVec wt(3);
    wt << cplx(0.5, 0.5), 0.0, 0.0;
    EXPECT_LT(std::abs(theta(wt.head(1), d.omega)), 1e-14);
    EXPECT_THROW(theta_map(wt, d), InvalidInput);
}

TEST(Reconstruction, FlowLine) {
    auto const d = genus1_data();
    EXPECT_EQ(flow_line(d, 0.0), CVec::Zero(3));
    cplx const w(0.3, -0.7);
    CVec const f = flow_line(d, w);
    for (int k = 0; k < 3; ++k) {
        EXPECT_EQ(f(k).imag(), 0.0);
        EXPECT_NEAR(f(k).real(), (w * d.U(k) + std::conj(w) * std::conj(d.U(k))).real(), 1e-15);
    }
}

TEST(Reconstruction, GenusZeroReproducesImmersion) {
    for (cplx a : {cplx(0.5), cplx(0.3, 0.4)}) {
        auto const d = genus0_data({a});
        auto const rd = reconstruction_from_genus0(d);
        for (cplx w : {cplx(0.0), cplx(0.17, -0.3), d.gamma1 * 0.6 + d.gamma2 * 0.25})
            EXPECT_LT(fs_distance(theta_map(flow_line(rd, w), rd), genus0_immersion(d, w)), 1e-13);
    }
}
