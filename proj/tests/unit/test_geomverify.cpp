#include "testing.hpp"

using namespace hsl;

namespace {

template <class F>
ImmersionSample sample_map(GridGeometry const& g, F f) {
    std::vector<Vec3> lifts(g.size());
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) lifts[g.index(i, j)] = f(g.w(i, j));
    return ImmersionSample::make(g, std::move(lifts));
}

template <class F>
std::vector<double> sample_scalar(GridGeometry const& g, F f) {
    std::vector<double> out(g.size());
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) out[g.index(i, j)] = f(g.w(i, j));
    return out;
}

double max_of(std::vector<double> const& v) { return *std::max_element(v.begin(), v.end()); }

}  // namespace

// [1, w, 0]: a complex line, horizontal derivative norm^2 = 1/(1+|w|^2)^2
TEST(Pullbacks, HolomorphicLine) {
    auto const g = GridGeometry::centered_square(24, 0.6);
    auto const s = sample_map(g, [](cplx w) { return Vec3{1.0, w, 0.0}; });
    auto const p = fubini_study_pullbacks(s);
    double dev = 0;
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) {
            std::size_t const k = g.index(i, j);
            double const e = 1.0 / std::pow(1.0 + std::norm(g.w(i, j)), 2);
            dev = std::max({dev, std::abs(p.E[k] - e), std::abs(p.G[k] - e), std::abs(p.F[k]), std::abs(std::abs(p.omega[k]) - e)});
        }
    EXPECT_LT(dev, 1e-9);
    auto const d = point_defects(p);
    EXPECT_LT(max_of(d.conformality), 1e-9);
    EXPECT_GT(*std::min_element(d.lagrangian.begin(), d.lagrangian.end()), 0.4);
}

// real points [1, x, y] are Lagrangian; E - G and F in closed form
TEST(Pullbacks, RealPlane) {
    auto const g = GridGeometry::centered_square(32, 0.8);
    auto const s = sample_map(g, [](cplx w) { return Vec3{1.0, w.real(), w.imag()}; });
    auto const d = point_defects(fubini_study_pullbacks(s));
    EXPECT_LT(max_of(d.lagrangian), 1e-12);
    double dev = 0, peak = 0;
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) {
            double const x = g.w(i, j).real(), y = g.w(i, j).imag();
            double const c = std::max(std::abs(y * y - x * x), std::abs(x * y)) / (2 + x * x + y * y);
            dev = std::max(dev, std::abs(d.conformality[g.index(i, j)] - c));
            peak = std::max(peak, c);
        }
    EXPECT_LT(dev, 1e-9);
    EXPECT_GT(peak, 0.05);
}

TEST(Pullbacks, ConstantMapIsDegenerate) {
    auto const g = GridGeometry::centered_square(12, 0.5);
    auto const s = sample_map(g, [](cplx) { return Vec3{1.0, kI, 0.5}; });
    auto const p = fubini_study_pullbacks(s);
    EXPECT_LT(max_of(p.E) + max_of(p.G), 1e-28);
    auto const d = point_defects(p);
    EXPECT_EQ(d.degenerate, static_cast<int>(g.size()));
    EXPECT_THROW(fubini_study_pullbacks(sample_map(GridGeometry::centered_square(6, 0.5), [](cplx) { return Vec3{1.0, 0.0, 0.0}; })),
                 InvalidInput);
}

TEST(Verify, GenusZeroTorus) {
    for (cplx a : {cplx(0.5), cplx(0.3, 0.4)}) {
        auto const d = genus0_data({a});
        auto const s = genus0_sample(d, 48);
        auto const v = verify_immersion(s);
        EXPECT_LT(v.report.conformality_max, 1e-6) << a;
        EXPECT_LT(v.report.lagrangian_max, 1e-6) << a;
        EXPECT_EQ(v.report.degenerate_points, 0);
        EXPECT_EQ(v.report.unwrap_failures, 0);
        EXPECT_LT(v.report.angle_path_defect, 1e-12);
        // beta is affine, slope along the Maslov coordinate
        EXPECT_LT(affinity_defect(v.angle, s.grid, 2 * kPi * kMaslovCoordinate, 0.0), 1e-5) << a;
        EXPECT_GT(affinity_defect(v.angle, s.grid, 0.0, 0.0), 0.1);
        EXPECT_LT(v.report.harmonicity, 1e-4);
        EXPECT_LT(v.report.maslov.variation, 1e-4);
        EXPECT_NEAR(v.report.maslov.mu_x, -2 * kPi * kMaslovCoordinate, 1e-5);
        EXPECT_NEAR(v.report.maslov.mu_y, 0.0, 1e-5);
    }
}

// Laplacian of beta and the spread of d beta are pure discretization error
TEST(Verify, GenusZeroDefectsRefine) {
    auto const d = genus0_data({0.5});
    auto const c = verify_immersion(genus0_sample(d, 24)).report, f = verify_immersion(genus0_sample(d, 48)).report;
    EXPECT_GT(std::log2(c.harmonicity / f.harmonicity), 4.0) << c.harmonicity << " -> " << f.harmonicity;
    EXPECT_GT(std::log2(c.maslov.variation / f.maslov.variation), 4.0) << c.maslov.variation << " -> " << f.maslov.variation;
}

TEST(Verify, MinimalTorusHasZeroMaslovForm) {
    auto const v = verify_immersion(genus0_sample(minimal_limit_data(), 32));
    EXPECT_LT(v.report.maslov.magnitude(), 1e-6);
    EXPECT_LT(v.report.conformality_max, 1e-6);
    EXPECT_LT(v.report.lagrangian_max, 1e-6);
}

TEST(Harmonicity, Quadratics) {
    auto const g = GridGeometry::centered_square(16, 0.7);
    auto const re2 = sample_scalar(g, [](cplx w) { return (w * w).real(); });
    EXPECT_LT(harmonicity_defect(g, re2).defect, 1e-6);
    auto const abs2 = sample_scalar(g, [](cplx w) { return std::norm(w); });
    EXPECT_NEAR(harmonicity_defect(g, abs2).defect, 4.0, 1e-6);
    // skewed grid uses the mixed term
    auto const pg = GridGeometry::parallelogram(16, cplx(0.8, 0.1), cplx(0.3, 0.9));
    EXPECT_LT(harmonicity_defect(pg, sample_scalar(pg, [](cplx w) { return (w * w).imag() + 3 * w.real(); })).defect, 1e-6);
    EXPECT_NEAR(harmonicity_defect(pg, sample_scalar(pg, [](cplx w) { return std::norm(w); })).defect, 4.0, 1e-6);
    std::vector<char> flags(g.size(), 0);
    flags[g.index(5, 5)] = 1;
    EXPECT_EQ(harmonicity_defect(g, re2, &flags).excluded, 9);
    EXPECT_THROW(harmonicity_defect(g, std::vector<double>(3)), InvalidInput);
}

TEST(Quadrature, CumulativeIsExactForCubics) {
    std::vector<double> f;
    for (int k = 0; k < 9; ++k) f.push_back(k * k * k - 2.0 * k);
    auto const c = detail::cumulative(f, 3);
    for (int k = 0; k < 9; ++k) {
        auto prim = [](double x) { return x * x * x * x / 4 - x * x; };
        EXPECT_NEAR(c[k], prim(k) - prim(3), 1e-12);
    }
    EXPECT_THROW(detail::cumulative({1.0, 2.0, 3.0}, 0), InvalidInput);
    EXPECT_NEAR(detail::nearest_branch(0.1 + 4 * kPi, 0.0), 0.1, 1e-14);
}

TEST(Frames, LagrangianFrameOfGenusZero) {
    auto const d = genus0_data({0.5});
    double g1[2];
    int const sizes[2] = {24, 48};
    for (int t = 0; t < 2; ++t) {
        auto const s = genus0_sample(d, sizes[t]);
        auto const v = verify_immersion(s);
        auto const F = lagrangian_frame(s, v.pullbacks, v.angle);
        double unit = 0, col = 0;
        for (std::size_t k = 0; k < F.size(); ++k) {
            unit = std::max(unit, norm(adjoint(F[k]) * F[k] - Mat3::identity()));
            col = std::max(col, fs_distance(F[k].column(2), s.lifts[k]));
        }
        EXPECT_LT(unit, 1e-12);
        EXPECT_LT(col, 1e-12);
        auto const mc = extended_maurer_cartan(s.grid, F);
        g1[t] = 0;
        for (auto const& x : mc.samples) g1[t] = std::max(g1[t], norm(x.dz_mode(1)));
        auto const scan = branch_point_scan(mc);
        EXPECT_FALSE(scan.degenerate);
        EXPECT_TRUE(scan.candidates.empty());
    }
    // the g1 part of alpha(d/dz) vanishes in the limit
    EXPECT_LT(g1[1], 1e-5);
    EXPECT_GT(std::log2(g1[0] / g1[1]), 4.0) << g1[0] << " -> " << g1[1];
}

TEST(BranchPoints, VacuumAndEngineered) {
    auto const vac = fixtures::dressing_vacuum();
    auto const g = GridGeometry::centered_square(11, 0.5);
    auto const v = branch_point_scan(vacuum_mc(vac, g));
    EXPECT_TRUE(v.degenerate);
    EXPECT_EQ(v.candidates.size(), g.size());
    auto const e = branch_point_scan(fixtures::engineered_branch_mc(g, 4, 7, vac));
    EXPECT_FALSE(e.degenerate);
    ASSERT_EQ(e.candidates.size(), 1u);
    EXPECT_EQ(e.candidates[0], std::make_pair(4, 7));
}

TEST(BranchPoints, DressedFixtureHasNone) {
    auto const fx = fixtures::dressed_fixture(12);
    auto const chi = compute_chi(fx.dressed.based_element, fx.vacuum, fx.dressed.frame);
    MaurerCartanOptions o;
    o.order = 8;
    auto const s = branch_point_scan(maurer_cartan(fx.dressed.frame, o), &chi);
    EXPECT_FALSE(s.degenerate);
    EXPECT_TRUE(s.candidates.empty());
    EXPECT_TRUE(s.chi_zeros.empty());
    EXPECT_TRUE(s.chi_agrees);
}
