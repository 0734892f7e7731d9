#pragma once

#include <cstdint>
#include <random>

#include "geomverify.hpp"
#include "killing.hpp"
#include "theta.hpp"

// Deterministic inputs shared by the tests, the acceptance driver and the CLI.
namespace hsl::fixtures {

inline constexpr int kDressModes = 32;
inline constexpr double kDressSize = 0.5;
inline constexpr int kDressGrid = 24;
inline constexpr int kDressOrder = 8;
inline constexpr std::uint64_t kDressSeed = 7;
inline constexpr double kDressMass = 0.3;

inline VacuumData dressing_vacuum() { return {cplx(0.3, 0.15)}; }

// mu = -2 Re(mu0) dx - 2 Im(mu0) dy
inline std::pair<double, double> vacuum_maslov(VacuumData const& v) { return {-2 * v.mu0.real(), -2 * v.mu0.imag()}; }

// zeta^-2 A + zeta^2 Abar
inline TwistedLoop vacuum_generator(VacuumData const& v, int n = kDefaultModes) {
    TwistedLoop l(n);
    l.at(-2) = v.A();
    l.at(2) = v.A_bar();
    l.real = true;
    return l;
}

// Plus-mode potential on modes 1..top with total coefficient norm `mass`.
inline TwistedLoop plus_potential(std::uint64_t seed, double mass, int n, int top = 3) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd;
    TwistedLoop pot(n);
    double tot = 0;
    for (int k = 1; k <= top; ++k) {
        Mat3 m;
        for (auto& e : m.data()) e = cplx(nd(rng), nd(rng));
        m -= Mat3::identity() * (trace(m) / 3.0);
        pot.at(k) = project_eigenspace_unchecked(m, k);
        tot += norm(pot[k]);
    }
    for (int k = 1; k <= top; ++k) pot.at(k) = pot[k] * (mass / tot);
    pot.plus = true;
    return pot;
}

inline TwistedLoop dressing_element(int n = kDressModes, std::uint64_t seed = kDressSeed, double mass = kDressMass) {
    auto g = exp_loop(plus_potential(seed, mass, n), 1.0);
    g.plus = true;
    return g;
}

// exp(zeta^2 c D + zeta^4 diag(b, -b, 0)) commutes with A, so it fixes the vacuum.
inline TwistedLoop centralizer_element(int n = kDressModes, cplx c = {0.2, -0.1}, cplx b = {0.1, 0.05}) {
    TwistedLoop x(n);
    x.at(2) = D_matrix() * c;
    x.at(4) = Mat3::diag(b, -b, 0.0);
    auto g = exp_loop(x, 1.0);
    g.plus = true;
    return g;
}

inline GridGeometry dressing_grid(int n = kDressGrid) { return GridGeometry::centered_square(n, kDressSize); }

struct DressedFixture {
    VacuumData vac;
    TwistedLoop g;
    ExtendedFrameField vacuum;
    DressResult dressed;
};

inline DressedFixture dressed_fixture(int n = kDressGrid) {
    DressedFixture f{dressing_vacuum(), dressing_element(), {}, {}};
    f.vacuum = vacuum_field(f.vac, dressing_grid(n), kDressModes);
    f.dressed = dress(f.g, f.vacuum);
    return f;
}

// Vacuum MC data with alpha_{-1}(d/dz) = (w - w(i0, j0)) X, X in g_{-1}.
inline MaurerCartanField engineered_branch_mc(GridGeometry const& g, int i0, int j0, VacuumData const& vac = {}) {
    auto m = vacuum_mc(vac, g);
    Mat3 x;
    x(0, 2) = 1.0;
    x(2, 1) = -kI;
    x = project_eigenspace_unchecked(x, -1);
    cplx const w0 = g.w(i0, j0);
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) {
            auto& s = m.samples[g.index(i, j)];
            s.dz[1] = x * (g.w(i, j) - w0);
            s.dzbar[3] = real_conjugate(s.dz[1]);
        }
    return m;
}

// exp of a random twisted algebra loop on modes -top..top with total
// coefficient norm `mass`
template <class Rng>
TwistedLoop random_group_loop(Rng& rng, int n, double mass, int top = 3) {
    std::normal_distribution<double> nd;
    TwistedLoop xi(n);
    double tot = 0;
    for (int k = -top; k <= top; ++k) {
        Mat3 m;
        for (auto& e : m.data()) e = cplx(nd(rng), nd(rng));
        m -= Mat3::identity() * (trace(m) / 3.0);
        xi.at(k) = project_eigenspace_unchecked(m, k);
        tot += norm(xi[k]);
    }
    for (int k = -top; k <= top; ++k) xi.at(k) = xi[k] * (mass / tot);
    return exp_loop(xi, 1.0);
}

// real Laurent polynomial with modes -(4d+2)..(4d+2)
inline TwistedLoop lax_seed(std::uint64_t seed, int d = 0, double mass = 1.0) {
    std::mt19937_64 rng(seed);
    return random_real_loop(rng, 4 * d + 2, mass, 8 * d + 4);
}

// Symmetric Omega with Im Omega = B B^T + floor I.
template <class Rng>
CMat random_period_matrix(Rng& rng, int g, double floor = 0.5) {
    std::normal_distribution<double> nd;
    Eigen::MatrixXd x(g, g), b(g, g);
    for (int r = 0; r < g; ++r)
        for (int c = 0; c < g; ++c) {
            x(r, c) = nd(rng);
            b(r, c) = 0.5 * nd(rng);
        }
    Eigen::MatrixXd const re = 0.5 * (x + x.transpose());
    Eigen::MatrixXd const im = b * b.transpose() + floor * Eigen::MatrixXd::Identity(g, g);
    CMat om(g, g);
    om.real() = re;
    om.imag() = im;
    return om;
}

inline constexpr double kJacobiTheta = 1.0864348112133080;  // sum_n exp(-pi n^2)

}  // namespace hsl::fixtures
