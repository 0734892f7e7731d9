#pragma once

#include "grid.hpp"

namespace hsl {

struct Genus0Params {
    cplx a{0.5, 0.0};
    bool minimal_limit = false;
};

struct Genus0Data {
    cplx a{};
    bool minimal_limit = false;
    cplx O2{}, O3{};
    cplx Cplus{}, Cminus{};
    cplx c1{}, c2{};
    cplx A1{}, A2{};
    std::array<cplx, 2> U1{}, U2{}, U{};
    cplx gamma1{}, gamma2{};
};

inline cplx lambda_of(cplx a, cplx zeta) {
    cplx const ab = std::conj(a);
    cplx const den = (ab * ab * zeta * zeta - 1.0) * (1.0 - a * a);
    if (std::abs(den) < 1e-300) throw InvalidInput("lambda_of: pole of lambda");
    return zeta * (zeta * zeta - a * a) * (ab * ab - 1.0) / den;
}

namespace detail {

// gamma_k with 2 Re(gamma_k U_j) = delta_jk
inline std::pair<cplx, cplx> lattice_from(std::array<cplx, 2> const& U) {
    // 2 Re((x + iy) U) = 2 (x Re U - y Im U)
    double const m00 = 2 * U[0].real(), m01 = -2 * U[0].imag();
    double const m10 = 2 * U[1].real(), m11 = -2 * U[1].imag();
    double const dt = m00 * m11 - m01 * m10;
    if (std::abs(dt) < 1e-12 * (std::abs(m00 * m11) + std::abs(m01 * m10) + 1e-300))
        throw InvalidInput("genus0: degenerate period lattice");
    // inverse columns
    cplx const g1(m11 / dt, -m10 / dt);
    cplx const g2(-m01 / dt, m00 / dt);
    return {g1, g2};
}

}  // namespace detail

// Closed forms for the homogeneous tori.  U_1 is the residue of lambda^{-1}
// omega_j at zeta = a, and A_j = 2 pi i U_j so that the immersion is exactly
// the theta map composed with the flow line and is periodic on the lattice.
inline Genus0Data genus0_data(Genus0Params const& p) {
    if (p.minimal_limit) throw InvalidInput("genus0_data: use minimal_limit_data() for a = 0");
    cplx const a = p.a;
    double const ra = std::abs(a);
    if (!(ra > 0) || !(ra < 1)) throw InvalidInput("genus0_data: need 0 < |a| < 1");
    Genus0Data d;
    d.a = a;
    cplx const ab = std::conj(a);
    double const a4 = ra * ra * ra * ra;
    cplx const pp = (1.0 - a4) / (1.0 - ab * ab);
    cplx const qq = (1.0 - a * a) / (1.0 - ab * ab);
    cplx const disc = std::sqrt(pp * pp - 4.0 * qq);
    d.O2 = (-pp + disc) / 2.0;
    d.O3 = (-pp - disc) / 2.0;
    cplx const s = std::sqrt(cplx((a4 - 1.0) * (a4 - 9.0)));
    d.Cplus = (3.0 - a4 + s) / (2.0 * ab * ab);
    d.Cminus = (3.0 - a4 - s) / (2.0 * ab * ab);
    auto k = [&](cplx z) { return (z * z - d.Cplus) * (ab * ab - 1.0) / ((ab * ab * z * z - 1.0) * (1.0 - d.Cplus)); };
    d.c1 = 1.0 / k(d.O2);
    d.c2 = 1.0 / k(d.O3);
    cplx const pre = 1.0 / (2.0 * kPi * kI) * (1.0 - a4) / (2.0 * a * a);
    cplx const f1 = pre * (1.0 + a) / (ab * ab - 1.0);
    cplx const f2 = pre * (1.0 - a) / (1.0 - ab * ab);
    d.U1 = {f1 * (d.O2 - 1.0) / (a - d.O2), f1 * (d.O3 - 1.0) / (a - d.O3)};
    d.U2 = {f2 * (d.O2 - 1.0) / (a + d.O2), f2 * (d.O3 - 1.0) / (a + d.O3)};
    cplx const c = 1.5 * kPi * kI;
    d.U = {c * (d.U1[0] + d.U2[0]), c * (d.U1[1] + d.U2[1])};
    d.A1 = 2.0 * kPi * kI * d.U[0];
    d.A2 = 2.0 * kPi * kI * d.U[1];
    std::tie(d.gamma1, d.gamma2) = detail::lattice_from(d.U);
    return d;
}

// a = 0: lambda = zeta^3, O_{2,3} the primitive cube roots of unity, k = 1,
// U = d/dzeta of the Abel map at zeta = 0.
inline Genus0Data minimal_limit_data() {
    Genus0Data d;
    d.minimal_limit = true;
    d.O2 = std::polar(1.0, 2 * kPi / 3);
    d.O3 = std::polar(1.0, -2 * kPi / 3);
    d.c1 = d.c2 = 1.0;
    cplx const f = 1.0 / (2.0 * kPi * kI);
    d.U = {f * (1.0 - 1.0 / d.O2), f * (1.0 - 1.0 / d.O3)};
    d.A1 = 2.0 * kPi * kI * d.U[0];
    d.A2 = 2.0 * kPi * kI * d.U[1];
    std::tie(d.gamma1, d.gamma2) = detail::lattice_from(d.U);
    return d;
}

// The torus has Maslov form (dw + dwbar)/2 in the parameter w used here; in
// w_M = kMaslovCoordinate * w it is -(dw_M + dwbar_M).
inline constexpr double kMaslovCoordinate = -0.5;

inline Vec3 genus0_immersion(Genus0Data const& d, cplx w) {
    // w A - conj(w A) = 2i Im(w A)
    Vec3 z{1.0, d.c1 * std::exp(kI * (2.0 * (w * d.A1).imag())), d.c2 * std::exp(kI * (2.0 * (w * d.A2).imag()))};
    return z * (1.0 / vnorm(z));
}

inline double conformal_lagrangian_identity(Genus0Data const& d) {
    double const n1 = std::norm(d.c1), n2 = std::norm(d.c2);
    cplx const r = d.A1 * d.A1 * n1 + d.A2 * d.A2 * n2 + n1 * n2 * (d.A2 - d.A1) * (d.A2 - d.A1);
    double const s = std::norm(d.A1) * n1 + std::norm(d.A2) * n2 + n1 * n2 * std::norm(d.A2 - d.A1);
    return std::abs(r) / s;
}

// The unitary diagonal h(v) with f(w + v) = h(v) f(w).
inline Mat3 genus0_translation(Genus0Data const& d, cplx v) {
    return Mat3::diag(1.0, std::exp(kI * (2.0 * (v * d.A1).imag())), std::exp(kI * (2.0 * (v * d.A2).imag())));
}

// n x n samples over one fundamental domain spanned by gamma1, gamma2
inline ImmersionSample genus0_sample(Genus0Data const& d, int n) {
    auto g = GridGeometry::parallelogram(n, d.gamma1, d.gamma2);
    std::vector<Vec3> lifts(g.size());
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) lifts[g.index(i, j)] = genus0_immersion(d, g.w(i, j));
    return ImmersionSample::make(g, std::move(lifts));
}

// Same data with O2 and O3 exchanged.
inline Genus0Data swapped(Genus0Data d) {
    std::swap(d.O2, d.O3);
    std::swap(d.c1, d.c2);
    std::swap(d.A1, d.A2);
    std::swap(d.U1[0], d.U1[1]);
    std::swap(d.U2[0], d.U2[1]);
    std::swap(d.U[0], d.U[1]);
    std::swap(d.gamma1, d.gamma2);
    return d;
}

}  // namespace hsl
