#pragma once

#include <random>

#include "frames.hpp"

namespace hsl {

struct KillingField {
    GridGeometry grid;
    std::vector<TwistedLoop> xi;
    int d = 0;  // lowest mode is -(4d+2)
};

// E-part of v * zeta^{4d} * xi
inline TwistedLoop lax_connection(TwistedLoop const& xi, int d, cplx v) {
    return detail::split_unchecked(v * shift(xi, 4 * d)).e;
}

inline TwistedLoop lax_rhs(TwistedLoop const& xi, int d, cplx v) {
    return loop_commutator(xi, lax_connection(xi, d, v));
}

struct LaxOptions {
    cplx direction{1.0, 0.0};  // real direction in the w-plane
    double support_tol = 1e-8;
};

// RK4 for d xi/dt = [xi, (v zeta^{4d} xi)_E]; returns steps+1 states.
inline std::vector<TwistedLoop> lax_flow(TwistedLoop const& xi0, int d, int steps, double dt,
                                         LaxOptions const& opt = {}) {
    if (d < 0) throw InvalidInput("lax_flow: degree must be non-negative");
    int const lo = -(4 * d + 2);
    double const floor = 1e-13 * std::max(1.0, total_mass(xi0));
    if (xi0.min_mode(floor) < lo) throw InvalidInput("lax_flow: xi0 has modes below -(4d+2)");
    int const need = 8 * d + 4;
    TwistedLoop x = xi0.modes_limit() < need ? resize(xi0, need) : xi0;
    int const hi = std::max(x.max_mode(floor), -lo);
    for (int k = -x.modes_limit(); k <= x.modes_limit(); ++k)
        if (k < lo || k > hi) x.at(k) = Mat3{};
    double const scale = std::max(1.0, total_mass(x));
    std::vector<TwistedLoop> traj{x};
    cplx const v = opt.direction;
    for (int s = 0; s < steps; ++s) {
        auto const k1 = lax_rhs(x, d, v);
        auto const k2 = lax_rhs(x + cplx(dt / 2) * k1, d, v);
        auto const k3 = lax_rhs(x + cplx(dt / 2) * k2, d, v);
        auto const k4 = lax_rhs(x + cplx(dt) * k3, d, v);
        x = x + cplx(dt / 6) * (k1 + cplx(2.0) * k2 + cplx(2.0) * k3 + k4);
        double const grow = mass_outside(x, lo, hi);
        if (grow > opt.support_tol * scale) {
            std::ostringstream os;
            os << "lax_flow: mode support grew beyond [" << lo << "," << hi << "] (mass " << grow << ")";
            throw ConvergenceFailure(os.str());
        }
        for (int k = -x.modes_limit(); k <= x.modes_limit(); ++k)
            if (k < lo || k > hi) x.at(k) = Mat3{};
        x.real = xi0.real;
        traj.push_back(x);
    }
    return traj;
}

// Killing field over a grid: flow along u from the base node, then along v.
inline KillingField lax_field(TwistedLoop const& xi0, int d, GridGeometry const& g, int substeps = 1) {
    KillingField kf{g, std::vector<TwistedLoop>(g.size()), d};
    kf.xi[g.index(g.base_i, g.base_j)] = xi0;
    auto walk = [&](int axis, int fixed, int from) {
        int const len = axis == 0 ? g.nu : g.nv;
        cplx const e = axis == 0 ? g.eu : g.ev;
        auto idx = [&](int p) { return axis == 0 ? g.index(p, fixed) : g.index(fixed, p); };
        for (int dir : {1, -1}) {
            TwistedLoop cur = kf.xi[idx(from)];
            for (int p = from + dir; p >= 0 && p < len; p += dir) {
                LaxOptions o;
                o.direction = e * static_cast<double>(dir) / std::abs(e);
                cur = lax_flow(cur, d, substeps, std::abs(e) / substeps, o).back();
                kf.xi[idx(p)] = cur;
            }
        }
    };
    walk(0, g.base_j, g.base_i);
    for (int i = 0; i < g.nu; ++i) walk(1, i, g.base_j);
    return kf;
}

// MC field generated by a Killing field: alpha(v) = (zeta^{4d} xi v)_E.
inline MaurerCartanField lax_generated_mc(KillingField const& kf) {
    MaurerCartanField m{kf.grid, std::vector<MCSample>(kf.grid.size())};
    for (std::size_t idx = 0; idx < kf.xi.size(); ++idx) {
        auto const ax = lax_connection(kf.xi[idx], kf.d, 1.0);
        auto const ay = lax_connection(kf.xi[idx], kf.d, kI);
        for (int k = -2; k <= 2; ++k) {
            m.samples[idx].dz[k + 2] = (ax[k] - ay[k] * kI) * 0.5;
            m.samples[idx].dzbar[k + 2] = (ax[k] + ay[k] * kI) * 0.5;
        }
    }
    return m;
}

namespace detail {

// Modes below -2 must be roundoff; they are cleared.
inline TwistedLoop symes_potential(TwistedLoop eta) {
    double const floor = 1e-13 * std::max(1.0, total_mass(eta));
    if (eta.min_mode(floor) < -2) throw InvalidInput("symes: potential has modes below -2");
    for (int k = -eta.modes_limit(); k < -2; ++k) eta.at(k) = Mat3{};
    return eta;
}

}  // namespace detail

// Phi(eta)(w) = (exp(w eta))_E
inline TwistedLoop symes(TwistedLoop const& eta, cplx w, FactorizeOptions const& opt = {}) {
    return iwasawa_factorize(exp_loop(detail::symes_potential(eta), w), opt).e_part;
}

// Symes frames over a grid, marching from the base node so each
// factorization starts from its neighbour's factors.
inline ExtendedFrameField symes_field(TwistedLoop const& eta, GridGeometry const& g, int n = kDefaultModes) {
    TwistedLoop const et = detail::symes_potential(resize(eta, n));
    ExtendedFrameField f{g, std::vector<TwistedLoop>(g.size())};
    std::vector<TwistedLoop> ipart(g.size());
    cplx const w0 = g.w(g.base_i, g.base_j);
    auto solve = [&](std::size_t idx, std::size_t from, int i, int j) {
        FactorizeOptions o;
        o.e_guess = f.frames[from];
        o.i_guess = ipart[from];
        auto const r = iwasawa_factorize(exp_loop(et, g.w(i, j) - w0), o);
        f.frames[idx] = r.e_part;
        ipart[idx] = r.i_part;
    };
    std::size_t const b = g.index(g.base_i, g.base_j);
    f.frames[b] = TwistedLoop::identity(n);
    ipart[b] = TwistedLoop::identity(n);
    for (int dir : {1, -1})
        for (int i = g.base_i + dir; i >= 0 && i < g.nu; i += dir) solve(g.index(i, g.base_j), g.index(i - dir, g.base_j), i, g.base_j);
    for (int i = 0; i < g.nu; ++i)
        for (int dir : {1, -1})
            for (int j = g.base_j + dir; j >= 0 && j < g.nv; j += dir) solve(g.index(i, j), g.index(i, j - dir), i, j);
    return f;
}

struct AdaptedReport {
    double lax_defect = 0;      // FD |d xi - [xi, alpha]|, interior nodes
    double leading_defect = 0;  // two leading modes against alpha_{-2}, alpha_{-1} (d/dz)
    int d = 0;
    bool adapted = false;
};

inline AdaptedReport is_adapted_pkf(KillingField const& kf, MaurerCartanField const& a, int order = 4,
                                    double tol = 1e-6) {
    if (!(kf.grid == a.grid)) throw InvalidInput("is_adapted_pkf: grids differ");
    auto const& g = kf.grid;
    AdaptedReport r;
    r.d = kf.d;
    int const top = -(4 * r.d + 2);
    auto const t = g.uv_to_xy();
    int const margin = order / 2;
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) {
            std::size_t const idx = g.index(i, j);
            auto const& x = kf.xi[idx];
            auto const& s = a.samples[idx];
            double ld = norm(x[top] - s.dz[0]) + norm(x[top + 1] - s.dz[1]);
            // nothing may sit below the leading term
            for (int k = -x.modes_limit(); k < top; ++k) ld += norm(x[k]);
            r.leading_defect = std::max(r.leading_defect, ld);
            if (i < margin || j < margin || i >= g.nu - margin || j >= g.nv - margin) continue;
            auto const du = grid_derivative(kf.xi, g, i, j, 0, order);
            auto const dv = grid_derivative(kf.xi, g, i, j, 1, order);
            auto const dx = cplx(t[0]) * du + cplx(t[1]) * dv;
            auto const dy = cplx(t[2]) * du + cplx(t[3]) * dv;
            int const n = x.modes_limit();
            auto const ax = resize(a.along(idx, 0), n), ay = resize(a.along(idx, 1), n);
            double const e = std::max(max_distance(dx, loop_commutator(x, ax)), max_distance(dy, loop_commutator(x, ay)));
            r.lax_defect = std::max(r.lax_defect, e);
        }
    r.adapted = r.leading_defect < tol;
    return r;
}

struct PkfCharacterization {
    double variation = 0;   // |d eta| over the grid
    double commutator = 0;  // |[A, eta]|
};

// eta = Ad chi^{-1} xi must be constant and commute with A.
inline PkfCharacterization pkf_characterization_check(KillingField const& kf, ChiField const& chi, Mat3 const& A,
                                                      int order = 4) {
    auto const& g = kf.grid;
    if (chi.chi.size() != g.size()) throw InvalidInput("pkf_characterization_check: size mismatch");
    std::vector<TwistedLoop> eta(g.size());
    parallel_for(g.size(), [&](std::size_t idx) {
        int const n = std::max(kf.xi[idx].modes_limit(), chi.chi[idx].modes_limit());
        eta[idx] = pointwise2(resize(kf.xi[idx], n), resize(chi.chi[idx], n),
                              [](Mat3 const& x, Mat3 const& c) { return inverse(c) * x * c; });
    });
    PkfCharacterization r;
    auto const t = g.uv_to_xy();
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) {
            auto const& e = eta[g.index(i, j)];
            for (int k = -e.modes_limit(); k <= e.modes_limit(); ++k)
                r.commutator = std::max(r.commutator, norm(commutator(A, e[k])));
            auto const du = grid_derivative(eta, g, i, j, 0, order);
            auto const dv = grid_derivative(eta, g, i, j, 1, order);
            TwistedLoop const zero(e.modes_limit());
            r.variation = std::max({r.variation, max_distance(cplx(t[0]) * du + cplx(t[1]) * dv, zero),
                                    max_distance(cplx(t[2]) * du + cplx(t[3]) * dv, zero)});
        }
    return r;
}

struct VacuumOrbitVerdict {
    bool in_orbit = false;
    double leading_defect = 0;     // |Ad g(0)^{-1} xi_{-2} - A|
    double commutator_defect = 0;  // |[Ad g^{-1} xi, A]| over modes
};

inline VacuumOrbitVerdict vacuum_orbit_criterion(TwistedLoop const& xi, TwistedLoop const& g, Mat3 const& A,
                                                 double tol = 1e-8) {
    VacuumOrbitVerdict v;
    Mat3 const g0 = g[0];
    v.leading_defect = norm(inverse(g0) * xi[-2] * g0 - A);
    int const n = std::max(xi.modes_limit(), g.modes_limit());
    auto const ad = pointwise2(resize(xi, n), resize(g, n), [](Mat3 const& x, Mat3 const& h) { return inverse(h) * x * h; });
    for (int k = -n; k <= n; ++k) v.commutator_defect = std::max(v.commutator_defect, norm(commutator(ad[k], A)));
    double const scale = std::max(1.0, norm(A));
    v.in_orbit = v.leading_defect < tol * scale && v.commutator_defect < tol * scale;
    return v;
}

struct CharPolyCurve {
    std::vector<cplx> lambdas;
    // monic cubic x^3 + c[0] x^2 + c[1] x + c[2]
    std::vector<std::array<cplx, 3>> coeffs;
};

inline std::array<cplx, 3> char_poly(Mat3 const& m) {
    cplx const t = trace(m);
    cplx const t2 = trace(m * m);
    return {-t, 0.5 * (t * t - t2), -det(m)};
}

inline CharPolyCurve char_poly_curve(TwistedLoop const& xi, std::vector<cplx> const& lambdas) {
    auto const h = untwist(xi);
    CharPolyCurve c{lambdas, {}};
    for (cplx l : lambdas) c.coeffs.push_back(char_poly(eval(h, l)));
    return c;
}

inline double char_poly_drift(CharPolyCurve const& a, CharPolyCurve const& b) {
    double d = 0;
    for (std::size_t k = 0; k < a.coeffs.size(); ++k)
        for (int j = 0; j < 3; ++j) d = std::max(d, std::abs(a.coeffs[k][j] - b.coeffs[k][j]));
    return d;
}

inline std::vector<cplx> unit_circle_samples(int n, double offset = 0.17) {
    std::vector<cplx> v;
    for (int k = 0; k < n; ++k) v.push_back(std::polar(1.0, 2 * kPi * (k + offset) / n));
    return v;
}

// Random real twisted loop with modes -(4d+2)..(4d+2) and total coefficient
// norm `mass`; the leading mode is forced onto a multiple of D.
template <class Rng>
TwistedLoop random_real_loop(Rng& rng, int top, double mass, int n, bool diagonal_leading = false) {
    std::normal_distribution<double> nd;
    TwistedLoop xi(n);
    std::vector<Mat3> raw(top + 1);
    for (int k = 0; k <= top; ++k) {
        Mat3 m;
        for (auto& e : m.data()) e = cplx(nd(rng), nd(rng));
        m -= Mat3::identity() * (trace(m) / 3.0);
        raw[k] = project_eigenspace_unchecked(m, -k);
        if (k == 0) raw[k] = (raw[k] + real_conjugate(raw[k])) * 0.5;
    }
    if (diagonal_leading) raw[top] = D_matrix() * cplx(nd(rng), nd(rng));
    double total = norm(raw[0]);
    for (int k = 1; k <= top; ++k) total += 2 * norm(raw[k]);
    for (int k = 0; k <= top; ++k) {
        xi.at(-k) = raw[k] * (mass / total);
        if (k > 0) xi.at(k) = real_conjugate(xi[-k]);
    }
    xi.real = true;
    return xi;
}

}  // namespace hsl
