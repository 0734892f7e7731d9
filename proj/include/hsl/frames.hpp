#pragma once

#include <sstream>

#include "factorization.hpp"
#include "grid.hpp"

namespace hsl {

// -mu = conj(mu0) dz + mu0 dzbar; A = -i pi (dz-coefficient of mu) D.
struct VacuumData {
    cplx mu0{1.0, 0.0};

    Mat3 A() const { return D_matrix() * (kI * kPi * std::conj(mu0)); }
    Mat3 A_bar() const { return real_conjugate(A()); }

    // the same vacuum from its A (any multiple of D)
    static VacuumData from_A(Mat3 const& a) {
        if (norm(a - D_matrix() * a(0, 0)) > 1e-12 * (1 + norm(a)))
            throw InvalidInput("VacuumData: A must be a multiple of diag(1,1,-2)");
        return {std::conj(a(0, 0) / (kI * kPi))};
    }
};

// exp(w zeta^-2 A + wbar zeta^2 Abar), summed entry by entry from the two
// exponential series.
inline TwistedLoop vacuum_frame(VacuumData const& vac, cplx w, int n = kDefaultModes) {
    TwistedLoop f(n);
    Mat3 const a = vac.A(), ab = vac.A_bar();
    double tail = 0;
    for (int d = 0; d < 3; ++d) {
        cplx const p = w * a(d, d);             // coefficient of zeta^-2
        cplx const q = std::conj(w) * ab(d, d);  // coefficient of zeta^2
        // terms p^m q^l / (m! l!) at zeta^{2(l-m)}
        int const terms = 60;
        std::vector<cplx> pm(terms), ql(terms);
        pm[0] = ql[0] = 1;
        for (int k = 1; k < terms; ++k) {
            pm[k] = pm[k - 1] * p / static_cast<double>(k);
            ql[k] = ql[k - 1] * q / static_cast<double>(k);
        }
        for (int m = 0; m < terms; ++m)
            for (int l = 0; l < terms; ++l) {
                int const k = 2 * (l - m);
                cplx const v = pm[m] * ql[l];
                if (f.in_range(k))
                    f.at(k)(d, d) += v;
                else
                    tail += std::abs(v);
            }
    }
    f.tail_mass = tail;
    f.real = true;
    return f;
}

struct ExtendedFrameField {
    GridGeometry grid;
    std::vector<TwistedLoop> frames;
    double path_defect = 0;        // row-first vs column-first, integration only
    double base_discrepancy = 0;   // distance of F(base) from the identity before re-basing
    TwistedLoop const& at(int i, int j) const { return frames[grid.index(i, j)]; }
    int modes_limit() const { return frames.empty() ? kDefaultModes : frames.front().modes_limit(); }
};

inline ExtendedFrameField vacuum_field(VacuumData const& vac, GridGeometry const& g, int n = kDefaultModes) {
    ExtendedFrameField f{g, std::vector<TwistedLoop>(g.size())};
    cplx const w0 = g.w(g.base_i, g.base_j);
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) f.frames[g.index(i, j)] = vacuum_frame(vac, g.w(i, j) - w0, n);
    return f;
}

// alpha(d/dz) and alpha(d/dzbar) for modes -2..2
struct MCSample {
    std::array<Mat3, 5> dz;
    std::array<Mat3, 5> dzbar;
    Mat3 const& dz_mode(int k) const { return dz[k + 2]; }
    Mat3 const& dzbar_mode(int k) const { return dzbar[k + 2]; }
};

struct MaurerCartanField {
    GridGeometry grid;
    std::vector<MCSample> samples;
    double off_support_mass = 0;  // largest mass outside modes -2..2
    double richardson = 0;        // largest |D_h - D_2h| seen during extraction
    MCSample const& at(int i, int j) const { return samples[grid.index(i, j)]; }

    // the loop alpha(d/dx) or alpha(d/dy) at a node
    TwistedLoop along(std::size_t idx, int axis, int n = 4) const {
        TwistedLoop l(n);
        auto const& s = samples[idx];
        cplx const f = axis == 0 ? cplx(1) : kI;
        for (int k = -2; k <= 2; ++k) l.at(k) = s.dz[k + 2] * f + s.dzbar[k + 2] * std::conj(f);
        return l;
    }
};

inline MaurerCartanField vacuum_mc(VacuumData const& vac, GridGeometry const& g) {
    MaurerCartanField m{g, std::vector<MCSample>(g.size())};
    for (auto& s : m.samples) {
        s.dz[0] = vac.A();
        s.dzbar[4] = vac.A_bar();
    }
    return m;
}

namespace detail {

inline std::vector<std::vector<Mat3>> sample_field(std::vector<TwistedLoop> const& f, int n) {
    auto const& sm = sampler(n);
    std::vector<std::vector<Mat3>> out(f.size());
    parallel_for(f.size(), [&](std::size_t k) { out[k] = sm.evaluate(f[k]); });
    return out;
}

inline std::vector<Mat3> fd_samples(std::vector<std::vector<Mat3>> const& s, GridGeometry const& g, int i, int j,
                                    int axis, int order, int spacing = 1) {
    int const pos = axis == 0 ? i : j;
    int const len = axis == 0 ? g.nu : g.nv;
    auto const& st = stencil(order, 1, pos, len, spacing);
    std::vector<Mat3> d(s.front().size());
    for (std::size_t k = 0; k < st.offsets.size(); ++k) {
        int const o = st.offsets[k];
        auto const& src = s[axis == 0 ? g.index(i + o, j) : g.index(i, j + o)];
        for (std::size_t m = 0; m < d.size(); ++m) d[m] += src[m] * st.weights[k];
    }
    return d;
}

// dz/dzbar parts from derivatives along u and v
inline std::pair<Mat3, Mat3> to_complex_parts(Mat3 const& du, Mat3 const& dv, GridGeometry const& g) {
    auto const t = g.uv_to_xy();
    Mat3 const dx = du * t[0] + dv * t[1];
    Mat3 const dy = du * t[2] + dv * t[3];
    return {(dx - dy * kI) * 0.5, (dx + dy * kI) * 0.5};
}

}  // namespace detail

struct MaurerCartanOptions {
    int order = 4;
    double richardson_limit = 1e-2;  // relative to the largest coefficient
};

// alpha = F^{-1} dF by finite differences, read off in modes -2..2.
inline MaurerCartanField maurer_cartan(ExtendedFrameField const& f, MaurerCartanOptions const& opt = {}) {
    auto const& g = f.grid;
    int const n = f.modes_limit();
    auto const& sm = sampler(n);
    auto const s = detail::sample_field(f.frames, n);
    MaurerCartanField out{g, std::vector<MCSample>(g.size())};
    std::vector<double> off(g.size(), 0.0), rich(g.size(), 0.0), scale(g.size(), 0.0);
    bool const can_rich = g.nu >= 2 * opt.order + 2 && g.nv >= 2 * opt.order + 2;
    parallel_for(g.size(), [&](std::size_t idx) {
        int const i = static_cast<int>(idx % g.nu), j = static_cast<int>(idx / g.nu);
        std::vector<Mat3> inv(s[idx].size());
        for (std::size_t m = 0; m < inv.size(); ++m) inv[m] = inverse(s[idx][m]);
        std::array<TwistedLoop, 2> a;
        for (int axis = 0; axis < 2; ++axis) {
            auto d = detail::fd_samples(s, g, i, j, axis, opt.order);
            if (can_rich) {
                auto d2 = detail::fd_samples(s, g, i, j, axis, opt.order, 2);
                double r = 0;
                for (std::size_t m = 0; m < d.size(); ++m) r = std::max(r, norm(inv[m] * (d[m] - d2[m])));
                rich[idx] = std::max(rich[idx], r);
            }
            for (std::size_t m = 0; m < d.size(); ++m) d[m] = inv[m] * d[m];
            a[axis] = sm.interpolate(d);
        }
        auto& smp = out.samples[idx];
        for (int k = -2; k <= 2; ++k) {
            auto const [pz, pzb] = detail::to_complex_parts(a[0][k], a[1][k], g);
            smp.dz[k + 2] = pz;
            smp.dzbar[k + 2] = pzb;
            scale[idx] = std::max({scale[idx], norm(pz), norm(pzb)});
        }
        off[idx] = std::max(mass_outside(a[0], -2, 2), mass_outside(a[1], -2, 2));
    });
    double const sc = *std::max_element(scale.begin(), scale.end());
    out.off_support_mass = *std::max_element(off.begin(), off.end());
    out.richardson = *std::max_element(rich.begin(), rich.end());
    // scale of alpha in u,v units is h times its xy size
    double const h = std::max(std::abs(g.eu), std::abs(g.ev));
    if (can_rich && out.richardson > opt.richardson_limit * std::max(sc * h, 1e-12)) {
        std::ostringstream os;
        os << "maurer_cartan: step too coarse, Richardson disagreement " << out.richardson;
        throw InvalidInput(os.str());
    }
    return out;
}

// max over interior nodes and 8 circle samples of |d alpha + [alpha ^ alpha]|
inline double mc_residual(MaurerCartanField const& a, int order = 4) {
    auto const& g = a.grid;
    int const margin = order / 2;
    if (g.nu <= 2 * margin || g.nv <= 2 * margin) throw InvalidInput("mc_residual: grid too small");
    auto const t = g.uv_to_xy();
    // store per mode so the FD helper can run on plain vectors
    std::array<std::vector<Mat3>, 5> fx, fy;
    for (int k = 0; k < 5; ++k) {
        fx[k].resize(g.size());
        fy[k].resize(g.size());
    }
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        auto const& s = a.samples[idx];
        for (int k = 0; k < 5; ++k) {
            fx[k][idx] = s.dz[k] + s.dzbar[k];
            fy[k][idx] = (s.dz[k] - s.dzbar[k]) * kI;
        }
    }
    std::array<cplx, 8> zs;
    for (int m = 0; m < 8; ++m) zs[m] = std::polar(1.0, 2 * kPi * (m + 0.5) / 8);
    double res = 0;
    for (int j = margin; j < g.nv - margin; ++j)
        for (int i = margin; i < g.nu - margin; ++i) {
            std::size_t const idx = g.index(i, j);
            std::array<Mat3, 5> curl;
            for (int k = 0; k < 5; ++k) {
                Mat3 const ayu = grid_derivative(fy[k], g, i, j, 0, order);
                Mat3 const ayv = grid_derivative(fy[k], g, i, j, 1, order);
                Mat3 const axu = grid_derivative(fx[k], g, i, j, 0, order);
                Mat3 const axv = grid_derivative(fx[k], g, i, j, 1, order);
                Mat3 const dx_ay = ayu * t[0] + ayv * t[1];
                Mat3 const dy_ax = axu * t[2] + axv * t[3];
                curl[k] = dx_ay - dy_ax;
            }
            for (cplx z : zs) {
                Mat3 c, x, y;
                cplx p = z * z;
                p = 1.0 / p;
                for (int k = 0; k < 5; ++k, p *= z) {
                    c += curl[k] * p;
                    x += fx[k][idx] * p;
                    y += fy[k][idx] * p;
                }
                res = std::max(res, norm(c + commutator(x, y)));
            }
        }
    return res;
}

namespace detail {

// pointwise RK4 for dF = F alpha along one grid line, a(s) the coefficient
// field in line coordinates; values at the nodes and cubic midpoints.
inline void rk4_line(std::vector<Mat3>& F, std::vector<Mat3> const& a0, std::vector<Mat3> const& amid,
                     std::vector<Mat3> const& a1, double h) {
    for (std::size_t m = 0; m < F.size(); ++m) {
        Mat3 const& f = F[m];
        Mat3 const k1 = f * a0[m];
        Mat3 const k2 = (f + k1 * (h / 2)) * amid[m];
        Mat3 const k3 = (f + k2 * (h / 2)) * amid[m];
        Mat3 const k4 = (f + k3 * h) * a1[m];
        F[m] = f + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6);
    }
}

// Lagrange weights at the midpoint between node p and p+1 using four nodes
inline std::pair<int, std::array<double, 4>> midpoint_weights(int p, int n) {
    if (n < 4) throw InvalidInput("integrate_frame: need four nodes per line");
    if (p == 0) return {0, {5.0 / 16, 15.0 / 16, -5.0 / 16, 1.0 / 16}};
    if (p == n - 2) return {n - 4, {1.0 / 16, -5.0 / 16, 15.0 / 16, 5.0 / 16}};
    return {p - 1, {-1.0 / 16, 9.0 / 16, 9.0 / 16, -1.0 / 16}};
}

}  // namespace detail

struct IntegrateOptions {
    int modes = kDefaultModes;
    double unitarity_limit = 1e-6;
};

// Solve dF = F alpha from F(base) = I, rows first then columns; the
// column-first solution is kept only to measure path dependence.
inline ExtendedFrameField integrate_frame(MaurerCartanField const& a, IntegrateOptions const& opt = {}) {
    auto const& g = a.grid;
    int const n = opt.modes;
    auto const& sm = sampler(n);
    int const M = sm.size();
    // alpha along u and v, sampled on the circle, per node
    std::vector<std::vector<Mat3>> au(g.size()), av(g.size());
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        auto const ax = a.along(idx, 0, n), ay = a.along(idx, 1, n);
        auto const sx = sm.evaluate(ax), sy = sm.evaluate(ay);
        au[idx].resize(M);
        av[idx].resize(M);
        for (int m = 0; m < M; ++m) {
            au[idx][m] = sx[m] * g.eu.real() + sy[m] * g.eu.imag();
            av[idx][m] = sx[m] * g.ev.real() + sy[m] * g.ev.imag();
        }
    }
    auto line_value = [&](std::vector<std::vector<Mat3>> const& f, int axis, int fixed, int p) -> auto const& {
        return axis == 0 ? f[g.index(p, fixed)] : f[g.index(fixed, p)];
    };
    // integrate along a line from node `from` to every other node
    auto sweep = [&](std::vector<std::vector<Mat3>>& F, std::vector<std::vector<Mat3>> const& coef, int axis,
                     int fixed, int from) {
        int const len = axis == 0 ? g.nu : g.nv;
        auto idx_of = [&](int p) { return axis == 0 ? g.index(p, fixed) : g.index(fixed, p); };
        std::vector<Mat3> mid(M);
        for (int dir : {1, -1}) {
            std::vector<Mat3> cur = F[idx_of(from)];
            for (int p = from; p + dir >= 0 && p + dir < len; p += dir) {
                int const lo = std::min(p, p + dir);
                auto const [start, w] = detail::midpoint_weights(lo, len);
                for (int m = 0; m < M; ++m) {
                    Mat3 v;
                    for (int q = 0; q < 4; ++q) v += line_value(coef, axis, fixed, start + q)[m] * w[q];
                    mid[m] = v;
                }
                detail::rk4_line(cur, line_value(coef, axis, fixed, p), mid, line_value(coef, axis, fixed, p + dir),
                                 static_cast<double>(dir));
                F[idx_of(p + dir)] = cur;
            }
        }
    };
    auto run = [&](bool rows_first) {
        std::vector<std::vector<Mat3>> F(g.size());
        F[g.index(g.base_i, g.base_j)] = std::vector<Mat3>(M, Mat3::identity());
        if (rows_first) {
            sweep(F, au, 0, g.base_j, g.base_i);
            for (int i = 0; i < g.nu; ++i) sweep(F, av, 1, i, g.base_j);
        } else {
            sweep(F, av, 1, g.base_i, g.base_j);
            for (int j = 0; j < g.nv; ++j) sweep(F, au, 0, j, g.base_i);
        }
        return F;
    };
    auto const F1 = run(true);
    auto const F2 = run(false);
    ExtendedFrameField out{g, std::vector<TwistedLoop>(g.size())};
    double pd = 0, ud = 0;
    for (std::size_t idx = 0; idx < g.size(); ++idx) {
        for (int m = 0; m < M; ++m) {
            pd = std::max(pd, norm(F1[idx][m] - F2[idx][m]));
            ud = std::max(ud, norm(adjoint(F1[idx][m]) * F1[idx][m] - Mat3::identity()));
        }
        out.frames[idx] = sm.interpolate(F1[idx]);
        out.frames[idx].real = true;
    }
    if (ud > opt.unitarity_limit) {
        std::ostringstream os;
        os << "integrate_frame: lost unitarity on |zeta|=1 (" << ud << ")";
        throw ConvergenceFailure(os.str());
    }
    out.path_defect = pd;
    return out;
}

// ---- dressing -------------------------------------------------------------------

struct DressResult {
    ExtendedFrameField frame;
    TwistedLoop based_element;  // plus factor of g; dressing by it is based
    TwistedLoop left_factor;    // real factor of g
    double max_residual = 0;
};

// (g F(w))_E at every node.  g = g_E g_I first, and the frame is left-translated
// by g_E^{-1}, which is dressing by g_I; F(base) = I is then exact up to the
// recorded discrepancy.
inline DressResult dress(TwistedLoop const& g, ExtendedFrameField const& F, FactorizeOptions const& base_opt = {}) {
    int const n = F.modes_limit();
    auto const gr = iwasawa_factorize(resize(g, n), base_opt);
    DressResult out{ExtendedFrameField{F.grid, std::vector<TwistedLoop>(F.grid.size())}, gr.i_part, gr.e_part,
                    gr.residual};
    std::vector<double> res(F.grid.size(), 0.0);
    parallel_for(F.grid.size(), [&](std::size_t idx) {
        FactorizeOptions opt = base_opt;
        opt.e_guess = F.frames[idx];
        opt.i_guess = gr.i_part;
        try {
            auto const r = iwasawa_factorize(multiply(gr.i_part, F.frames[idx]), opt);
            out.frame.frames[idx] = r.e_part;
            res[idx] = r.residual;
        } catch (ConvergenceFailure const& e) {
            int const i = static_cast<int>(idx % F.grid.nu), j = static_cast<int>(idx / F.grid.nu);
            std::ostringstream os;
            cplx const w = F.grid.w(i, j);
            os << "dress: factorization failed at w = " << w.real() << (w.imag() < 0 ? "" : "+") << w.imag()
               << "i: " << e.what();
            throw ConvergenceFailure(os.str());
        }
    });
    out.max_residual = std::max(out.max_residual, *std::max_element(res.begin(), res.end()));
    auto const& g2 = F.grid;
    TwistedLoop const f0 = out.frame.frames[g2.index(g2.base_i, g2.base_j)];
    out.frame.base_discrepancy = max_distance(f0, TwistedLoop::identity(n));
    TwistedLoop const f0i = invert(f0);
    for (auto& fr : out.frame.frames) {
        fr = multiply(f0i, fr);
        fr.real = true;
    }
    return out;
}

struct ChiField {
    std::vector<TwistedLoop> chi;
    double negative_mass = 0;      // largest over nodes
    double b_defect = 0;           // largest over nodes
};

// chi(w) = F(w)^{-1} g F_mu(w)
inline ChiField compute_chi(TwistedLoop const& g, ExtendedFrameField const& Fmu, ExtendedFrameField const& F) {
    if (!(Fmu.grid == F.grid)) throw InvalidInput("compute_chi: grids differ");
    int const n = F.modes_limit();
    auto const& sm = sampler(n);
    auto const gs = sm.evaluate(resize(g, n));
    ChiField out{std::vector<TwistedLoop>(F.grid.size())};
    std::vector<double> neg(F.grid.size()), bd(F.grid.size());
    parallel_for(F.grid.size(), [&](std::size_t idx) {
        auto const fs = sm.evaluate(F.frames[idx]);
        auto const ms = sm.evaluate(Fmu.frames[idx]);
        std::vector<Mat3> c(fs.size());
        for (std::size_t m = 0; m < c.size(); ++m) c[m] = inverse(fs[m]) * gs[m] * ms[m];
        out.chi[idx] = sm.interpolate(c);
        neg[idx] = negative_mode_mass(out.chi[idx]);
        bd[idx] = b_normalization_defect(out.chi[idx]);
        out.chi[idx].plus = true;
    });
    out.negative_mass = *std::max_element(neg.begin(), neg.end());
    out.b_defect = *std::max_element(bd.begin(), bd.end());
    return out;
}

struct GaugeCheck {
    bool equivalent = false;
    double defect = 0;
};

// F' = F k with k constant in zeta and valued in SU(2) + 1 (mod cube roots of unity)
inline GaugeCheck frames_gauge_equivalent(ExtendedFrameField const& F, ExtendedFrameField const& Fp,
                                          double tol = 1e-7) {
    if (!(F.grid == Fp.grid)) throw InvalidInput("frames_gauge_equivalent: grids differ");
    int const n = std::max(F.modes_limit(), Fp.modes_limit());
    auto const& sm = sampler(n);
    std::vector<double> d(F.grid.size());
    parallel_for(F.grid.size(), [&](std::size_t idx) {
        auto const a = sm.evaluate(resize(F.frames[idx], n));
        auto const b = sm.evaluate(resize(Fp.frames[idx], n));
        std::vector<Mat3> k(a.size());
        for (std::size_t m = 0; m < k.size(); ++m) k[m] = inverse(a[m]) * b[m];
        auto const kl = sm.interpolate(k);
        double e = mass_outside(kl, 0, 0) + kl.tail_mass;
        Mat3 k0 = kl[0];
        cplx const c = k0(2, 2);
        if (std::abs(c) > 0) k0 *= 1.0 / (c / std::abs(c)) / std::abs(c);
        e += std::abs(k0(0, 2)) + std::abs(k0(1, 2)) + std::abs(k0(2, 0)) + std::abs(k0(2, 1)) +
             std::abs(k0(2, 2) - 1.0) + norm(adjoint(k0) * k0 - Mat3::identity()) + std::abs(det(k0) - 1.0);
        // the scalar must be a cube root of unity for k to lie in SU(3)
        e += std::abs(c * c * c - 1.0);
        d[idx] = e;
    });
    GaugeCheck r;
    r.defect = *std::max_element(d.begin(), d.end());
    r.equivalent = r.defect < tol;
    return r;
}

inline ImmersionSample immersion_from_frame(ExtendedFrameField const& F, double tol = 1e-7) {
    std::vector<Vec3> lifts(F.grid.size());
    for (std::size_t idx = 0; idx < lifts.size(); ++idx) {
        Mat3 const v = eval(F.frames[idx], 1.0);
        double const u = norm(adjoint(v) * v - Mat3::identity());
        if (u > tol) {
            std::ostringstream os;
            os << "immersion_from_frame: frame not unitary at zeta = 1 (" << u << ")";
            throw VerificationFailure(os.str());
        }
        lifts[idx] = v.column(2);
    }
    return ImmersionSample::make(F.grid, std::move(lifts));
}

// Extended Maurer-Cartan form of an ordinary SU(3) frame field: the tau
// eigenspace parts of F^{-1}dF, with the g2 part split into its dz and dzbar
// halves at zeta^-2 and zeta^2.
inline MaurerCartanField extended_maurer_cartan(GridGeometry const& g, std::vector<Mat3> const& F, int order = 8) {
    if (F.size() != g.size()) throw InvalidInput("extended_maurer_cartan: size mismatch");
    MaurerCartanField out{g, std::vector<MCSample>(g.size())};
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) {
            std::size_t const idx = g.index(i, j);
            Mat3 const fi = inverse(F[idx]);
            Mat3 const du = fi * grid_derivative(F, g, i, j, 0, order);
            Mat3 const dv = fi * grid_derivative(F, g, i, j, 1, order);
            auto [pz, pzb] = detail::to_complex_parts(du, dv, g);
            // drop the trace, which only reflects det F drifting from 1
            pz -= Mat3::identity() * (trace(pz) / 3.0);
            pzb -= Mat3::identity() * (trace(pzb) / 3.0);
            auto& s = out.samples[idx];
            for (int k = -1; k <= 1; ++k) {
                s.dz[k + 2] = project_eigenspace_unchecked(pz, k);
                s.dzbar[k + 2] = project_eigenspace_unchecked(pzb, k);
            }
            s.dz[0] = project_eigenspace_unchecked(pz, 2);
            s.dzbar[4] = project_eigenspace_unchecked(pzb, 2);
        }
    return out;
}

}  // namespace hsl
