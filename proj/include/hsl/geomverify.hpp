#pragma once

#include <optional>
#include <sstream>

#include "frames.hpp"

namespace hsl {

// beta_det = 3 phi + arg det[Z, Z_x, Z_y] in the horizontal gauge.  Dividing
// by 6 gives the angle with d beta = -pi mu; fixed once on the dressed vacuum.
inline constexpr double kAngleScale = 6.0;

struct VerifyOptions {
    int order = 8;                   // first-derivative stencil order
    double richardson_limit = 1e-3;  // |D_order - D_{order-2}| relative to the largest tangent
    int laplacian_margin = 4;
    double degenerate_floor = 1e-20;  // E+G below this counts as a singular point
};

struct Pullbacks {
    std::vector<double> E, F, G, omega;
    std::vector<Vec3> zx, zy;  // horizontal parts of the x, y derivatives
    double richardson = 0;
};

inline Vec3 horizontal(Vec3 const& v, Vec3 const& z) { return v - z * hdot(v, z); }

// E = |Z_x^h|^2, F = Re<Z_x^h, Z_y^h>, G = |Z_y^h|^2, omega = Im<Z_y^h, Z_x^h>
inline Pullbacks fubini_study_pullbacks(ImmersionSample const& s, VerifyOptions const& opt = {}) {
    auto const& g = s.grid;
    std::size_t const n = g.size();
    if (g.nu < opt.order + 1 || g.nv < opt.order + 1) throw InvalidInput("fubini_study_pullbacks: grid too small");
    auto const t = g.uv_to_xy();
    Pullbacks p{std::vector<double>(n), std::vector<double>(n), std::vector<double>(n), std::vector<double>(n),
                std::vector<Vec3>(n), std::vector<Vec3>(n)};
    bool const rich = opt.order >= 4;
    std::vector<double> rdiff(n, 0.0), tscale(n, 0.0);
    parallel_for(n, [&](std::size_t idx) {
        int const i = static_cast<int>(idx % g.nu), j = static_cast<int>(idx / g.nu);
        Vec3 const& z = s.lifts[idx];
        Vec3 const du = grid_derivative(s.lifts, g, i, j, 0, opt.order);
        Vec3 const dv = grid_derivative(s.lifts, g, i, j, 1, opt.order);
        Vec3 const zx = horizontal(du * t[0] + dv * t[1], z);
        Vec3 const zy = horizontal(du * t[2] + dv * t[3], z);
        if (rich) {
            Vec3 const du2 = grid_derivative(s.lifts, g, i, j, 0, opt.order - 2);
            Vec3 const dv2 = grid_derivative(s.lifts, g, i, j, 1, opt.order - 2);
            rdiff[idx] = std::max(vnorm(du - du2), vnorm(dv - dv2));
            tscale[idx] = std::max(vnorm(du), vnorm(dv));
        }
        p.zx[idx] = zx;
        p.zy[idx] = zy;
        p.E[idx] = std::norm(zx[0]) + std::norm(zx[1]) + std::norm(zx[2]);
        p.G[idx] = std::norm(zy[0]) + std::norm(zy[1]) + std::norm(zy[2]);
        p.F[idx] = hdot(zx, zy).real();
        p.omega[idx] = hdot(zy, zx).imag();
    });
    if (rich) {
        double const sc = *std::max_element(tscale.begin(), tscale.end());
        p.richardson = *std::max_element(rdiff.begin(), rdiff.end());
        // a map with no tangent above the degeneracy floor has nothing to resolve
        if (sc * sc > opt.degenerate_floor && p.richardson > opt.richardson_limit * sc) {
            std::ostringstream os;
            os << "fubini_study_pullbacks: grid does not resolve the map (Richardson " << p.richardson / sc << ")";
            throw InvalidInput(os.str());
        }
    }
    return p;
}

struct PointDefects {
    std::vector<double> conformality, lagrangian;
    int degenerate = 0;
};

inline PointDefects point_defects(Pullbacks const& p, VerifyOptions const& opt = {}) {
    PointDefects d{std::vector<double>(p.E.size(), 0.0), std::vector<double>(p.E.size(), 0.0)};
    for (std::size_t k = 0; k < p.E.size(); ++k) {
        double const s = p.E[k] + p.G[k];
        if (!(s > opt.degenerate_floor)) {
            ++d.degenerate;
            continue;
        }
        d.conformality[k] = std::max(std::abs(p.E[k] - p.G[k]), std::abs(p.F[k])) / s;
        d.lagrangian[k] = std::abs(p.omega[k]) / s;
    }
    return d;
}

// ---- Lagrangian angle ------------------------------------------------------------

namespace detail {

// cumulative integral of f sampled at unit spacing, fourth order
inline std::vector<double> cumulative(std::vector<double> const& f, int from) {
    int const n = static_cast<int>(f.size());
    if (n < 4) throw InvalidInput("cumulative quadrature: need four nodes");
    auto interval = [&](int k) {  // integral over [k, k+1]
        if (k == 0) return (9 * f[0] + 19 * f[1] - 5 * f[2] + f[3]) / 24;
        if (k == n - 2) return (f[n - 4] - 5 * f[n - 3] + 19 * f[n - 2] + 9 * f[n - 1]) / 24;
        return (-f[k - 1] + 13 * f[k] + 13 * f[k + 1] - f[k + 2]) / 24;
    };
    std::vector<double> out(n, 0.0);
    for (int k = from + 1; k < n; ++k) out[k] = out[k - 1] + interval(k - 1);
    for (int k = from - 1; k >= 0; --k) out[k] = out[k + 1] - interval(k);
    return out;
}

inline double nearest_branch(double x, double ref) { return x + 2 * kPi * std::round((ref - x) / (2 * kPi)); }

}  // namespace detail

struct AngleField {
    std::vector<double> phi;       // horizontal gauge phase
    std::vector<double> beta_det;  // unwrapped 3 phi + arg det
    std::vector<double> beta;      // beta_det / kAngleScale
    std::vector<double> dbeta_x, dbeta_y;
    std::vector<char> flagged;  // tangent pair degenerate at this node
    double path_defect = 0;     // row-first vs column-first phase
    int unwrap_failures = 0;
};

inline AngleField lagrangian_angle(ImmersionSample const& s, Pullbacks const& p, VerifyOptions const& opt = {}) {
    auto const& g = s.grid;
    std::size_t const n = g.size();
    AngleField a;
    a.flagged.assign(n, 0);
    // d phi = i <dZ, Z> along u and v, in grid units
    std::vector<double> fu(n), fv(n);
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) {
            std::size_t const idx = g.index(i, j);
            Vec3 const& z = s.lifts[idx];
            fu[idx] = (kI * hdot(grid_derivative(s.lifts, g, i, j, 0, opt.order), z)).real();
            fv[idx] = (kI * hdot(grid_derivative(s.lifts, g, i, j, 1, opt.order), z)).real();
        }
    auto integrate = [&](bool rows_first) {
        std::vector<double> phi(n, 0.0);
        auto line = [&](std::vector<double> const& f, int axis, int fixed) {
            int const len = axis == 0 ? g.nu : g.nv;
            std::vector<double> v(len);
            for (int p2 = 0; p2 < len; ++p2) v[p2] = f[axis == 0 ? g.index(p2, fixed) : g.index(fixed, p2)];
            return v;
        };
        if (rows_first) {
            auto const r = detail::cumulative(line(fu, 0, g.base_j), g.base_i);
            for (int i = 0; i < g.nu; ++i) {
                auto const c = detail::cumulative(line(fv, 1, i), g.base_j);
                for (int j = 0; j < g.nv; ++j) phi[g.index(i, j)] = r[i] + c[j];
            }
        } else {
            auto const c = detail::cumulative(line(fv, 1, g.base_i), g.base_j);
            for (int j = 0; j < g.nv; ++j) {
                auto const r = detail::cumulative(line(fu, 0, j), g.base_i);
                for (int i = 0; i < g.nu; ++i) phi[g.index(i, j)] = c[j] + r[i];
            }
        }
        return phi;
    };
    a.phi = integrate(true);
    auto const phi2 = integrate(false);
    for (std::size_t k = 0; k < n; ++k) a.path_defect = std::max(a.path_defect, std::abs(a.phi[k] - phi2[k]));

    std::vector<double> raw(n, 0.0);
    double const floor = opt.degenerate_floor;
    for (std::size_t k = 0; k < n; ++k) {
        Vec3 const& z = s.lifts[k];
        Vec3 const& x = p.zx[k];
        Vec3 const& y = p.zy[k];
        if (!(p.E[k] > floor && p.G[k] > floor)) {
            a.flagged[k] = 1;
            continue;
        }
        cplx const d = z[0] * (x[1] * y[2] - x[2] * y[1]) - z[1] * (x[0] * y[2] - x[2] * y[0]) +
                       z[2] * (x[0] * y[1] - x[1] * y[0]);
        if (std::abs(d) < 1e-12 * std::sqrt(p.E[k] * p.G[k])) {
            a.flagged[k] = 1;
            continue;
        }
        raw[k] = std::arg(d);
    }
    // nearest-branch continuation along the integration paths
    a.beta_det.assign(n, 0.0);
    auto place = [&](std::size_t k, std::size_t ref) {
        double const target = 3 * a.phi[k] + raw[k];
        double const prev = a.beta_det[ref];
        a.beta_det[k] = detail::nearest_branch(target, prev);
        if (std::abs(a.beta_det[k] - prev) > kPi / 2) ++a.unwrap_failures;
    };
    std::size_t const b = g.index(g.base_i, g.base_j);
    a.beta_det[b] = 3 * a.phi[b] + raw[b];
    for (int dir : {1, -1})
        for (int i = g.base_i + dir; i >= 0 && i < g.nu; i += dir) place(g.index(i, g.base_j), g.index(i - dir, g.base_j));
    for (int i = 0; i < g.nu; ++i)
        for (int dir : {1, -1})
            for (int j = g.base_j + dir; j >= 0 && j < g.nv; j += dir) place(g.index(i, j), g.index(i, j - dir));

    a.beta.resize(n);
    for (std::size_t k = 0; k < n; ++k) a.beta[k] = a.beta_det[k] / kAngleScale;
    auto const t = g.uv_to_xy();
    a.dbeta_x.resize(n);
    a.dbeta_y.resize(n);
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) {
            double const du = grid_derivative(a.beta, g, i, j, 0, opt.order);
            double const dv = grid_derivative(a.beta, g, i, j, 1, opt.order);
            a.dbeta_x[g.index(i, j)] = t[0] * du + t[1] * dv;
            a.dbeta_y[g.index(i, j)] = t[2] * du + t[3] * dv;
        }
    return a;
}

// spread of beta - (cx x + cy y) over unflagged nodes
inline double affinity_defect(AngleField const& a, GridGeometry const& g, double cx, double cy) {
    double lo = 1e300, hi = -1e300;
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i) {
            std::size_t const k = g.index(i, j);
            if (a.flagged[k]) continue;
            cplx const w = g.w(i, j);
            double const r = a.beta[k] - cx * w.real() - cy * w.imag();
            lo = std::min(lo, r);
            hi = std::max(hi, r);
        }
    return hi >= lo ? hi - lo : 0.0;
}

struct Harmonicity {
    double defect = 0;  // max |Laplacian| over the interior
    int excluded = 0;
};

// Second-order Laplacian g^{ab} d_a d_b in grid coordinates (five points plus
// the mixed term on skewed grids).
inline Harmonicity harmonicity_defect(GridGeometry const& g, std::vector<double> const& beta,
                                      std::vector<char> const* flagged = nullptr, int margin = 1) {
    if (beta.size() != g.size()) throw InvalidInput("harmonicity_defect: size mismatch");
    margin = std::max(margin, 1);
    if (g.nu <= 2 * margin || g.nv <= 2 * margin) throw InvalidInput("harmonicity_defect: grid too small");
    // inverse metric of x = J (u, v)
    double const a = g.eu.real(), b = g.ev.real(), c = g.eu.imag(), d = g.ev.imag();
    double const guu = a * a + c * c, guv = a * b + c * d, gvv = b * b + d * d;
    double const dt = guu * gvv - guv * guv;
    double const iuu = gvv / dt, iuv = -guv / dt, ivv = guu / dt;
    Harmonicity h;
    auto at = [&](int i, int j) { return beta[g.index(i, j)]; };
    for (int j = margin; j < g.nv - margin; ++j)
        for (int i = margin; i < g.nu - margin; ++i) {
            bool bad = false;
            if (flagged)
                for (int dj = -1; dj <= 1 && !bad; ++dj)
                    for (int di = -1; di <= 1; ++di)
                        if ((*flagged)[g.index(i + di, j + dj)]) bad = true;
            if (bad) {
                ++h.excluded;
                continue;
            }
            double const buu = at(i + 1, j) - 2 * at(i, j) + at(i - 1, j);
            double const bvv = at(i, j + 1) - 2 * at(i, j) + at(i, j - 1);
            double const buv = (at(i + 1, j + 1) - at(i + 1, j - 1) - at(i - 1, j + 1) + at(i - 1, j - 1)) / 4;
            double const lap = iuu * buu + 2 * iuv * buv + ivv * bvv;
            h.defect = std::max(h.defect, std::abs(lap));
        }
    return h;
}

// mu = -d beta: its mean over unflagged nodes and the largest deviation from it
struct MaslovEstimate {
    double mu_x = 0, mu_y = 0;
    double variation = 0;
    double magnitude() const { return std::hypot(mu_x, mu_y); }
};

inline MaslovEstimate maslov_estimate(AngleField const& a) {
    MaslovEstimate m;
    int cnt = 0;
    for (std::size_t k = 0; k < a.beta.size(); ++k) {
        if (a.flagged[k]) continue;
        m.mu_x -= a.dbeta_x[k];
        m.mu_y -= a.dbeta_y[k];
        ++cnt;
    }
    if (cnt == 0) return m;
    m.mu_x /= cnt;
    m.mu_y /= cnt;
    for (std::size_t k = 0; k < a.beta.size(); ++k) {
        if (a.flagged[k]) continue;
        m.variation = std::max(m.variation, std::hypot(-a.dbeta_x[k] - m.mu_x, -a.dbeta_y[k] - m.mu_y));
    }
    return m;
}

// ---- branch points ------------------------------------------------------------------

struct BranchScan {
    std::vector<std::pair<int, int>> candidates;
    bool degenerate = false;  // alpha_{-1} vanishes identically: not an immersion
    double median = 0;
    std::vector<std::pair<int, int>> chi_zeros;  // nodes where chi_1 is small, if chi was given
    bool chi_agrees = true;                      // every candidate within one cell of a chi_1 zero and back
};

inline BranchScan branch_point_scan(MaurerCartanField const& a, ChiField const* chi = nullptr, double rel = 1e-6) {
    auto const& g = a.grid;
    std::vector<double> nrm(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) nrm[k] = norm(a.samples[k].dz_mode(-1));
    BranchScan s;
    std::vector<double> sorted = nrm;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    s.median = sorted[sorted.size() / 2];
    s.degenerate = !(s.median > 0);
    for (int j = 0; j < g.nv; ++j)
        for (int i = 0; i < g.nu; ++i)
            if (!(nrm[g.index(i, j)] > rel * s.median)) s.candidates.emplace_back(i, j);
    if (chi) {
        std::vector<double> c(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) c[k] = norm(chi->chi[k][1]);
        std::vector<double> cs = c;
        std::nth_element(cs.begin(), cs.begin() + cs.size() / 2, cs.end());
        double const cm = cs[cs.size() / 2];
        for (int j = 0; j < g.nv; ++j)
            for (int i = 0; i < g.nu; ++i)
                if (!(c[g.index(i, j)] > rel * cm)) s.chi_zeros.emplace_back(i, j);
        auto near = [](std::pair<int, int> p, std::vector<std::pair<int, int>> const& set) {
            for (auto q : set)
                if (std::abs(p.first - q.first) <= 1 && std::abs(p.second - q.second) <= 1) return true;
            return false;
        };
        for (auto p : s.candidates) s.chi_agrees = s.chi_agrees && near(p, s.chi_zeros);
        for (auto p : s.chi_zeros) s.chi_agrees = s.chi_agrees && near(p, s.candidates);
    }
    return s;
}

// ---- frames from immersions -----------------------------------------------------------

// SU(3) frame [u1, -e^{2i chi} u2, e^{i chi} Z] with Z in the horizontal gauge,
// (u1, u2) the orthonormalized horizontal tangents and 3 chi = pi - beta_det.
// The phases put the dz part of the tangent block into g_{-1}.
inline std::vector<Mat3> lagrangian_frame(ImmersionSample const& s, Pullbacks const& p, AngleField const& a) {
    std::vector<Mat3> out(s.lifts.size());
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (a.flagged[k]) throw VerificationFailure("lagrangian_frame: degenerate tangent plane");
        cplx const ph = std::polar(1.0, a.phi[k]);
        Vec3 const z = s.lifts[k] * ph;
        Vec3 const u1 = p.zx[k] * (ph / std::sqrt(p.E[k]));
        Vec3 u2 = p.zy[k] * ph;
        u2 = u2 - u1 * hdot(u2, u1);
        u2 = u2 * (1.0 / vnorm(u2));
        double const chi = (kPi - a.beta_det[k]) / 3;
        cplx const c2 = -std::polar(1.0, 2 * chi), c3 = std::polar(1.0, chi);
        Mat3 f;
        for (int r = 0; r < 3; ++r) {
            f(r, 0) = u1[r];
            f(r, 1) = u2[r] * c2;
            f(r, 2) = z[r] * c3;
        }
        out[k] = f;
    }
    return out;
}

// ---- report --------------------------------------------------------------------------

struct DefectReport {
    double conformality_max = 0, conformality_mean = 0;
    double lagrangian_max = 0, lagrangian_mean = 0;
    double harmonicity = 0;
    int harmonicity_excluded = 0;
    MaslovEstimate maslov;
    double angle_path_defect = 0;
    int unwrap_failures = 0;
    int degenerate_points = 0;
    double richardson = 0;
    std::vector<std::pair<int, int>> branch_candidates;
};

struct Verification {
    DefectReport report;
    Pullbacks pullbacks;
    AngleField angle;
};

inline Verification verify_immersion(ImmersionSample const& s, VerifyOptions const& opt = {}) {
    Verification v;
    v.pullbacks = fubini_study_pullbacks(s, opt);
    auto const pd = point_defects(v.pullbacks, opt);
    auto& r = v.report;
    r.degenerate_points = pd.degenerate;
    r.richardson = v.pullbacks.richardson;
    for (std::size_t k = 0; k < pd.conformality.size(); ++k) {
        r.conformality_max = std::max(r.conformality_max, pd.conformality[k]);
        r.lagrangian_max = std::max(r.lagrangian_max, pd.lagrangian[k]);
        r.conformality_mean += pd.conformality[k];
        r.lagrangian_mean += pd.lagrangian[k];
    }
    r.conformality_mean /= static_cast<double>(pd.conformality.size());
    r.lagrangian_mean /= static_cast<double>(pd.lagrangian.size());
    v.angle = lagrangian_angle(s, v.pullbacks, opt);
    r.angle_path_defect = v.angle.path_defect;
    r.unwrap_failures = v.angle.unwrap_failures;
    auto const h = harmonicity_defect(s.grid, v.angle.beta, &v.angle.flagged, opt.laplacian_margin);
    r.harmonicity = h.defect;
    r.harmonicity_excluded = h.excluded;
    r.maslov = maslov_estimate(v.angle);
    return v;
}

}  // namespace hsl
