#pragma once

#include <algorithm>
#include <array>
#include <exception>
#include <map>
#include <mutex>
#include <thread>
#include <vector>

#include "algebra.hpp"

namespace hsl {

// Nodes w(i, j) = origin + i*eu + j*ev, i < nu, j < nv, stored row-major in j.
// Frames are based at node (base_i, base_j).
struct GridGeometry {
    int nu = 0, nv = 0;
    cplx origin{};
    cplx eu{1, 0}, ev{0, 1};
    int base_i = 0, base_j = 0;

    std::size_t size() const { return static_cast<std::size_t>(nu) * nv; }
    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * nu + i; }
    cplx w(int i, int j) const { return origin + static_cast<double>(i) * eu + static_cast<double>(j) * ev; }

    // n x n nodes x_i = (i - n/2) h, h = size / n; the origin is node n/2
    static GridGeometry centered_square(int n, double size) {
        if (n < 5) throw InvalidInput("grid: need at least 5 nodes per side");
        if (!(size > 0)) throw InvalidInput("grid: size must be positive");
        GridGeometry g;
        double const h = size / n;
        g.nu = g.nv = n;
        g.eu = h;
        g.ev = cplx(0, h);
        g.base_i = g.base_j = n / 2;
        g.origin = -static_cast<double>(n / 2) * (g.eu + g.ev);
        return g;
    }

    // n x n nodes spanning the parallelogram [0,1) g1 + [0,1) g2
    static GridGeometry parallelogram(int n, cplx g1, cplx g2) {
        if (n < 5) throw InvalidInput("grid: need at least 5 nodes per side");
        GridGeometry g;
        g.nu = g.nv = n;
        g.eu = g1 / static_cast<double>(n);
        g.ev = g2 / static_cast<double>(n);
        return g;
    }

    // d/du = Re(eu) d/dx + Im(eu) d/dy, same for v; returns the inverse map
    // so that [d/dx, d/dy] = inv * [d/du, d/dv].
    std::array<double, 4> uv_to_xy() const {
        double const a = eu.real(), b = eu.imag(), c = ev.real(), d = ev.imag();
        double const dt = a * d - b * c;
        if (std::abs(dt) < 1e-300) throw InvalidInput("grid: degenerate edge vectors");
        return {d / dt, -b / dt, -c / dt, a / dt};
    }

    friend bool operator==(GridGeometry const&, GridGeometry const&) = default;
};

// ---- finite difference weights ----------------------------------------------

// Fornberg's recursion: weights c[k][j] for the k-th derivative at x0 from
// nodes x[0..n-1], k <= m.
inline std::vector<std::vector<double>> fornberg(double x0, std::vector<double> const& x, int m) {
    int const n = static_cast<int>(x.size());
    std::vector<std::vector<double>> c(m + 1, std::vector<double>(n, 0.0));
    double c1 = 1, c4 = x[0] - x0;
    c[0][0] = 1;
    for (int i = 1; i < n; ++i) {
        int const mn = std::min(i, m);
        double c2 = 1;
        double const c5 = c4;
        c4 = x[i] - x0;
        for (int j = 0; j < i; ++j) {
            double const c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k) c[k][i] = c1 * (k * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for (int k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - k * c[k - 1][j]) / c3;
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    return c;
}

struct Stencil {
    std::vector<int> offsets;
    std::vector<double> weights;
};

// Derivative stencil on order+1 nodes at node pos of a line of n unit-spaced
// nodes; centred where it fits, shifted inward otherwise.  Second derivatives
// lose one order when shifted.
inline Stencil const& stencil(int order, int deriv, int pos, int n, int spacing = 1) {
    int const width = order + 1;
    int const lo_shift = -(pos / spacing);
    int const hi_shift = (n - 1 - pos) / spacing - (width - 1);
    if (hi_shift < lo_shift) throw InvalidInput("stencil: line too short for requested order");
    int const key_shift = std::clamp(-(width / 2), lo_shift, hi_shift);

    static std::mutex mu;
    static std::map<std::array<int, 4>, Stencil> cache;
    std::array<int, 4> key{order, deriv, key_shift, spacing};
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    Stencil s;
    std::vector<double> xs;
    for (int k = 0; k < width; ++k) {
        s.offsets.push_back((key_shift + k) * spacing);
        xs.push_back(static_cast<double>((key_shift + k) * spacing));
    }
    auto const w = fornberg(0.0, xs, deriv);
    s.weights = w[deriv];
    return cache.emplace(key, std::move(s)).first->second;
}

// Differentiate a field stored on the grid along u (axis 0) or v (axis 1).
template <class T>
T grid_derivative(std::vector<T> const& f, GridGeometry const& g, int i, int j, int axis, int order, int deriv = 1,
                  int spacing = 1) {
    int const pos = axis == 0 ? i : j;
    int const n = axis == 0 ? g.nu : g.nv;
    auto const& st = stencil(order, deriv, pos, n, spacing);
    T acc = f[axis == 0 ? g.index(i + st.offsets[0], j) : g.index(i, j + st.offsets[0])] * st.weights[0];
    for (std::size_t k = 1; k < st.offsets.size(); ++k) {
        int const o = st.offsets[k];
        acc += f[axis == 0 ? g.index(i + o, j) : g.index(i, j + o)] * st.weights[k];
    }
    return acc;
}

// Run f(k) for k in [0, n), spread over the hardware threads.  Each index
// writes only its own slot so the merge is deterministic.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    unsigned const hw = std::max(1u, std::thread::hardware_concurrency());
    if (hw == 1 || n < 2) {
        for (std::size_t k = 0; k < n; ++k) f(k);
        return;
    }
    std::exception_ptr err;
    std::mutex mu;
    std::vector<std::thread> pool;
    unsigned const nt = static_cast<unsigned>(std::min<std::size_t>(hw, n));
    for (unsigned t = 0; t < nt; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t k = t; k < n; k += nt) {
                try {
                    f(k);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(mu);
                    if (!err) err = std::current_exception();
                    return;
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
}

using Vec3 = std::array<cplx, 3>;

inline cplx hdot(Vec3 const& a, Vec3 const& b) {  // <a, b> = sum a_i conj(b_i)
    return a[0] * std::conj(b[0]) + a[1] * std::conj(b[1]) + a[2] * std::conj(b[2]);
}

inline double vnorm(Vec3 const& a) { return std::sqrt(std::norm(a[0]) + std::norm(a[1]) + std::norm(a[2])); }

inline Vec3 operator+(Vec3 a, Vec3 const& b) {
    for (int k = 0; k < 3; ++k) a[k] += b[k];
    return a;
}
inline Vec3 operator-(Vec3 a, Vec3 const& b) {
    for (int k = 0; k < 3; ++k) a[k] -= b[k];
    return a;
}
inline Vec3 operator*(Vec3 a, cplx s) {
    for (auto& x : a) x *= s;
    return a;
}
inline Vec3 operator*(Vec3 a, double s) {
    for (auto& x : a) x *= s;
    return a;
}
inline Vec3& operator+=(Vec3& a, Vec3 const& b) {
    for (int k = 0; k < 3; ++k) a[k] += b[k];
    return a;
}

// Fubini-Study distance between the lines through a and b.
inline double fs_distance(Vec3 const& a, Vec3 const& b) {
    Vec3 const ua = a * (1.0 / vnorm(a));
    Vec3 const ub = b * (1.0 / vnorm(b));
    cplx const p = hdot(ub, ua);
    return std::atan2(vnorm(ub - ua * p), std::abs(p));
}

// Lifts of a map into CP^2 sampled on a grid.
struct ImmersionSample {
    GridGeometry grid;
    std::vector<Vec3> lifts;

    // normalizes and checks
    static ImmersionSample make(GridGeometry g, std::vector<Vec3> lifts) {
        if (lifts.size() != g.size()) throw InvalidInput("ImmersionSample: lift count does not match grid");
        for (auto& z : lifts) {
            double const n = vnorm(z);
            if (!(n > 0) || !std::isfinite(n)) throw InvalidInput("ImmersionSample: zero or non-finite lift");
            z = z * (1.0 / n);
        }
        return {g, std::move(lifts)};
    }
};

}  // namespace hsl
