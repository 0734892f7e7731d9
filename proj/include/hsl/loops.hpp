#pragma once

#include <algorithm>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "algebra.hpp"

namespace hsl {

inline constexpr int kDefaultModes = 24;
inline constexpr double kTailWarning = 1e-10;
inline constexpr double kDefaultEpsilon = 0.5;

// Laurent polynomial sum_{|k|<=N} c_k zeta^k with 3x3 coefficients.  Only the
// inner-circle data is stored; the outer circle is implied by reality.
class TwistedLoop {
public:
    TwistedLoop() : TwistedLoop(kDefaultModes) {}
    explicit TwistedLoop(int modes_limit, double epsilon = kDefaultEpsilon)
        : n_(checked(modes_limit)), epsilon_(epsilon), c_(2 * n_ + 1) {
        if (!(epsilon > 0 && epsilon < 1)) throw InvalidInput("TwistedLoop: epsilon must lie in (0,1)");
    }

    static TwistedLoop constant(Mat3 const& m, int n = kDefaultModes) {
        TwistedLoop l(n);
        l.c_[n] = m;
        return l;
    }
    static TwistedLoop identity(int n = kDefaultModes) {
        auto l = constant(Mat3::identity(), n);
        l.real = true;
        l.plus = true;
        return l;
    }
    static TwistedLoop monomial(int k, Mat3 const& m, int n = kDefaultModes) {
        TwistedLoop l(n);
        l.at(k) = m;
        return l;
    }

    int modes_limit() const { return n_; }
    double epsilon() const { return epsilon_; }

    bool in_range(int k) const { return k >= -n_ && k <= n_; }
    Mat3 const& operator[](int k) const {
        static Mat3 const zero;
        return in_range(k) ? c_[k + n_] : zero;
    }
    Mat3& at(int k) {
        if (!in_range(k)) throw InvalidInput("TwistedLoop: mode " + std::to_string(k) + " outside +-" +
                                             std::to_string(n_));
        return c_[k + n_];
    }
    std::vector<Mat3> const& coeffs() const { return c_; }

    // smallest / largest mode with a coefficient above thr (0 if none)
    int min_mode(double thr = 0) const {
        for (int k = -n_; k <= n_; ++k)
            if (norm((*this)[k]) > thr) return k;
        return 0;
    }
    int max_mode(double thr = 0) const {
        for (int k = n_; k >= -n_; --k)
            if (norm((*this)[k]) > thr) return k;
        return 0;
    }

    bool truncation_warning() const { return tail_mass > kTailWarning; }

    bool real = false;
    bool plus = false;
    double tail_mass = 0;  // Frobenius mass dropped by the last truncation

    friend bool operator==(TwistedLoop const& a, TwistedLoop const& b) {
        return a.n_ == b.n_ && a.epsilon_ == b.epsilon_ && a.real == b.real && a.plus == b.plus && a.c_ == b.c_;
    }

private:
    static int checked(int n) {
        if (n < 0) throw InvalidInput("TwistedLoop: negative truncation order");
        return n;
    }

    int n_;
    double epsilon_;
    std::vector<Mat3> c_;
};

// Loops in lambda = zeta^2 after conjugating by kappa(zeta).
class UntwistedLoop {
public:
    explicit UntwistedLoop(int modes_limit = 0) : n_(modes_limit), c_(2 * modes_limit + 1) {}
    int modes_limit() const { return n_; }
    Mat3 const& operator[](int k) const {
        static Mat3 const zero;
        return (k >= -n_ && k <= n_) ? c_[k + n_] : zero;
    }
    Mat3& at(int k) {
        if (k < -n_ || k > n_) throw InvalidInput("UntwistedLoop: mode out of range");
        return c_[k + n_];
    }

private:
    int n_;
    std::vector<Mat3> c_;
};

// ---- evaluation ----------------------------------------------------------------

inline Mat3 eval(TwistedLoop const& l, cplx zeta) {
    int const n = l.modes_limit();
    if (zeta == cplx{}) {
        for (int k = -n; k < 0; ++k)
            if (norm(l[k]) > 0) throw InvalidInput("eval: zeta = 0 with negative modes present");
        return l[0];
    }
    // Horner from both ends
    Mat3 pos;
    for (int k = n; k >= 0; --k) pos = pos * zeta + l[k];
    Mat3 neg;
    cplx const zi = 1.0 / zeta;
    for (int k = -n; k < 0; ++k) neg = (neg + l[k]) * zi;
    return pos + neg;
}

inline Mat3 eval(UntwistedLoop const& l, cplx lambda) {
    int const n = l.modes_limit();
    Mat3 r;
    cplx p = 1.0;
    for (int k = 0; k <= n; ++k, p *= lambda) r += l[k] * p;
    if (n > 0) {
        if (lambda == cplx{}) {
            for (int k = 1; k <= n; ++k)
                if (norm(l[-k]) > 0) throw InvalidInput("eval: lambda = 0 with negative modes present");
        } else {
            cplx q = 1.0 / lambda;
            for (int k = 1; k <= n; ++k, q /= lambda) r += l[-k] * q;
        }
    }
    return r;
}

// Roots of unity of order 4N+1 and the two DFTs between modes and samples.
class CircleSampler {
public:
    explicit CircleSampler(int n) : n_(n), m_(4 * n + 1), roots_(m_) {
        for (int j = 0; j < m_; ++j) roots_[j] = std::polar(1.0, 2 * kPi * j / m_);
    }
    int modes_limit() const { return n_; }
    int size() const { return m_; }
    cplx node(int j) const { return roots_[j]; }

    std::vector<Mat3> evaluate(TwistedLoop const& l) const {
        int const ln = std::min(l.modes_limit(), 2 * n_);
        std::vector<Mat3> out(m_);
        for (int k = -ln; k <= ln; ++k) {
            Mat3 const& c = l[k];
            bool nz = false;
            for (auto const& x : c.data()) nz = nz || x != cplx{};
            if (!nz) continue;
            int const kk = ((k % m_) + m_) % m_;
            for (int j = 0; j < m_; ++j) {
                cplx const z = roots_[(static_cast<long>(kk) * j) % m_];
                auto& o = out[j].data();
                for (int e = 0; e < 9; ++e) o[e] += c.data()[e] * z;
            }
        }
        return out;
    }

    // Samples -> modes |k| <= 2N; modes beyond N are dropped into tail_mass.
    TwistedLoop interpolate(std::vector<Mat3> const& s, double epsilon = kDefaultEpsilon) const {
        if (static_cast<int>(s.size()) != m_) throw InvalidInput("interpolate: sample count mismatch");
        TwistedLoop l(n_, epsilon);
        double tail = 0;
        for (int k = -2 * n_; k <= 2 * n_; ++k) {
            int const kk = (((-k) % m_) + m_) % m_;
            Mat3 c;
            for (int j = 0; j < m_; ++j) {
                cplx const z = roots_[(static_cast<long>(kk) * j) % m_];
                auto const& sd = s[j].data();
                for (int e = 0; e < 9; ++e) c.data()[e] += sd[e] * z;
            }
            c *= 1.0 / m_;
            if (std::abs(k) <= n_)
                l.at(k) = c;
            else
                tail += norm(c);
        }
        l.tail_mass = tail;
        return l;
    }

private:
    int n_, m_;
    std::vector<cplx> roots_;
};

inline CircleSampler const& sampler(int n) {
    static std::mutex mu;
    static std::map<int, std::unique_ptr<CircleSampler>> cache;
    std::lock_guard<std::mutex> lock(mu);
    auto& p = cache[n];
    if (!p) p = std::make_unique<CircleSampler>(n);
    return *p;
}

// ---- arithmetic ------------------------------------------------------------------

inline TwistedLoop resize(TwistedLoop const& l, int n) {
    TwistedLoop r(n, l.epsilon());
    double tail = l.tail_mass;
    for (int k = -l.modes_limit(); k <= l.modes_limit(); ++k) {
        if (r.in_range(k))
            r.at(k) = l[k];
        else
            tail += norm(l[k]);
    }
    r.tail_mass = tail;
    r.real = l.real;
    r.plus = l.plus;
    return r;
}

inline TwistedLoop operator+(TwistedLoop const& a, TwistedLoop const& b) {
    int const n = std::max(a.modes_limit(), b.modes_limit());
    TwistedLoop r(n, a.epsilon());
    for (int k = -n; k <= n; ++k) r.at(k) = a[k] + b[k];
    r.tail_mass = a.tail_mass + b.tail_mass;
    r.real = a.real && b.real;
    r.plus = a.plus && b.plus;
    return r;
}

inline TwistedLoop operator*(cplx s, TwistedLoop const& a) {
    TwistedLoop r(a.modes_limit(), a.epsilon());
    for (int k = -a.modes_limit(); k <= a.modes_limit(); ++k) r.at(k) = a[k] * s;
    r.tail_mass = std::abs(s) * a.tail_mass;
    r.real = a.real && s.imag() == 0;
    r.plus = a.plus;
    return r;
}

inline TwistedLoop operator-(TwistedLoop const& a, TwistedLoop const& b) { return a + cplx(-1.0) * b; }
inline TwistedLoop operator*(TwistedLoop const& a, double s) { return cplx(s) * a; }
inline TwistedLoop& operator+=(TwistedLoop& a, TwistedLoop const& b) {
    a = a + b;
    return a;
}

// Cauchy product truncated to the larger of the two orders; exact below it.
inline TwistedLoop multiply(TwistedLoop const& a, TwistedLoop const& b) {
    int const n = std::max(a.modes_limit(), b.modes_limit());
    TwistedLoop r(n, a.epsilon());
    int const alo = a.min_mode(), ahi = a.max_mode(), blo = b.min_mode(), bhi = b.max_mode();
    int const lo = alo + blo, hi = ahi + bhi;
    std::vector<Mat3> acc(hi - lo + 1);
    for (int i = alo; i <= ahi; ++i) {
        Mat3 const& ai = a[i];
        if (norm(ai) == 0) continue;
        for (int j = blo; j <= bhi; ++j) acc[i + j - lo] += ai * b[j];
    }
    double tail = 0;
    for (int k = lo; k <= hi; ++k) {
        if (r.in_range(k))
            r.at(k) = acc[k - lo];
        else
            tail += norm(acc[k - lo]);
    }
    // dropped mass from earlier truncations propagates through the product
    double const an = [&] { double s = 0; for (auto const& c : a.coeffs()) s += norm(c); return s; }();
    double const bn = [&] { double s = 0; for (auto const& c : b.coeffs()) s += norm(c); return s; }();
    r.tail_mass = tail + a.tail_mass * bn + b.tail_mass * an + a.tail_mass * b.tail_mass;
    r.real = a.real && b.real;
    r.plus = a.plus && b.plus;
    return r;
}

inline TwistedLoop loop_commutator(TwistedLoop const& a, TwistedLoop const& b) {
    return multiply(a, b) - multiply(b, a);
}

// zeta^s * l, keeping the truncation order
inline TwistedLoop shift(TwistedLoop const& l, int s) {
    TwistedLoop r(l.modes_limit(), l.epsilon());
    double tail = l.tail_mass;
    for (int k = -l.modes_limit(); k <= l.modes_limit(); ++k) {
        if (r.in_range(k + s))
            r.at(k + s) = l[k];
        else
            tail += norm(l[k]);
    }
    r.tail_mass = tail;
    return r;
}

template <class F>
TwistedLoop pointwise(TwistedLoop const& l, F&& f) {
    auto const& sm = sampler(l.modes_limit());
    auto s = sm.evaluate(l);
    for (auto& x : s) x = f(x);
    return sm.interpolate(s, l.epsilon());
}

template <class F>
TwistedLoop pointwise2(TwistedLoop const& a, TwistedLoop const& b, F&& f) {
    int const n = std::max(a.modes_limit(), b.modes_limit());
    auto const& sm = sampler(n);
    auto sa = sm.evaluate(a);
    auto const sb = sm.evaluate(b);
    for (int j = 0; j < sm.size(); ++j) sa[j] = f(sa[j], sb[j]);
    return sm.interpolate(sa, a.epsilon());
}

inline TwistedLoop exp_loop(TwistedLoop const& xi, cplx t = 1.0) {
    auto r = pointwise(xi, [t](Mat3 const& x) { return expm(x * t); });
    r.plus = xi.plus;
    r.real = xi.real && t.imag() == 0;
    return r;
}

namespace detail {

inline bool eigen_basis(Mat3 const& x, std::array<cplx, 3>& lam, Eigen::Matrix3cd& v) {
    Eigen::Matrix3cd m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) m(r, c) = x(r, c);
    Eigen::ComplexEigenSolver<Eigen::Matrix3cd> es(m);
    if (es.info() != Eigen::Success) return false;
    v = es.eigenvectors();
    Eigen::JacobiSVD<Eigen::Matrix3cd> svd(v);
    auto const sv = svd.singularValues();
    if (!(sv(2) > 1e-8 * sv(0))) return false;
    for (int j = 0; j < 3; ++j) lam[j] = es.eigenvalues()(j);
    return true;
}

// permutation p minimizing sum |a_i - b_p(i)|
inline std::array<int, 3> match(std::array<cplx, 3> const& a, std::array<cplx, 3> const& b) {
    std::array<int, 3> p{0, 1, 2}, best = p;
    double bd = 1e300;
    do {
        double d = 0;
        for (int i = 0; i < 3; ++i) d += std::abs(a[i] - b[p[i]]);
        if (d < bd) {
            bd = d;
            best = p;
        }
    } while (std::next_permutation(p.begin(), p.end()));
    return best;
}

inline cplx log_near(cplx z, double ref_imag) {
    cplx const l = std::log(z);
    return {l.real(), l.imag() + 2 * kPi * std::round((ref_imag - l.imag()) / (2 * kPi))};
}

// Logs at equispaced circle samples with each eigenvalue's branch followed
// continuously, starting at sample 0 from the least-norm choice with the
// smallest |trace|.  Empty if a basis is ill-conditioned or the branches do
// not close up around the circle.
inline std::optional<std::vector<Mat3>> continuous_log(std::vector<Mat3> const& s) {
    std::size_t const m = s.size();
    std::vector<std::array<cplx, 3>> lam(m), lg(m);
    std::vector<Eigen::Matrix3cd> vec(m);
    for (std::size_t j = 0; j < m; ++j)
        if (!eigen_basis(s[j], lam[j], vec[j])) return std::nullopt;
    std::array<cplx, 3> l0;
    for (int i = 0; i < 3; ++i) {
        if (lam[0][i] == cplx{}) return std::nullopt;
        l0[i] = std::log(lam[0][i]);
    }
    double best_tr = 1e300, best_n = 1e300;
    for (int a = -2; a <= 2; ++a)
        for (int b = -2; b <= 2; ++b)
            for (int c = -2; c <= 2; ++c) {
                std::array<cplx, 3> t{l0[0] + 2 * kPi * kI * double(a), l0[1] + 2 * kPi * kI * double(b),
                                      l0[2] + 2 * kPi * kI * double(c)};
                double const tr = std::abs(t[0] + t[1] + t[2]);
                double const nn = std::norm(t[0]) + std::norm(t[1]) + std::norm(t[2]);
                if (tr < best_tr - 1e-9 || (tr < best_tr + 1e-9 && nn < best_n)) {
                    best_tr = std::min(best_tr, tr);
                    best_n = nn;
                    lg[0] = t;
                }
            }
    auto step = [&](std::size_t from, std::size_t to, std::array<cplx, 3>& out) {
        auto const p = match(lam[from], lam[to]);
        for (int i = 0; i < 3; ++i) out[p[i]] = log_near(lam[to][p[i]], lg[from][i].imag());
    };
    for (std::size_t j = 1; j < m; ++j) step(j - 1, j, lg[j]);
    std::array<cplx, 3> wrap;
    step(m - 1, 0, wrap);
    auto const p = match(lam[0], lam[0]);
    for (int i = 0; i < 3; ++i)
        if (std::abs(wrap[p[i]] - lg[0][p[i]]) > 1e-6) return std::nullopt;
    std::vector<Mat3> out(m);
    for (std::size_t j = 0; j < m; ++j) {
        Eigen::Matrix3cd d = Eigen::Matrix3cd::Zero();
        for (int i = 0; i < 3; ++i) d(i, i) = lg[j][i];
        Eigen::Matrix3cd const l = vec[j] * d * vec[j].inverse();
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) out[j](r, c) = l(r, c);
    }
    return out;
}

}  // namespace detail

// Pointwise logarithm with branches chosen by continuity around the circle;
// falls back to the principal branch when no continuous choice is found.
inline TwistedLoop log_loop(TwistedLoop const& g) {
    auto const& sm = sampler(g.modes_limit());
    auto s = sm.evaluate(g);
    if (auto c = detail::continuous_log(s)) {
        s = std::move(*c);
    } else {
        for (auto& x : s) x = logm(x);
    }
    auto r = sm.interpolate(s, g.epsilon());
    r.plus = g.plus;
    return r;
}

inline double max_distance(TwistedLoop const& a, TwistedLoop const& b) {
    int const n = std::max(a.modes_limit(), b.modes_limit());
    double d = 0;
    for (int k = -n; k <= n; ++k) d = std::max(d, norm(a[k] - b[k]));
    return d;
}

// sup over 16 points of the unit circle of the pointwise distance
inline double sampled_distance(TwistedLoop const& a, TwistedLoop const& b, int samples = 16) {
    double d = 0;
    for (int j = 0; j < samples; ++j) {
        cplx const z = std::polar(1.0, 2 * kPi * (j + 0.25) / samples);
        d = std::max(d, norm(eval(a, z) - eval(b, z)));
    }
    return d;
}

inline double total_mass(TwistedLoop const& l) {
    double s = 0;
    for (auto const& c : l.coeffs()) s += norm(c);
    return s;
}

// Invert through pointwise inversion, then Newton steps X <- X(2 - gX).
inline TwistedLoop invert(TwistedLoop const& g) {
    int const n = g.modes_limit();
    auto const& sm = sampler(n);
    auto s = sm.evaluate(g);
    for (auto& x : s) x = inverse(x);
    TwistedLoop x = sm.interpolate(s, g.epsilon());
    TwistedLoop const two = TwistedLoop::constant(Mat3::identity() * 2.0, n);
    for (int it = 0; it < 3; ++it) {
        TwistedLoop const gx = multiply(g, x);
        TwistedLoop const defect = gx - TwistedLoop::identity(n);
        if (total_mass(defect) < 1e-15) break;
        x = multiply(x, two - gx);
    }
    x.real = g.real;
    x.plus = g.plus;
    return x;
}

// mode -k <- real_conjugate(mode k)
inline TwistedLoop real_conjugate(TwistedLoop const& l) {
    TwistedLoop r(l.modes_limit(), l.epsilon());
    for (int k = -l.modes_limit(); k <= l.modes_limit(); ++k) r.at(-k) = real_conjugate(l[k]);
    return r;
}

// ---- predicates --------------------------------------------------------------

// Coefficient form of the twist for Lie-algebra loops.
inline double twist_defect(TwistedLoop const& l) {
    double d = 0;
    for (int k = -l.modes_limit(); k <= l.modes_limit(); ++k) d = std::max(d, eigenspace_defect(l[k], k));
    return d;
}

// Group loops: tau(g(zeta)) = g(i zeta), checked pointwise.
inline double group_twist_defect(TwistedLoop const& g, int samples = 16) {
    double d = 0;
    for (int j = 0; j < samples; ++j) {
        cplx const z = std::polar(1.0, 2 * kPi * (j + 0.3) / samples);
        d = std::max(d, norm(apply_tau(eval(g, z)) - eval(g, kI * z)));
    }
    return d;
}

// mode -k equal to real_conjugate of mode k (algebra loops)
inline double reality_defect(TwistedLoop const& l) {
    double d = 0;
    for (int k = 0; k <= l.modes_limit(); ++k) d = std::max(d, norm(l[-k] - real_conjugate(l[k])));
    return d;
}

inline double unitarity_defect(TwistedLoop const& g, int samples = 16) {
    double d = 0;
    for (int j = 0; j < samples; ++j) {
        Mat3 const v = eval(g, std::polar(1.0, 2 * kPi * (j + 0.1) / samples));
        d = std::max(d, norm(adjoint(v) * v - Mat3::identity()));
    }
    return d;
}

inline double negative_mode_mass(TwistedLoop const& l) {
    double s = 0;
    for (int k = -l.modes_limit(); k < 0; ++k) s += norm(l[k]);
    return s;
}

inline double mass_outside(TwistedLoop const& l, int lo, int hi) {
    double s = 0;
    for (int k = -l.modes_limit(); k <= l.modes_limit(); ++k)
        if (k < lo || k > hi) s += norm(l[k]);
    return s;
}

// Even modes block-diagonal, odd modes off the block; this is the linear
// sigma-equivariance and is what untwisting needs.
inline double parity_defect(TwistedLoop const& l) {
    double d = 0;
    for (int k = -l.modes_limit(); k <= l.modes_limit(); ++k) {
        Mat3 const& c = l[k];
        bool const even = (k % 2) == 0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j)
                if (((i == 2) != (j == 2)) == even) d = std::max(d, std::abs(c(i, j)));
    }
    return d;
}

// ---- untwisting -----------------------------------------------------------------

inline UntwistedLoop untwist(TwistedLoop const& g, double tol = 1e-10) {
    double const scale = std::max(1.0, total_mass(g));
    if (parity_defect(g) > tol * scale) throw InvalidInput("untwist: loop violates the twist invariant");
    int const n = g.modes_limit();
    UntwistedLoop r((n + 1) / 2);
    for (int k = -n; k <= n; ++k) {
        Mat3 const& c = g[k];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                // kappa^{-1} g kappa: entry picks up zeta^{[j<2] - [i<2]}
                int const e = k + (j < 2 ? 1 : 0) - (i < 2 ? 1 : 0);
                if (e % 2 != 0) continue;  // zero by parity
                r.at(e / 2)(i, j) += c(i, j);
            }
    }
    return r;
}

inline TwistedLoop retwist(UntwistedLoop const& h, int n = -1) {
    int const nl = h.modes_limit();
    if (n < 0) n = 2 * nl + 1;
    TwistedLoop r(n);
    double tail = 0;
    for (int m = -nl; m <= nl; ++m) {
        Mat3 const& c = h[m];
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) {
                int const k = 2 * m - (j < 2 ? 1 : 0) + (i < 2 ? 1 : 0);
                if (c(i, j) == cplx{}) continue;
                if (r.in_range(k))
                    r.at(k)(i, j) += c(i, j);
                else
                    tail += std::abs(c(i, j));
            }
    }
    r.tail_mass = tail;
    return r;
}

// Symmetry of untwisted loops: g(-lambda) = S_l^{-1} g(lambda)* S_l for groups,
// x(-lambda) = -S_l^{-1} x(lambda)^T S_l for algebras.
inline double check_tau_untwisted(UntwistedLoop const& h, bool group = true, int samples = 16) {
    double d = 0;
    for (int j = 0; j < samples; ++j) {
        cplx const lam = std::polar(1.0, 2 * kPi * (j + 0.2) / samples);
        Mat3 const sl = S_lambda(lam);
        Mat3 const v = eval(h, lam);
        Mat3 const rhs = group ? inverse(sl) * transpose(inverse(v)) * sl : -(inverse(sl) * transpose(v) * sl);
        d = std::max(d, norm(eval(h, -lam) - rhs));
    }
    return d;
}

}  // namespace hsl
