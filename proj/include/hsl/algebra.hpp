#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace hsl {

using cplx = std::complex<double>;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

// Thrown for malformed inputs; the CLI maps it to exit code 2.
struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Iterative schemes that give up; exit code 3.
struct ConvergenceFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A verification that was asked to hold and didn't; exit code 4.
struct VerificationFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Tolerances {
    double membership = 1e-10;  // traceless / anti-Hermitian / block support
};

class Mat3 {
public:
    Mat3() { a_.fill(cplx{}); }

    static Mat3 zero() { return {}; }
    static Mat3 identity() { return diag(1.0, 1.0, 1.0); }
    static Mat3 diag(cplx d0, cplx d1, cplx d2) {
        Mat3 m;
        m(0, 0) = d0;
        m(1, 1) = d1;
        m(2, 2) = d2;
        return m;
    }
    static Mat3 from_rows(std::array<std::array<cplx, 3>, 3> const& r) {
        Mat3 m;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) m(i, j) = r[i][j];
        return m;
    }

    cplx& operator()(int i, int j) { return a_[3 * i + j]; }
    cplx const& operator()(int i, int j) const { return a_[3 * i + j]; }
    std::array<cplx, 9>& data() { return a_; }
    std::array<cplx, 9> const& data() const { return a_; }

    Mat3& operator+=(Mat3 const& o) {
        for (int k = 0; k < 9; ++k) a_[k] += o.a_[k];
        return *this;
    }
    Mat3& operator-=(Mat3 const& o) {
        for (int k = 0; k < 9; ++k) a_[k] -= o.a_[k];
        return *this;
    }
    Mat3& operator*=(cplx s) {
        for (auto& x : a_) x *= s;
        return *this;
    }

    friend Mat3 operator+(Mat3 a, Mat3 const& b) { return a += b; }
    friend Mat3 operator-(Mat3 a, Mat3 const& b) { return a -= b; }
    friend Mat3 operator-(Mat3 a) { return a *= -1.0; }
    friend Mat3 operator*(Mat3 a, cplx s) { return a *= s; }
    friend Mat3 operator*(cplx s, Mat3 a) { return a *= s; }
    friend Mat3 operator*(Mat3 a, double s) { return a *= s; }
    friend Mat3 operator*(double s, Mat3 a) { return a *= s; }
    friend Mat3 operator/(Mat3 a, cplx s) { return a *= 1.0 / s; }

    friend Mat3 operator*(Mat3 const& x, Mat3 const& y) {
        Mat3 r;
        for (int i = 0; i < 3; ++i)
            for (int k = 0; k < 3; ++k) {
                cplx const xik = x(i, k);
                if (xik == cplx{}) continue;
                for (int j = 0; j < 3; ++j) r(i, j) += xik * y(k, j);
            }
        return r;
    }

    friend bool operator==(Mat3 const&, Mat3 const&) = default;

    // apply to a column vector
    std::array<cplx, 3> apply(std::array<cplx, 3> const& v) const {
        std::array<cplx, 3> r{};
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) r[i] += (*this)(i, j) * v[j];
        return r;
    }
    std::array<cplx, 3> column(int j) const { return {(*this)(0, j), (*this)(1, j), (*this)(2, j)}; }

private:
    std::array<cplx, 9> a_;
};

inline Mat3 transpose(Mat3 const& m) {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = m(j, i);
    return r;
}

inline Mat3 adjoint(Mat3 const& m) {
    Mat3 r;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) r(i, j) = std::conj(m(j, i));
    return r;
}

inline Mat3 conj(Mat3 const& m) {
    Mat3 r;
    for (int k = 0; k < 9; ++k) r.data()[k] = std::conj(m.data()[k]);
    return r;
}

inline cplx trace(Mat3 const& m) { return m(0, 0) + m(1, 1) + m(2, 2); }

inline cplx det(Mat3 const& m) {
    return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
           m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
           m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

inline double norm(Mat3 const& m) {
    double s = 0;
    for (auto const& x : m.data()) s += std::norm(x);
    return std::sqrt(s);
}

inline double max_abs(Mat3 const& m) {
    double s = 0;
    for (auto const& x : m.data()) s = std::max(s, std::abs(x));
    return s;
}

inline Mat3 commutator(Mat3 const& a, Mat3 const& b) { return a * b - b * a; }

// Gaussian elimination with partial pivoting; the adjugate formula loses
// too much for the badly scaled loops that show up mid-continuation.
inline Mat3 inverse(Mat3 const& m) {
    Mat3 a = m;
    Mat3 r = Mat3::identity();
    double scale = max_abs(m);
    if (!(scale > 0) || !std::isfinite(scale)) throw InvalidInput("inverse: singular matrix");
    for (int c = 0; c < 3; ++c) {
        int p = c;
        for (int i = c + 1; i < 3; ++i)
            if (std::abs(a(i, c)) > std::abs(a(p, c))) p = i;
        if (std::abs(a(p, c)) <= 1e-14 * scale) throw InvalidInput("inverse: singular matrix");
        if (p != c)
            for (int j = 0; j < 3; ++j) {
                std::swap(a(p, j), a(c, j));
                std::swap(r(p, j), r(c, j));
            }
        cplx const piv = 1.0 / a(c, c);
        for (int j = 0; j < 3; ++j) {
            a(c, j) *= piv;
            r(c, j) *= piv;
        }
        for (int i = 0; i < 3; ++i) {
            if (i == c) continue;
            cplx const f = a(i, c);
            if (f == cplx{}) continue;
            for (int j = 0; j < 3; ++j) {
                a(i, j) -= f * a(c, j);
                r(i, j) -= f * r(c, j);
            }
        }
    }
    return r;
}

// ---- matrix exponential / logarithm --------------------------------------

inline Mat3 expm(Mat3 const& x) {
    // [6/6] Pade after scaling to norm <= 1/2; truncation ~1e-18 there.
    static constexpr double c[7] = {1.0,
                                    1.0 / 2.0,
                                    5.0 / 44.0,
                                    1.0 / 66.0,
                                    1.0 / 792.0,
                                    1.0 / 15840.0,
                                    1.0 / 665280.0};
    double const nrm = norm(x);
    if (!std::isfinite(nrm)) throw InvalidInput("expm: non-finite input");
    int s = 0;
    if (nrm > 0.5) s = std::max(0, static_cast<int>(std::ceil(std::log2(nrm / 0.5))));
    Mat3 const a = x * std::ldexp(1.0, -s);
    Mat3 const a2 = a * a;
    Mat3 const a4 = a2 * a2;
    Mat3 const a6 = a4 * a2;
    Mat3 const I = Mat3::identity();
    Mat3 const even = I * c[0] + a2 * c[2] + a4 * c[4] + a6 * c[6];
    Mat3 const odd = a * (I * c[1] + a2 * c[3] + a4 * c[5]);
    Mat3 r = inverse(even - odd) * (even + odd);
    for (int k = 0; k < s; ++k) r = r * r;
    return r;
}

// Principal square root, product form of Denman-Beavers with determinant scaling.
inline Mat3 sqrtm(Mat3 const& a) {
    Mat3 const I = Mat3::identity();
    Mat3 m = a;
    Mat3 y = a;
    for (int it = 0; it < 100; ++it) {
        double const g = std::pow(std::abs(det(m)), -1.0 / 6.0);
        Mat3 const mi = inverse(m);
        y = y * ((I + mi * (1.0 / (g * g))) * (0.5 * g));
        m = (I + (m * (g * g) + mi * (1.0 / (g * g))) * 0.5) * 0.5;
        if (norm(m - I) < 1e-14) break;
    }
    return y;
}

// log(I + y) for small y via the atanh series of (X - I)(X + I)^{-1}.
namespace detail {
inline Mat3 log_near_identity(Mat3 const& x) {
    Mat3 const I = Mat3::identity();
    Mat3 const z = (x - I) * inverse(x + I);
    Mat3 const z2 = z * z;
    Mat3 term = z;
    Mat3 sum = z;
    for (int k = 1; k < 60; ++k) {
        term = term * z2;
        Mat3 const add = term * (1.0 / (2 * k + 1));
        sum += add;
        if (norm(add) < 1e-18 * (1.0 + norm(sum))) break;
    }
    return sum * 2.0;
}
}  // namespace detail

inline Mat3 logm(Mat3 const& x) {
    Mat3 const I = Mat3::identity();
    if (!std::isfinite(norm(x))) throw InvalidInput("logm: non-finite input");
    Mat3 r = x;
    int s = 0;
    while (norm(r - I) > 0.25) {
        if (s > 40) throw ConvergenceFailure("logm: square-root ladder did not reach identity");
        r = sqrtm(r);
        ++s;
    }
    return detail::log_near_identity(r) * std::ldexp(1.0, s);
}

// ---- structure constants ---------------------------------------------------

inline Mat3 const& S_matrix() {
    static Mat3 const s = Mat3::from_rows({{{0, 1, 0}, {-1, 0, 0}, {0, 0, 1}}});
    return s;
}

inline Mat3 const& S_inverse() {
    static Mat3 const s = Mat3::from_rows({{{0, -1, 0}, {1, 0, 0}, {0, 0, 1}}});
    return s;
}

inline Mat3 const& D_matrix() {
    static Mat3 const d = Mat3::diag(1.0, 1.0, -2.0);
    return d;
}

inline Mat3 kappa(cplx zeta) { return Mat3::diag(zeta, zeta, 1.0); }

inline Mat3 S_lambda(cplx lambda) {
    return Mat3::from_rows({{{0, kI * lambda, 0}, {-kI * lambda, 0, 0}, {0, 0, 1}}});
}

// ---- automorphisms ----------------------------------------------------------

inline Mat3 apply_sigma(Mat3 const& g) {
    Mat3 r = g;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            if ((i == 2) != (j == 2)) r(i, j) = -r(i, j);
    return r;
}

// g* = inverse transpose.  The conjugation is taken as S^{-1} g* S so that
// the block shapes below are exactly the i^j eigenspaces.
inline Mat3 apply_tau(Mat3 const& g) {
    Mat3 const gstar = transpose(inverse(g));
    return S_inverse() * gstar * S_matrix();
}

inline Mat3 apply_tau_alg(Mat3 const& x) { return -(S_inverse() * transpose(x) * S_matrix()); }

inline Mat3 real_conjugate(Mat3 const& x) { return -adjoint(x); }

// ---- eigenspaces -------------------------------------------------------------

// Reduce j mod 4 into {-1, 0, 1, 2}.
inline int eigen_index(int j) {
    int r = ((j % 4) + 4) % 4;
    return r == 3 ? -1 : r;
}

inline cplx i_power(int k) {
    switch (((k % 4) + 4) % 4) {
        case 0: return 1.0;
        case 1: return kI;
        case 2: return -1.0;
        default: return -kI;
    }
}

// No trace check; used internally where inputs are traceless by construction.
inline Mat3 project_eigenspace_unchecked(Mat3 const& x, int j) {
    Mat3 t = x;
    Mat3 acc = x;
    for (int m = 1; m < 4; ++m) {
        t = apply_tau_alg(t);
        acc += t * i_power(-j * m);
    }
    return acc * 0.25;
}

inline Mat3 project_eigenspace(Mat3 const& x, int j, Tolerances const& tol = {}) {
    if (std::abs(trace(x)) > tol.membership)
        throw InvalidInput("project_eigenspace: input is not traceless (|tr| = " +
                           std::to_string(std::abs(trace(x))) + ")");
    return project_eigenspace_unchecked(x, j);
}

inline double eigenspace_defect(Mat3 const& x, int j) {
    return norm(x - project_eigenspace_unchecked(x, j)) + std::abs(trace(x));
}

// ---- Iwasawa split of the g0 block ------------------------------------------

struct IwasawaG0 {
    Mat3 k;  // anti-Hermitian traceless, 2x2 block
    Mat3 b;  // upper triangular, real diagonal, 2x2 block
};

inline IwasawaG0 iwasawa_g0(Mat3 const& x, Tolerances const& tol = {}) {
    double outside = std::abs(x(0, 2)) + std::abs(x(1, 2)) + std::abs(x(2, 0)) + std::abs(x(2, 1)) +
                     std::abs(x(2, 2));
    if (outside > tol.membership) throw InvalidInput("iwasawa_g0: support outside the g0 block");
    if (std::abs(x(0, 0) + x(1, 1)) > tol.membership) throw InvalidInput("iwasawa_g0: block not traceless");
    IwasawaG0 r;
    double const im = 0.5 * (x(0, 0).imag() - x(1, 1).imag());
    r.k(0, 0) = cplx(0, im);
    r.k(1, 1) = cplx(0, -im);
    r.k(1, 0) = x(1, 0);
    r.k(0, 1) = -std::conj(x(1, 0));
    r.b(0, 0) = x(0, 0) - r.k(0, 0);
    r.b(1, 1) = x(1, 1) - r.k(1, 1);
    r.b(0, 1) = x(0, 1) + std::conj(x(1, 0));
    return r;
}

// QR-type split of a G0^C element (2x2 block, (3,3) entry 1 up to scale):
// g = u * b with u in SU(2)+1 and b upper triangular with positive diagonal.
struct GroupSplitG0 {
    Mat3 u;
    Mat3 b;
};

inline GroupSplitG0 qr_g0(Mat3 const& g) {
    // Gram-Schmidt on the two columns of the 2x2 block.
    std::array<cplx, 2> c0{g(0, 0), g(1, 0)}, c1{g(0, 1), g(1, 1)};
    double const n0 = std::sqrt(std::norm(c0[0]) + std::norm(c0[1]));
    if (!(n0 > 0)) throw InvalidInput("qr_g0: degenerate block");
    std::array<cplx, 2> q0{c0[0] / n0, c0[1] / n0};
    cplx const r01 = std::conj(q0[0]) * c1[0] + std::conj(q0[1]) * c1[1];
    std::array<cplx, 2> v{c1[0] - r01 * q0[0], c1[1] - r01 * q0[1]};
    double const n1 = std::sqrt(std::norm(v[0]) + std::norm(v[1]));
    if (!(n1 > 0)) throw InvalidInput("qr_g0: degenerate block");
    std::array<cplx, 2> q1{v[0] / n1, v[1] / n1};
    GroupSplitG0 r;
    r.u = Mat3::identity();
    r.u(0, 0) = q0[0];
    r.u(1, 0) = q0[1];
    r.u(0, 1) = q1[0];
    r.u(1, 1) = q1[1];
    r.b = inverse(r.u) * g;
    return r;
}

}  // namespace hsl
