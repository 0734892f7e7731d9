#pragma once

#include <Eigen/Dense>

#include "genus0.hpp"

namespace hsl {

using CVec = Eigen::VectorXcd;
using CMat = Eigen::MatrixXcd;

// Symmetric g x g matrix with positive definite imaginary part.
class PeriodMatrix {
public:
    PeriodMatrix() = default;
    explicit PeriodMatrix(CMat omega) : omega_(std::move(omega)) {
        if (omega_.rows() != omega_.cols()) throw InvalidInput("PeriodMatrix: not square");
        int const g = static_cast<int>(omega_.rows());
        if (g == 0) return;
        double const sc = std::max(1.0, omega_.cwiseAbs().maxCoeff());
        if ((omega_ - omega_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * sc)
            throw InvalidInput("PeriodMatrix: not symmetric");
        Eigen::MatrixXd const y = omega_.imag();
        Eigen::LLT<Eigen::MatrixXd> llt(y);
        if (llt.info() != Eigen::Success) throw InvalidInput("PeriodMatrix: imaginary part not positive definite");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(y, Eigen::EigenvaluesOnly);
        lambda_min_ = es.eigenvalues()(0);
        if (!(lambda_min_ > 0)) throw InvalidInput("PeriodMatrix: imaginary part not positive definite");
        y_inv_ = llt.solve(Eigen::MatrixXd::Identity(g, g));
    }

    int genus() const { return static_cast<int>(omega_.rows()); }
    CMat const& omega() const { return omega_; }
    Eigen::MatrixXd const& im_inverse() const { return y_inv_; }
    double lambda_min() const { return lambda_min_; }

private:
    CMat omega_;
    Eigen::MatrixXd y_inv_;
    double lambda_min_ = 0;
};

struct ThetaOptions {
    // exp(-pi R^2) bounds the dropped terms relative to the largest one
    double pi_r2 = 40.0;
};

// Sum over n in Z^g of exp(pi i n.Omega.n + 2 pi i n.W).  Terms have modulus
// exp(-pi (n-c).Y.(n-c)) up to a common factor, c = -Y^{-1} Im W, so the sum
// runs over the ellipsoid (n-c).Y.(n-c) <= R^2, enumerated inside the box
// |n_i - c_i| <= R / sqrt(lambda_min(Y)).
inline cplx theta(CVec const& W, PeriodMatrix const& P, ThetaOptions const& opt = {}) {
    int const g = P.genus();
    if (W.size() != g) throw InvalidInput("theta: argument dimension does not match the period matrix");
    if (g == 0) return 1.0;
    CMat const& om = P.omega();
    Eigen::MatrixXd const y = om.imag();
    Eigen::VectorXd const c = -P.im_inverse() * W.imag();
    double const r2 = opt.pi_r2 / kPi;
    double const half = std::sqrt(r2 / P.lambda_min());
    std::vector<int> lo(g), hi(g);
    for (int k = 0; k < g; ++k) {
        lo[k] = static_cast<int>(std::ceil(c(k) - half));
        hi[k] = static_cast<int>(std::floor(c(k) + half));
    }
    std::vector<int> n(lo);
    Eigen::VectorXd nv(g);
    cplx sum = 0;
    for (;;) {
        for (int k = 0; k < g; ++k) nv(k) = n[k];
        Eigen::VectorXd const d = nv - c;
        if (d.dot(y * d) <= r2) {
            Eigen::VectorXcd const nc = nv.cast<cplx>();
            cplx const q = nc.dot(om * nc);  // dot conjugates the first argument, nc is real
            cplx const l = nc.dot(W);
            sum += std::exp(kI * kPi * q + 2.0 * kPi * kI * l);
        }
        int k = 0;
        while (k < g && ++n[k] > hi[k]) {
            n[k] = lo[k];
            ++k;
        }
        if (k == g) break;
    }
    return sum;
}

// Spectral data for the reconstruction map.  For g = 0 the vectors are
// empty, Theta = 1, and U holds the two extra coordinates only.
struct ReconstructionData {
    int g = 0;
    PeriodMatrix omega;
    CVec abel_shift2, abel_shift3;
    CVec kappa;
    cplx c0{1.0}, c1{1.0}, c2{1.0};
    CVec U;  // size g + 2

    void validate() const {
        if (g < 0) throw InvalidInput("ReconstructionData: negative genus");
        if (omega.genus() != g) throw InvalidInput("ReconstructionData: period matrix has the wrong size");
        if (abel_shift2.size() != g || abel_shift3.size() != g || kappa.size() != g)
            throw InvalidInput("ReconstructionData: vector of the wrong size");
        if (U.size() != g + 2) throw InvalidInput("ReconstructionData: U must have g+2 entries");
        if (c0 == cplx{} || c1 == cplx{} || c2 == cplx{})
            throw InvalidInput("ReconstructionData: constants c_j must be nonzero");
    }
};

inline ReconstructionData reconstruction_from_genus0(Genus0Data const& d) {
    ReconstructionData r;
    r.g = 0;
    r.omega = PeriodMatrix(CMat(0, 0));
    r.abel_shift2 = r.abel_shift3 = r.kappa = CVec(0);
    r.c0 = 1.0;
    r.c1 = d.c1;
    r.c2 = d.c2;
    r.U = CVec(2);
    r.U << d.U[0], d.U[1];
    return r;
}

struct Phi {
    cplx phi0, phi1, phi2;
};

inline Phi phi_sections(CVec const& Wt, ReconstructionData const& d, ThetaOptions const& opt = {}) {
    int const g = d.g;
    if (Wt.size() != g + 2) throw InvalidInput("phi_sections: argument must have g+2 entries");
    CVec const W = Wt.head(g);
    return {theta(W, d.omega, opt), std::exp(2.0 * kPi * kI * Wt(g)) * theta(W + d.abel_shift2, d.omega, opt),
            std::exp(2.0 * kPi * kI * Wt(g + 1)) * theta(W + d.abel_shift3, d.omega, opt)};
}

inline Vec3 theta_map(CVec const& Wt, ReconstructionData const& d, ThetaOptions const& opt = {}) {
    d.validate();
    CVec shifted = Wt;
    shifted.head(d.g) += d.kappa;
    auto const p = phi_sections(shifted, d, opt);
    Vec3 z{d.c0 * p.phi0, d.c1 * p.phi1, d.c2 * p.phi2};
    double const n = vnorm(z);
    if (std::abs(z[0]) < 1e-12 * n || !std::isfinite(n))
        throw InvalidInput("theta_map: argument lies on the theta divisor");
    return z * (1.0 / n);
}

// w U + conj(w) conj(U), real in every slot
inline CVec flow_line(ReconstructionData const& d, cplx w) {
    CVec r(d.U.size());
    for (Eigen::Index k = 0; k < d.U.size(); ++k) r(k) = 2.0 * (w * d.U(k)).real();
    return r;
}

}  // namespace hsl
