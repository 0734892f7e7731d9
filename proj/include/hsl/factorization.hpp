#pragma once

#include <optional>
#include <sstream>

#include "loops.hpp"

namespace hsl {

struct AlgebraSplit {
    TwistedLoop e;  // real part, support on both sides
    TwistedLoop i;  // plus part, constant term in Lie(B)
};

namespace detail {

// Split assuming the twist holds; mode 0 is projected onto g0 first.
inline AlgebraSplit split_unchecked(TwistedLoop const& xi) {
    int const n = xi.modes_limit();
    AlgebraSplit s{TwistedLoop(n, xi.epsilon()), TwistedLoop(n, xi.epsilon())};
    for (int k = 1; k <= n; ++k) {
        Mat3 const rc = real_conjugate(xi[-k]);
        s.e.at(-k) = xi[-k];
        s.e.at(k) = rc;
        s.i.at(k) = xi[k] - rc;
    }
    Mat3 x0 = project_eigenspace_unchecked(xi[0], 0);
    // the g0 block sits in the upper 2x2; clear roundoff elsewhere
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            if (r == 2 || c == 2) x0(r, c) = 0;
    auto const kb = iwasawa_g0(x0, Tolerances{1e300});
    s.e.at(0) = kb.k;
    s.i.at(0) = kb.b;
    s.e.real = true;
    s.i.plus = true;
    return s;
}

}  // namespace detail

inline AlgebraSplit algebra_split(TwistedLoop const& xi, double tol = 1e-10) {
    double const scale = std::max(1.0, total_mass(xi));
    double const d = twist_defect(xi);
    if (d > tol * scale) {
        std::ostringstream os;
        os << "algebra_split: twist violated (projection defect " << d << ")";
        throw InvalidInput(os.str());
    }
    return detail::split_unchecked(xi);
}

struct FactorizationResult {
    TwistedLoop e_part;
    TwistedLoop i_part;
    double residual = 0;
    int iterations = 0;
    std::vector<double> residual_trace;
};

struct FactorizeOptions {
    double tol = 1e-11;
    int max_iterations = 50;
    double min_step = 1.0 / 64;
    double initial_step = 1.0;
    // Newton may start from a known approximate pair instead of (I, I).
    std::optional<TwistedLoop> e_guess;
    std::optional<TwistedLoop> i_guess;
};

namespace detail {

struct NewtonState {
    TwistedLoop e, i;
    double residual = 0;
    int iterations = 0;
    bool ok = false;
};

inline double sample_residual(std::vector<Mat3> const& ge, std::vector<Mat3> const& g, std::vector<Mat3> const& gi,
                              std::vector<Mat3>* r_out) {
    double res = 0;
    for (std::size_t m = 0; m < g.size(); ++m) {
        Mat3 const r = inverse(ge[m]) * g[m] * inverse(gi[m]);
        res = std::max(res, norm(r - Mat3::identity()));
        if (r_out) (*r_out)[m] = r;
    }
    return res;
}

inline void drop_negative_modes(TwistedLoop& l) {
    double extra = 0;
    for (int k = -l.modes_limit(); k < 0; ++k) {
        extra += norm(l[k]);
        l.at(k) = Mat3{};
    }
    l.tail_mass += extra;
}

inline NewtonState newton(TwistedLoop const& g, TwistedLoop e, TwistedLoop i, FactorizeOptions const& opt,
                          std::vector<double>& trace) {
    int const n = g.modes_limit();
    auto const& sm = sampler(n);
    auto const gs = sm.evaluate(g);
    NewtonState st;
    double prev = 1e300;
    int stall = 0;
    std::vector<Mat3> r(sm.size());
    for (int it = 0;; ++it) {
        auto const es = sm.evaluate(e);
        auto const is = sm.evaluate(i);
        double res;
        try {
            res = sample_residual(es, gs, is, &r);
        } catch (InvalidInput const&) {
            res = std::numeric_limits<double>::infinity();
        }
        trace.push_back(res);
        st.residual = res;
        st.iterations = it;
        if (!std::isfinite(res) || res > 1e3) return st;
        if (res < opt.tol) {
            st.ok = true;
            break;
        }
        if (res > prev && res > 100 * opt.tol) return st;
        stall = (res > 0.5 * prev) ? stall + 1 : 0;
        // truncation floor reached: further iterations only stir roundoff
        if (stall >= 2 && res < 1e-9) {
            st.ok = true;
            break;
        }
        if (it >= opt.max_iterations) return st;
        prev = res;
        std::vector<Mat3> lr(r.size());
        try {
            for (std::size_t m = 0; m < r.size(); ++m) lr[m] = logm(r[m]);
        } catch (std::exception const&) {
            return st;
        }
        auto delta = sm.interpolate(lr, g.epsilon());
        auto const sp = split_unchecked(delta);
        auto const de = sm.evaluate(sp.e);
        auto const di = sm.evaluate(sp.i);
        std::vector<Mat3> ne(r.size()), ni(r.size());
        for (std::size_t m = 0; m < r.size(); ++m) {
            ne[m] = es[m] * expm(de[m]);
            ni[m] = expm(di[m]) * is[m];
        }
        e = sm.interpolate(ne, g.epsilon());
        i = sm.interpolate(ni, g.epsilon());
        drop_negative_modes(i);
    }
    st.e = std::move(e);
    st.i = std::move(i);
    return st;
}

}  // namespace detail

// g = g_E g_I with g_E real and g_I plus, B-normalized at zeta = 0.
inline FactorizationResult iwasawa_factorize(TwistedLoop const& g, FactorizeOptions const& opt = {}) {
    int const n = g.modes_limit();
    {
        auto const s = sampler(n).evaluate(g);
        for (auto const& x : s)
            if (!(std::abs(det(x)) > 1e-12)) throw InvalidInput("iwasawa_factorize: loop not invertible on the circle");
    }
    FactorizationResult out;
    TwistedLoop e0 = opt.e_guess ? resize(*opt.e_guess, n) : TwistedLoop::identity(n);
    TwistedLoop i0 = opt.i_guess ? resize(*opt.i_guess, n) : TwistedLoop::identity(n);

    auto st = detail::newton(g, e0, i0, opt, out.residual_trace);
    int total = st.iterations;
    if (!st.ok) {
        // continuation along exp(t log g), halving the step on failure
        TwistedLoop const lg = log_loop(g);
        double t = 0, step = opt.initial_step / 2;
        TwistedLoop e = e0, i = i0;
        if (opt.e_guess || opt.i_guess) {
            // guesses are for the full target; restart the path from (I, I)
            e = TwistedLoop::identity(n);
            i = TwistedLoop::identity(n);
        }
        while (t < 1.0) {
            if (step < opt.min_step) {
                std::ostringstream os;
                os << "iwasawa_factorize: continuation stalled at t=" << t << "; residual trace:";
                for (double x : out.residual_trace) os << ' ' << x;
                throw ConvergenceFailure(os.str());
            }
            double const tn = std::min(1.0, t + step);
            TwistedLoop const target = tn >= 1.0 ? g : exp_loop(lg, tn);
            auto s2 = detail::newton(target, e, i, opt, out.residual_trace);
            total += s2.iterations;
            if (s2.ok) {
                t = tn;
                e = s2.e;
                i = s2.i;
                step *= 2;
            } else {
                step /= 2;
            }
        }
        st.e = e;
        st.i = i;
        st.ok = true;
    }

    // exact B-normalization of the constant term
    auto const qr = qr_g0(st.i[0]);
    Mat3 const ui = adjoint(qr.u);
    TwistedLoop i_part(n, g.epsilon()), e_part(n, g.epsilon());
    for (int k = -n; k <= n; ++k) {
        i_part.at(k) = ui * st.i[k];
        e_part.at(k) = st.e[k] * qr.u;
    }
    i_part.tail_mass = st.i.tail_mass;
    e_part.tail_mass = st.e.tail_mass;
    e_part.real = true;
    i_part.plus = true;

    auto const& sm = sampler(n);
    auto const es = sm.evaluate(e_part), is = sm.evaluate(i_part), gs = sm.evaluate(g);
    double res = 0;
    for (int m = 0; m < sm.size(); ++m) res = std::max(res, norm(es[m] * is[m] - gs[m]));
    out.e_part = std::move(e_part);
    out.i_part = std::move(i_part);
    out.residual = res;
    out.iterations = total;
    return out;
}

// How far the constant term of a plus loop is from B.
inline double b_normalization_defect(TwistedLoop const& g) {
    Mat3 const& c = g[0];
    double d = std::abs(c(1, 0)) + std::abs(c(0, 2)) + std::abs(c(1, 2)) + std::abs(c(2, 0)) + std::abs(c(2, 1)) +
               std::abs(c(2, 2) - 1.0) + std::abs(c(0, 0).imag()) + std::abs(c(1, 1).imag());
    if (c(0, 0).real() <= 0 || c(1, 1).real() <= 0) d += 1.0;
    return d;
}

}  // namespace hsl
