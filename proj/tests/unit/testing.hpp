#pragma once

#include <random>

#include <gtest/gtest.h>

#include <hsl/fixtures.hpp>

namespace hsl::testing {

inline Mat3 random_mat(std::mt19937_64& rng, double scale = 1.0) {
    std::normal_distribution<double> nd;
    Mat3 m;
    for (auto& e : m.data()) e = cplx(nd(rng), nd(rng)) * scale;
    return m;
}

inline Mat3 random_traceless(std::mt19937_64& rng, double scale = 1.0) {
    Mat3 m = random_mat(rng, scale);
    return m - Mat3::identity() * (trace(m) / 3.0);
}

inline Mat3 random_anti_hermitian(std::mt19937_64& rng) {
    Mat3 m = random_traceless(rng);
    return (m - adjoint(m)) * 0.5;
}

// random twisted algebra loop on modes -top..top
inline TwistedLoop random_twisted(std::mt19937_64& rng, int n, int top, double scale = 0.1) {
    TwistedLoop xi(n);
    for (int k = -top; k <= top; ++k) xi.at(k) = project_eigenspace_unchecked(random_traceless(rng), k) * scale;
    return xi;
}

// SU(2) + 1 element
inline Mat3 random_g0(std::mt19937_64& rng) {
    Mat3 x = project_eigenspace_unchecked(random_anti_hermitian(rng), 0);
    return expm(x);
}

}  // namespace hsl::testing
