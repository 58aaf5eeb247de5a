// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays
//
// Deterministic random draws. Gaussians come from our own Box-Muller on top
// of mt19937_64 so that sequences are identical across standard libraries;
// std::normal_distribution is implementation-defined.

#pragma once

#include "mfcal/types.hpp"

#include <cstdint>
#include <random>

namespace mfcal {

// Splits one seed into decorrelated stream seeds (Monte-Carlo runs, noise vs
// signal draws, ...).
inline std::uint64_t split_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { // in (0, 1]
        const std::uint64_t r = engine_();
        return (static_cast<double>(r >> 11) + 1.0) * 0x1.0p-53;
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    // CN(0, var): real and imaginary parts are N(0, var/2) each.
    cplx circular_gaussian(double var) {
        const double s = std::sqrt(0.5 * var);
        const double re = s * gaussian();
        const double im = s * gaussian();
        return {re, im};
    }

    std::uint64_t raw() { return engine_(); }

  private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace mfcal
