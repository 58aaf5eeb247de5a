// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays
//
// Smooth-frequency coherence models. Per-wavelength gains are linear
// combinations of low-order basis functions of wavelength; the combination
// coefficients (one block per sensor or per source) are the consensus
// variables shared across the agent network.

#pragma once

#include "mfcal/types.hpp"

namespace mfcal {

enum class BasisKind {
    FreqPoly,        // b_k = ((f - f0)/f0)^(k-1), f = c/lambda
    WavelengthPower, // b_k = (lambda/lambda0)^(k-1), lambda0 = c/f0
};

struct BasisConfig {
    int order_gain = 3;  // K_g
    int order_dir = 3;   // K_m
    double f0 = 30.0e6;  // reference frequency, Hz
    BasisKind gain_kind = BasisKind::FreqPoly;
    BasisKind dir_kind = BasisKind::WavelengthPower;
};

// One row of the coherence model: [b_1, ..., b_K] at this wavelength.
// b_1 is always 1 (0^0 := 1 for the constant term).
rvec basis_vector(double lambda, int order, BasisKind kind, double f0);

// g_lambda: entry p is b^T alpha_p, with alpha stored as P consecutive
// blocks of length order_gain.
cvec project_gains(const cvec &alpha, double lambda, const BasisConfig &cfg);

// m_lambda: entry q is b_m^T alpha_{m_q}, alpha_m stored as Q blocks of
// length order_dir.
rvec project_directional(const rvec &alpha_m, double lambda, const BasisConfig &cfg);

// J x K matrix with row j = basis_vector(lambdas[j]).
RMat stack_basis(const rvec &lambdas, int order, BasisKind kind, double f0);

inline RMat stack_gain_basis(const rvec &lambdas, const BasisConfig &cfg) {
    return stack_basis(lambdas, cfg.order_gain, cfg.gain_kind, cfg.f0);
}
inline RMat stack_dir_basis(const rvec &lambdas, const BasisConfig &cfg) {
    return stack_basis(lambdas, cfg.order_dir, cfg.dir_kind, cfg.f0);
}

} // namespace mfcal
