// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays

#include "mfcal/coherence.hpp"
#include "mfcal/kernels.hpp"

namespace mfcal {

rvec basis_vector(double lambda, int order, BasisKind kind, double f0) {
    if (lambda <= 0.0)
        throw std::invalid_argument("basis_vector: wavelength must be positive");
    if (order < 1)
        throw std::invalid_argument("basis_vector: order must be >= 1");
    double base = 0.0;
    switch (kind) {
    case BasisKind::FreqPoly:
        base = (kSpeedOfLight / lambda - f0) / f0;
        break;
    case BasisKind::WavelengthPower:
        base = lambda / (kSpeedOfLight / f0);
        break;
    }
    rvec b(static_cast<std::size_t>(order));
    b[0] = 1.0; // 0^0 := 1
    for (int k = 1; k < order; ++k)
        b[static_cast<std::size_t>(k)] = b[static_cast<std::size_t>(k - 1)] * base;
    return b;
}

cvec project_gains(const cvec &alpha, double lambda, const BasisConfig &cfg) {
    const auto k = static_cast<std::size_t>(cfg.order_gain);
    if (k == 0 || alpha.size() % k != 0)
        throw std::invalid_argument("project_gains: alpha length not a multiple of K_g");
    const rvec b = basis_vector(lambda, cfg.order_gain, cfg.gain_kind, cfg.f0);
    const std::size_t p = alpha.size() / k;
    cvec g(p);
    for (std::size_t i = 0; i < p; ++i) {
        cplx acc{};
        for (std::size_t j = 0; j < k; ++j)
            acc += b[j] * alpha[i * k + j];
        g[i] = acc;
    }
    return g;
}

rvec project_directional(const rvec &alpha_m, double lambda, const BasisConfig &cfg) {
    const auto k = static_cast<std::size_t>(cfg.order_dir);
    if (k == 0 || alpha_m.size() % k != 0)
        throw std::invalid_argument("project_directional: alpha length not a multiple of K_m");
    const rvec b = basis_vector(lambda, cfg.order_dir, cfg.dir_kind, cfg.f0);
    const std::size_t q = alpha_m.size() / k;
    rvec m(q);
    for (std::size_t i = 0; i < q; ++i)
        m[i] = kernels::rdot(b, std::span<const double>{alpha_m.data() + i * k, k});
    return m;
}

RMat stack_basis(const rvec &lambdas, int order, BasisKind kind, double f0) {
    if (lambdas.empty())
        throw std::invalid_argument("stack_basis: wavelength set is empty");
    RMat b(lambdas.size(), static_cast<std::size_t>(order));
    for (std::size_t j = 0; j < lambdas.size(); ++j) {
        const rvec row = basis_vector(lambdas[j], order, kind, f0);
        for (std::size_t k = 0; k < row.size(); ++k)
            b(j, k) = row[k];
    }
    return b;
}

} // namespace mfcal
