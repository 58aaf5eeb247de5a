// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays
//
// Scalar reference kernels. These are the semantics the SIMD variants are
// tested against; keep them obvious.

#include "kernels_impl.hpp"

namespace mfcal::kernels::scalar {

cplx cdotu(std::span<const cplx> x, std::span<const cplx> y) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const cplx p = x[i] * y[i];
        re += p.real();
        im += p.imag();
    }
    return {re, im};
}

cplx cdotc(std::span<const cplx> x, std::span<const cplx> y) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const cplx p = std::conj(x[i]) * y[i];
        re += p.real();
        im += p.imag();
    }
    return {re, im};
}

void axpy(cplx a, std::span<const cplx> x, std::span<cplx> y) {
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] += a * x[i];
}

void hadamard(std::span<const cplx> x, std::span<const cplx> y, std::span<cplx> out) {
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = x[i] * y[i];
}

void scale_real(std::span<const cplx> x, std::span<const double> w, std::span<cplx> out) {
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = x[i] * w[i];
}

double sumsq(std::span<const cplx> x) {
    double acc = 0.0;
    for (const cplx &v : x)
        acc += v.real() * v.real() + v.imag() * v.imag();
    return acc;
}

double rdot(std::span<const double> x, std::span<const double> y) {
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        acc += x[i] * y[i];
    return acc;
}

void rank1_herm_update(std::size_t n, const cplx *x, cplx *r) {
    for (std::size_t i = 0; i < n; ++i) {
        const cplx xi = x[i];
        cplx *row = r + i * n;
        for (std::size_t j = 0; j < n; ++j)
            row[j] += xi * std::conj(x[j]);
    }
}

} // namespace mfcal::kernels::scalar
