// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays
//
// Data-parallel inner-loop kernels. Scalar reference implementations plus an
// AVX2/FMA variant selected at runtime; both must agree to rounding noise
// (see tests/test_kernels.cpp). The environment variable MFCAL_KERNELS
// ("scalar" or "avx2") overrides the automatic pick.

#pragma once

#include "mfcal/types.hpp"

#include <cstddef>
#include <span>

namespace mfcal::kernels {

enum class Backend { Scalar, Avx2 };

const char *name(Backend b);

// Backend currently in use for all kernel calls.
Backend active();

// Best backend this CPU supports.
Backend best_supported();

// Force a backend. Returns false (and leaves the selection unchanged) when
// the CPU cannot run it.
bool set_backend(Backend b);

// sum_i x_i * y_i  (unconjugated)
cplx cdotu(std::span<const cplx> x, std::span<const cplx> y);

// sum_i conj(x_i) * y_i
cplx cdotc(std::span<const cplx> x, std::span<const cplx> y);

// y += a * x
void axpy(cplx a, std::span<const cplx> x, std::span<cplx> y);

// out_i = x_i * y_i
void hadamard(std::span<const cplx> x, std::span<const cplx> y, std::span<cplx> out);

// out_i = x_i * w_i with a real weight vector
void scale_real(std::span<const cplx> x, std::span<const double> w, std::span<cplx> out);

// sum_i |x_i|^2
double sumsq(std::span<const cplx> x);

// sum_i x_i * y_i for real vectors
double rdot(std::span<const double> x, std::span<const double> y);

// r += x x^H for row-major r of size n x n
void rank1_herm_update(std::size_t n, const cplx *x, cplx *r);

} // namespace mfcal::kernels
