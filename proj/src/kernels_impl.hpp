// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays
//
// Internal: per-backend kernel entry points used by the dispatcher.

#pragma once

#include "mfcal/kernels.hpp"

namespace mfcal::kernels {

#define MFCAL_KERNEL_DECLS                                                                         \
    cplx cdotu(std::span<const cplx> x, std::span<const cplx> y);                                  \
    cplx cdotc(std::span<const cplx> x, std::span<const cplx> y);                                  \
    void axpy(cplx a, std::span<const cplx> x, std::span<cplx> y);                                 \
    void hadamard(std::span<const cplx> x, std::span<const cplx> y, std::span<cplx> out);          \
    void scale_real(std::span<const cplx> x, std::span<const double> w, std::span<cplx> out);      \
    double sumsq(std::span<const cplx> x);                                                         \
    double rdot(std::span<const double> x, std::span<const double> y);                             \
    void rank1_herm_update(std::size_t n, const cplx *x, cplx *r);

namespace scalar {
MFCAL_KERNEL_DECLS
}

#if defined(__x86_64__) || defined(_M_X64)
#define MFCAL_HAVE_AVX2_BUILD 1
namespace avx2 {
MFCAL_KERNEL_DECLS
}
#endif

#undef MFCAL_KERNEL_DECLS

} // namespace mfcal::kernels
