// SPDX-License-Identifier: Apache-2.0
//
// mfcal: distributed multi-frequency calibration for sensor arrays
//
// Kernel dispatch. The backend is picked once (CPU probe, overridable via
// MFCAL_KERNELS or set_backend) and routed through a function table so the
// arithmetic path is fixed for the lifetime of the process unless a test
// swaps it explicitly.

#include "kernels_impl.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace mfcal::kernels {

namespace {

struct Table {
    cplx (*cdotu)(std::span<const cplx>, std::span<const cplx>);
    cplx (*cdotc)(std::span<const cplx>, std::span<const cplx>);
    void (*axpy)(cplx, std::span<const cplx>, std::span<cplx>);
    void (*hadamard)(std::span<const cplx>, std::span<const cplx>, std::span<cplx>);
    void (*scale_real)(std::span<const cplx>, std::span<const double>, std::span<cplx>);
    double (*sumsq)(std::span<const cplx>);
    double (*rdot)(std::span<const double>, std::span<const double>);
    void (*rank1_herm_update)(std::size_t, const cplx *, cplx *);
};

constexpr Table kScalarTable = {
    &scalar::cdotu,    &scalar::cdotc, &scalar::axpy, &scalar::hadamard,
    &scalar::scale_real, &scalar::sumsq, &scalar::rdot, &scalar::rank1_herm_update,
};

#if defined(MFCAL_HAVE_AVX2_BUILD)
constexpr Table kAvx2Table = {
    &avx2::cdotu,    &avx2::cdotc, &avx2::axpy, &avx2::hadamard,
    &avx2::scale_real, &avx2::sumsq, &avx2::rdot, &avx2::rank1_herm_update,
};
#endif

bool cpu_has_avx2() {
#if defined(MFCAL_HAVE_AVX2_BUILD)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Table *table_for(Backend b) {
#if defined(MFCAL_HAVE_AVX2_BUILD)
    if (b == Backend::Avx2)
        return &kAvx2Table;
#endif
    (void)b;
    return &kScalarTable;
}

struct State {
    std::atomic<const Table *> table;
    std::atomic<Backend> backend;

    State() {
        Backend b = cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar;
        if (const char *env = std::getenv("MFCAL_KERNELS")) {
            if (std::strcmp(env, "scalar") == 0)
                b = Backend::Scalar;
            else if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2())
                b = Backend::Avx2;
        }
        backend.store(b);
        table.store(table_for(b));
    }
};

State &state() {
    static State s;
    return s;
}

} // namespace

const char *name(Backend b) { return b == Backend::Avx2 ? "avx2" : "scalar"; }

Backend active() { return state().backend.load(); }

Backend best_supported() { return cpu_has_avx2() ? Backend::Avx2 : Backend::Scalar; }

bool set_backend(Backend b) {
    if (b == Backend::Avx2 && !cpu_has_avx2())
        return false;
    state().backend.store(b);
    state().table.store(table_for(b));
    return true;
}

cplx cdotu(std::span<const cplx> x, std::span<const cplx> y) {
    return state().table.load()->cdotu(x, y);
}
cplx cdotc(std::span<const cplx> x, std::span<const cplx> y) {
    return state().table.load()->cdotc(x, y);
}
void axpy(cplx a, std::span<const cplx> x, std::span<cplx> y) {
    state().table.load()->axpy(a, x, y);
}
void hadamard(std::span<const cplx> x, std::span<const cplx> y, std::span<cplx> out) {
    state().table.load()->hadamard(x, y, out);
}
void scale_real(std::span<const cplx> x, std::span<const double> w, std::span<cplx> out) {
    state().table.load()->scale_real(x, w, out);
}
double sumsq(std::span<const cplx> x) { return state().table.load()->sumsq(x); }
double rdot(std::span<const double> x, std::span<const double> y) {
    return state().table.load()->rdot(x, y);
}
void rank1_herm_update(std::size_t n, const cplx *x, cplx *r) {
    state().table.load()->rank1_herm_update(n, x, r);
}

} // namespace mfcal::kernels
