#ifndef GMORPH_KERNELS_HPP
#define GMORPH_KERNELS_HPP

#include <cstddef>
#include <cstdint>

namespace gmorph {
namespace kernels {

// Double-precision vector kernels used by the inference and training inner
// loops. Each entry has a scalar reference implementation and, on machines
// that support it, an AVX2 variant chosen once at startup. The two variants
// are equivalence-tested against each other; the scalar path is the
// semantic reference.
//
// Input conventions: arrays may alias only where noted, sizes are in
// elements, and -inf is a legal value wherever a log-domain zero can occur.
// NaN inputs are not supported.
struct Ops {
    const char* name;

    // dst[i] = exp(src[i] + shift). Accurate for src+shift in [-700, 709];
    // values below -708 flush to zero (they represent log-domain zeros).
    void (*vexp_shift)(double* dst, const double* src, double shift,
                       std::size_t n);

    // acc[i] += src[i]
    void (*vadd)(double* acc, const double* src, std::size_t n);

    // acc[i] += w * src[i]
    void (*axpy)(double* acc, const double* src, double w, std::size_t n);

    // sum_i x[i] * y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);

    // max_i x[i]; -inf for n = 0
    double (*vmax)(const double* x, std::size_t n);

    // sum_i x[i]
    double (*vsum)(const double* x, std::size_t n);

    // x[i] *= s
    void (*vscale)(double* x, double s, std::size_t n);

    // dst[i] = x[i] * y[i] * s
    void (*vmul2s)(double* dst, const double* x, const double* y, double s,
                   std::size_t n);

    // Max-plus row update with back-pointers:
    //   v = row[i] + shift; if (v > val[i]) { val[i] = v; arg[i] = row_index; }
    // Strict > keeps the lowest row_index on ties when rows are swept in
    // ascending order.
    void (*maxplus_row)(double* val, std::int32_t* arg, const double* row,
                        double shift, std::int32_t row_index, std::size_t n);

    // In-place Adam update over a flat parameter buffer. bc1/bc2 are the
    // bias-correction denominators 1 - beta^t for the current step.
    void (*adam_update)(double* param, double* m, double* v, const double* g,
                        std::size_t n, double lr, double beta1, double beta2,
                        double eps, double bc1, double bc2);
};

// Runtime-selected implementation. Honors GMORPH_KERNELS=scalar|avx2.
const Ops& ops();

// Always-available reference implementation.
const Ops& scalar_ops();

// AVX2 implementation, or nullptr when the CPU (or build) lacks support.
const Ops* avx2_ops();

}  // namespace kernels
}  // namespace gmorph

#endif  // GMORPH_KERNELS_HPP
