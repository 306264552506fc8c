#include "gmorph/kernels.hpp"

#ifdef GMORPH_BUILD_AVX2

#include <immintrin.h>

#include <cmath>
#include <limits>

namespace gmorph {
namespace kernels {
namespace {

// Polynomial exp over the reduced range |r| <= ln2/2, Cephes coefficients.
// Relative error is within a couple of ulp, which the equivalence tests pin.
const double kExpP0 = 1.26177193074810590878e-4;
const double kExpP1 = 3.02994407707441961300e-2;
const double kExpP2 = 9.99999999999999999910e-1;
const double kExpQ0 = 3.00198505138664455042e-6;
const double kExpQ1 = 2.52448340349684104192e-3;
const double kExpQ2 = 2.27265548208155028766e-1;
const double kExpQ3 = 2.00000000000000000005e0;
const double kLog2E = 1.4426950408889634073599;
const double kLn2Hi = 6.93145751953125e-1;
const double kLn2Lo = 1.42860682030941723212e-6;

inline __m256d exp4(__m256d x) {
    const __m256d underflow = _mm256_set1_pd(-708.0);
    __m256d zero_mask = _mm256_cmp_pd(x, underflow, _CMP_LT_OQ);
    x = _mm256_max_pd(x, underflow);
    x = _mm256_min_pd(x, _mm256_set1_pd(709.7));

    __m256d n = _mm256_round_pd(
        _mm256_mul_pd(x, _mm256_set1_pd(kLog2E)),
        _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    // r = x - n*ln2, split for accuracy
    __m256d r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Hi), x);
    r = _mm256_fnmadd_pd(n, _mm256_set1_pd(kLn2Lo), r);

    __m256d rr = _mm256_mul_pd(r, r);
    __m256d p = _mm256_set1_pd(kExpP0);
    p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(kExpP1));
    p = _mm256_fmadd_pd(p, rr, _mm256_set1_pd(kExpP2));
    p = _mm256_mul_pd(p, r);
    __m256d q = _mm256_set1_pd(kExpQ0);
    q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(kExpQ1));
    q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(kExpQ2));
    q = _mm256_fmadd_pd(q, rr, _mm256_set1_pd(kExpQ3));
    // exp(r) = 1 + 2p/(q - p)
    __m256d e = _mm256_div_pd(p, _mm256_sub_pd(q, p));
    e = _mm256_fmadd_pd(e, _mm256_set1_pd(2.0), _mm256_set1_pd(1.0));

    // scale by 2^n via the exponent field
    __m128i n32 = _mm256_cvtpd_epi32(n);
    __m256i n64 = _mm256_cvtepi32_epi64(n32);
    n64 = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
    n64 = _mm256_slli_epi64(n64, 52);
    e = _mm256_mul_pd(e, _mm256_castsi256_pd(n64));

    return _mm256_andnot_pd(zero_mask, e);
}

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(lo) + _mm_cvtsd_f64(_mm_unpackhi_pd(lo, lo));
}

void a_vexp_shift(double* dst, const double* src, double shift,
                  std::size_t n) {
    const __m256d sh = _mm256_set1_pd(shift);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_add_pd(_mm256_loadu_pd(src + i), sh);
        _mm256_storeu_pd(dst + i, exp4(v));
    }
    for (; i < n; ++i) {
        double v = src[i] + shift;
        dst[i] = v < -708.0 ? 0.0 : std::exp(v);
    }
}

void a_vadd(double* acc, const double* src, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d a = _mm256_loadu_pd(acc + i);
        a = _mm256_add_pd(a, _mm256_loadu_pd(src + i));
        _mm256_storeu_pd(acc + i, a);
    }
    for (; i < n; ++i) acc[i] += src[i];
}

void a_axpy(double* acc, const double* src, double w, std::size_t n) {
    const __m256d wv = _mm256_set1_pd(w);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d a = _mm256_loadu_pd(acc + i);
        a = _mm256_fmadd_pd(wv, _mm256_loadu_pd(src + i), a);
        _mm256_storeu_pd(acc + i, a);
    }
    for (; i < n; ++i) acc[i] += w * src[i];
}

double a_dot(const double* x, const double* y, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i),
                              acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i] * y[i];
    return s;
}

double a_vmax(const double* x, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    if (n >= 4) {
        __m256d mv = _mm256_loadu_pd(x);
        for (i = 4; i + 4 <= n; i += 4)
            mv = _mm256_max_pd(mv, _mm256_loadu_pd(x + i));
        __m128d lo = _mm_max_pd(_mm256_castpd256_pd128(mv),
                                _mm256_extractf128_pd(mv, 1));
        m = _mm_cvtsd_f64(_mm_max_sd(lo, _mm_unpackhi_pd(lo, lo)));
    }
    for (; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

double a_vsum(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

void a_vscale(double* x, double s, std::size_t n) {
    const __m256d sv = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), sv));
    for (; i < n; ++i) x[i] *= s;
}

void a_vmul2s(double* dst, const double* x, const double* y, double s,
              std::size_t n) {
    const __m256d sv = _mm256_set1_pd(s);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_mul_pd(_mm256_loadu_pd(x + i),
                                  _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(dst + i, _mm256_mul_pd(v, sv));
    }
    for (; i < n; ++i) dst[i] = x[i] * y[i] * s;
}

void a_maxplus_row(double* val, std::int32_t* arg, const double* row,
                   double shift, std::int32_t row_index, std::size_t n) {
    const __m256d sh = _mm256_set1_pd(shift);
    const __m128i idx = _mm_set1_epi32(row_index);
    // lane k of the pd compare mask -> 32-bit lane k after this permute
    const __m256i pack = _mm256_setr_epi32(0, 2, 4, 6, 0, 0, 0, 0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_add_pd(_mm256_loadu_pd(row + i), sh);
        __m256d old = _mm256_loadu_pd(val + i);
        __m256d gt = _mm256_cmp_pd(v, old, _CMP_GT_OQ);
        _mm256_storeu_pd(val + i, _mm256_blendv_pd(old, v, gt));
        __m256i gt32 = _mm256_permutevar8x32_epi32(_mm256_castpd_si256(gt),
                                                   pack);
        __m128i m = _mm256_castsi256_si128(gt32);
        __m128i a = _mm_loadu_si128(reinterpret_cast<__m128i*>(arg + i));
        _mm_storeu_si128(reinterpret_cast<__m128i*>(arg + i),
                         _mm_blendv_epi8(a, idx, m));
    }
    for (; i < n; ++i) {
        double v = row[i] + shift;
        if (v > val[i]) {
            val[i] = v;
            arg[i] = row_index;
        }
    }
}

void a_adam_update(double* param, double* m, double* v, const double* g,
                   std::size_t n, double lr, double beta1, double beta2,
                   double eps, double bc1, double bc2) {
    const __m256d b1 = _mm256_set1_pd(beta1);
    const __m256d b2 = _mm256_set1_pd(beta2);
    const __m256d ob1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d ob2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d lrv = _mm256_set1_pd(lr);
    const __m256d epsv = _mm256_set1_pd(eps);
    const __m256d ibc1 = _mm256_set1_pd(1.0 / bc1);
    const __m256d ibc2 = _mm256_set1_pd(1.0 / bc2);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d gv = _mm256_loadu_pd(g + i);
        __m256d mv = _mm256_loadu_pd(m + i);
        __m256d vv = _mm256_loadu_pd(v + i);
        mv = _mm256_add_pd(_mm256_mul_pd(b1, mv), _mm256_mul_pd(ob1, gv));
        vv = _mm256_add_pd(_mm256_mul_pd(b2, vv),
                           _mm256_mul_pd(ob2, _mm256_mul_pd(gv, gv)));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
        __m256d mhat = _mm256_mul_pd(mv, ibc1);
        __m256d vhat = _mm256_mul_pd(vv, ibc2);
        __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
        __m256d p = _mm256_loadu_pd(param + i);
        p = _mm256_sub_pd(p, _mm256_div_pd(_mm256_mul_pd(lrv, mhat), denom));
        _mm256_storeu_pd(param + i, p);
    }
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        double mhat = m[i] * (1.0 / bc1);
        double vhat = v[i] * (1.0 / bc2);
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

const Ops kAvx2Ops = {
    "avx2",  a_vexp_shift, a_vadd,   a_axpy,   a_dot,         a_vmax,
    a_vsum,  a_vscale,     a_vmul2s, a_maxplus_row, a_adam_update,
};

}  // namespace

const Ops* avx2_ops_impl() { return &kAvx2Ops; }

}  // namespace kernels
}  // namespace gmorph

#else  // !GMORPH_BUILD_AVX2

namespace gmorph {
namespace kernels {

const Ops* avx2_ops_impl() { return nullptr; }

}  // namespace kernels
}  // namespace gmorph

#endif
