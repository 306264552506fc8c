#include "gmorph/kernels.hpp"

#include <cmath>
#include <limits>

namespace gmorph {
namespace kernels {
namespace {

void s_vexp_shift(double* dst, const double* src, double shift,
                  std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double v = src[i] + shift;
        dst[i] = v < -708.0 ? 0.0 : std::exp(v);
    }
}

void s_vadd(double* acc, const double* src, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += src[i];
}

void s_axpy(double* acc, const double* src, double w, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) acc[i] += w * src[i];
}

double s_dot(const double* x, const double* y, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i] * y[i];
    return s;
}

double s_vmax(const double* x, std::size_t n) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        if (x[i] > m) m = x[i];
    return m;
}

double s_vsum(const double* x, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += x[i];
    return s;
}

void s_vscale(double* x, double s, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) x[i] *= s;
}

void s_vmul2s(double* dst, const double* x, const double* y, double s,
              std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) dst[i] = x[i] * y[i] * s;
}

void s_maxplus_row(double* val, std::int32_t* arg, const double* row,
                   double shift, std::int32_t row_index, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        double v = row[i] + shift;
        if (v > val[i]) {
            val[i] = v;
            arg[i] = row_index;
        }
    }
}

void s_adam_update(double* param, double* m, double* v, const double* g,
                   std::size_t n, double lr, double beta1, double beta2,
                   double eps, double bc1, double bc2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

const Ops& scalar_ops() {
    static const Ops table = {
        "scalar",    s_vexp_shift, s_vadd,   s_axpy,        s_dot,
        s_vmax,      s_vsum,       s_vscale, s_vmul2s,      s_maxplus_row,
        s_adam_update,
    };
    return table;
}

}  // namespace kernels
}  // namespace gmorph
