// Compiled with -mavx2 (no FMA) only on x86-64; see src/CMakeLists.txt.

#include "pnpdm/kernels.hpp"

#include <immintrin.h>

namespace pnpdm::kernels {
namespace {

inline double horizontal_sum(__m256d acc) {
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

void axpby(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a), vb = _mm256_set1_pd(b);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d r = _mm256_add_pd(_mm256_mul_pd(va, _mm256_loadu_pd(x + i)),
                                        _mm256_mul_pd(vb, _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(out + i, r);
    }
    for (; i < n; ++i)
        out[i] = a * x[i] + b * y[i];
}

void axpbypcz(double a, const double* x, double b, const double* y, double c, const double* z, double* out,
              std::size_t n) {
    const __m256d va = _mm256_set1_pd(a), vb = _mm256_set1_pd(b), vc = _mm256_set1_pd(c);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d ab = _mm256_add_pd(_mm256_mul_pd(va, _mm256_loadu_pd(x + i)),
                                         _mm256_mul_pd(vb, _mm256_loadu_pd(y + i)));
        _mm256_storeu_pd(out + i, _mm256_add_pd(ab, _mm256_mul_pd(vc, _mm256_loadu_pd(z + i))));
    }
    for (; i < n; ++i)
        out[i] = (a * x[i] + b * y[i]) + c * z[i];
}

void diag_score(const double* x, const double* mean, const double* var, double sigma2, double* out,
                std::size_t n) {
    const __m256d vs = _mm256_set1_pd(sigma2);
    const __m256d sign = _mm256_set1_pd(-0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(mean + i));
        const __m256d q = _mm256_div_pd(d, _mm256_add_pd(_mm256_loadu_pd(var + i), vs));
        _mm256_storeu_pd(out + i, _mm256_xor_pd(q, sign));
    }
    for (; i < n; ++i)
        out[i] = -((x[i] - mean[i]) / (var[i] + sigma2));
}

void accumulate_diag_score(const double* x, const double* mean, const double* var, double sigma2, double gamma,
                           double* out, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(sigma2), vg = _mm256_set1_pd(gamma);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(mean + i));
        const __m256d q = _mm256_div_pd(d, _mm256_add_pd(_mm256_loadu_pd(var + i), vs));
        _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(out + i), _mm256_mul_pd(vg, q)));
    }
    for (; i < n; ++i)
        out[i] = out[i] - gamma * ((x[i] - mean[i]) / (var[i] + sigma2));
}

double weighted_sq_dist(const double* x, const double* mean, const double* var, double sigma2, std::size_t n) {
    const __m256d vs = _mm256_set1_pd(sigma2);
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(mean + i));
        const __m256d t = _mm256_div_pd(_mm256_mul_pd(d, d), _mm256_add_pd(_mm256_loadu_pd(var + i), vs));
        acc = _mm256_add_pd(acc, t);
    }
    double total = horizontal_sum(acc);
    for (; i < n; ++i) {
        const double d = x[i] - mean[i];
        total += (d * d) / (var[i] + sigma2);
    }
    return total;
}

double sum_sq_diff(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        acc = _mm256_add_pd(acc, _mm256_mul_pd(d, d));
    }
    double total = horizontal_sum(acc);
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        total += d * d;
    }
    return total;
}

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    double total = horizontal_sum(acc);
    for (; i < n; ++i)
        total += a[i] * b[i];
    return total;
}

void gaussian_conditional(const double* data, const double* x, double coupling, const double* inv_precision,
                          const double* stddev, const double* noise, double* out, std::size_t n) {
    const __m256d vc = _mm256_set1_pd(coupling);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d m = _mm256_mul_pd(_mm256_add_pd(_mm256_loadu_pd(data + i), _mm256_mul_pd(_mm256_loadu_pd(x + i), vc)),
                                        _mm256_loadu_pd(inv_precision + i));
        _mm256_storeu_pd(out + i, _mm256_add_pd(m, _mm256_mul_pd(_mm256_loadu_pd(stddev + i), _mm256_loadu_pd(noise + i))));
    }
    for (; i < n; ++i)
        out[i] = (data[i] + x[i] * coupling) * inv_precision[i] + stddev[i] * noise[i];
}

} // namespace

const KernelTable* avx2_table() {
    static const KernelTable table{
        Backend::avx2, "avx2", axpby, axpbypcz, diag_score, accumulate_diag_score, weighted_sq_dist,
        sum_sq_diff,   dot,    gaussian_conditional,
    };
    return &table;
}

} // namespace pnpdm::kernels
