#include "pnpdm/kernels.hpp"

namespace pnpdm::kernels {
namespace {

// Reductions keep four interleaved partial sums so they round exactly like the
// 4-lane AVX2 variants.
template <typename Term>
double reduce4(std::size_t n, Term term) {
    double s[4] = {0.0, 0.0, 0.0, 0.0};
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        for (std::size_t lane = 0; lane < 4; ++lane)
            s[lane] += term(i + lane);
    }
    double total = (s[0] + s[1]) + (s[2] + s[3]);
    for (; i < n; ++i)
        total += term(i);
    return total;
}

void axpby(double a, const double* x, double b, const double* y, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = a * x[i] + b * y[i];
}

void axpbypcz(double a, const double* x, double b, const double* y, double c, const double* z, double* out,
              std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = (a * x[i] + b * y[i]) + c * z[i];
}

void diag_score(const double* x, const double* mean, const double* var, double sigma2, double* out,
                std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = -((x[i] - mean[i]) / (var[i] + sigma2));
}

void accumulate_diag_score(const double* x, const double* mean, const double* var, double sigma2, double gamma,
                           double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = out[i] - gamma * ((x[i] - mean[i]) / (var[i] + sigma2));
}

double weighted_sq_dist(const double* x, const double* mean, const double* var, double sigma2, std::size_t n) {
    return reduce4(n, [&](std::size_t i) {
        const double d = x[i] - mean[i];
        return (d * d) / (var[i] + sigma2);
    });
}

double sum_sq_diff(const double* a, const double* b, std::size_t n) {
    return reduce4(n, [&](std::size_t i) {
        const double d = a[i] - b[i];
        return d * d;
    });
}

double dot(const double* a, const double* b, std::size_t n) {
    return reduce4(n, [&](std::size_t i) { return a[i] * b[i]; });
}

void gaussian_conditional(const double* data, const double* x, double coupling, const double* inv_precision,
                          const double* stddev, const double* noise, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i)
        out[i] = (data[i] + x[i] * coupling) * inv_precision[i] + stddev[i] * noise[i];
}

} // namespace

const KernelTable& scalar_table() {
    static const KernelTable table{
        Backend::scalar, "scalar", axpby, axpbypcz, diag_score, accumulate_diag_score, weighted_sq_dist,
        sum_sq_diff,     dot,      gaussian_conditional,
    };
    return table;
}

} // namespace pnpdm::kernels
