#pragma once

// Data-parallel inner loops of the sampler. Each kernel has a scalar reference and an
// AVX2 variant; the active table is chosen once at startup from CPUID and can be
// overridden with PNPDM_KERNELS=scalar|avx2 or select().
//
// Both variants perform the same IEEE operations in the same order (no FMA, reductions
// use four interleaved partial sums combined as (s0+s1)+(s2+s3), then the tail), so
// results are bit-identical whichever table is active.

#include <cstddef>
#include <span>
#include <string_view>

namespace pnpdm::kernels {

enum class Backend { scalar, avx2 };

struct KernelTable {
    Backend backend;
    const char* name;

    /// out = a*x + b*y
    void (*axpby)(double a, const double* x, double b, const double* y, double* out, std::size_t n);
    /// out = (a*x + b*y) + c*z
    void (*axpbypcz)(double a, const double* x, double b, const double* y, double c, const double* z,
                     double* out, std::size_t n);
    /// out = -(x - mean) / (var + sigma2)
    void (*diag_score)(const double* x, const double* mean, const double* var, double sigma2, double* out,
                       std::size_t n);
    /// out -= gamma * (x - mean) / (var + sigma2)
    void (*accumulate_diag_score)(const double* x, const double* mean, const double* var, double sigma2,
                                  double gamma, double* out, std::size_t n);
    /// sum (x - mean)^2 / (var + sigma2)
    double (*weighted_sq_dist)(const double* x, const double* mean, const double* var, double sigma2,
                               std::size_t n);
    /// sum (a - b)^2
    double (*sum_sq_diff)(const double* a, const double* b, std::size_t n);
    double (*dot)(const double* a, const double* b, std::size_t n);
    /// out = (data + x*coupling) * inv_precision + stddev * noise
    void (*gaussian_conditional)(const double* data, const double* x, double coupling, const double* inv_precision,
                                 const double* stddev, const double* noise, double* out, std::size_t n);
};

const KernelTable& scalar_table();
/// nullptr when the binary was built without AVX2 support.
const KernelTable* avx2_table();

bool available(Backend b);
const KernelTable& table(Backend b);
const KernelTable& active();
/// Throws InvalidInput if the backend is unavailable on this CPU.
void select(Backend b);
Backend parse_backend(std::string_view name);

// Span front-ends over the active table.

inline void axpby(double a, std::span<const double> x, double b, std::span<const double> y, std::span<double> out) {
    active().axpby(a, x.data(), b, y.data(), out.data(), out.size());
}

inline void axpbypcz(double a, std::span<const double> x, double b, std::span<const double> y, double c,
                     std::span<const double> z, std::span<double> out) {
    active().axpbypcz(a, x.data(), b, y.data(), c, z.data(), out.data(), out.size());
}

inline double sum_sq_diff(std::span<const double> a, std::span<const double> b) {
    return active().sum_sq_diff(a.data(), b.data(), a.size());
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    return active().dot(a.data(), b.data(), a.size());
}

} // namespace pnpdm::kernels
