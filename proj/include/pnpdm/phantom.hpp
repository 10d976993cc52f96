#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "pnpdm/image.hpp"
#include "pnpdm/score_model.hpp"

namespace pnpdm {

enum class PhantomKind { layered_cornea, gmm_field, flat };

std::string_view to_string(PhantomKind kind);
PhantomKind parse_phantom_kind(std::string_view name);

/// Synthetic stand-in for corneal B-scans.
struct PhantomSpec {
    PhantomKind kind = PhantomKind::layered_cornea;
    std::size_t height = 64;
    std::size_t width = 64;
    std::uint64_t seed = 0;
    /// flat: the constant value.
    double value = 0.5;
    /// layered_cornea: scale of the random pose/shape perturbation (0 = fixed geometry).
    double jitter = 0.5;
    /// layered_cornea: log-std of the multiplicative speckle.
    double speckle = 0.2;
    /// layered_cornea: membrane half-width as a fraction of the image height.
    double membrane_width = 0.02;
    /// gmm_field: number of Gaussian blobs.
    std::size_t blobs = 6;

    void validate() const;
};

/// Deterministic per seed; values in [0,1].
ImageGrid generate_phantom(const PhantomSpec& spec);

struct GmmFitOptions {
    std::size_t components = 16;
    std::size_t iterations = 30;
    double variance_floor = 1e-4;
    std::uint64_t seed = 0;
};

/// Diagonal GMM fitted by classification EM (k-means++ seeding, hard assignments, then
/// per-cluster moments). Weights are cluster fractions; variance_floor is added to every
/// variance. Singleton clusters get the pooled variance; empty clusters are dropped.
GmmPrior fit_gmm(std::span<const std::vector<double>> samples, const GmmFitOptions& options);

} // namespace pnpdm
