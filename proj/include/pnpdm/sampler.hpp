#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "pnpdm/image.hpp"
#include "pnpdm/linear_operator.hpp"
#include "pnpdm/reverse_sde.hpp"
#include "pnpdm/rng.hpp"

namespace pnpdm {

/// rho_q = max(rho_min, rho0 * alpha^q).
struct AnnealingSchedule {
    double rho0 = 10.0;
    double rho_min = 0.3;
    double alpha = 0.9;

    void validate() const;
    double rho(std::size_t q) const;
};

double anneal_rho(const AnnealingSchedule& sched, std::size_t q);

/// Exact draw from the Gaussian conditional of z given x,
///   N(m(x), Lambda^-1),  Lambda = A^T A / sigma_y^2 + I / rho^2,
///   m(x) = Lambda^-1 (A^T y / sigma_y^2 + x / rho^2),
/// carried out in the V basis where Lambda is diagonal.
class LikelihoodStep {
public:
    LikelihoodStep(const LinearOperatorSVD& op, std::span<const double> y, double sigma_y);

    std::size_t dim() const { return op_.input_dim(); }

    void draw(std::span<const double> x, double rho, Rng& rng, std::span<double> out);
    std::vector<double> draw(std::span<const double> x, double rho, Rng& rng);

    /// m(x) without the noise term.
    std::vector<double> mean(std::span<const double> x, double rho);
    /// Diagonal of Lambda in the V basis.
    std::vector<double> precision_v(double rho) const;

private:
    void prepare(double rho);

    const LinearOperatorSVD& op_;
    double sigma_y_;
    std::vector<double> data_v_;     // d_i (U^T y)_i / sigma_y^2, zero past the rank slots
    std::vector<double> d2_;         // d_i^2 / sigma_y^2, zero past the rank slots
    double prepared_rho_ = 0.0;
    std::vector<double> inv_precision_;
    std::vector<double> stddev_;
    std::vector<double> x_v_;
    std::vector<double> out_v_;
    std::vector<double> noise_;
};

std::vector<double> likelihood_step(std::span<const double> x, std::span<const double> y, const LinearOperatorSVD& op,
                                    double sigma_y, double rho, Rng& rng);

/// Per-coordinate running mean and centered second moment (Welford / Chan et al.).
class ChainStats {
public:
    ChainStats() = default;
    explicit ChainStats(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

    void add(std::span<const double> x);
    /// Combine with statistics of an independent chain.
    void merge(const ChainStats& other);

    std::size_t count() const { return count_; }
    std::size_t dim() const { return mean_.size(); }
    const std::vector<double>& running_mean() const { return mean_; }
    /// Sum of squared deviations from the running mean.
    const std::vector<double>& running_second_moment() const { return m2_; }
    std::vector<double> variance() const;

private:
    std::size_t count_ = 0;
    std::vector<double> mean_;
    std::vector<double> m2_;
};

/// Mean of the retained samples, reshaped. Throws InvalidInput on empty stats.
ImageGrid posterior_mean_estimate(const ChainStats& stats, std::size_t height, std::size_t width);

enum class ChainInit { prior, given };

struct SamplerOptions {
    std::size_t iterations = 100;
    std::size_t burn_in = 50;
    ChainInit init = ChainInit::prior;
    /// Used when init == given (e.g. a bicubic upsample).
    std::vector<double> initial_state;
    /// Starting noise level and prior scale of the unconditional initial draw.
    double init_sigma_max = 80.0;
    double prior_scale = 1.0;
    bool keep_samples = true;

    void validate(std::size_t dim) const;
};

/// Split-Gibbs state after iteration q: z is the likelihood draw, x the prior-step output.
struct SamplerState {
    std::size_t q = 0;
    double rho = 0.0;
    std::span<const double> x;
    std::span<const double> z;
};

struct ChainResult {
    std::vector<std::vector<double>> samples;
    ChainStats stats;
};

using IterateCallback = std::function<void(const SamplerState&)>;

/// One PnP-DM chain: for q = 0..iterations-1, z = likelihood_step(x, rho_q) and
/// x = prior_step(z, rho_q); iterates with q >= burn_in are retained. Step failures are
/// rethrown with the iteration index attached.
class PnpDmSampler {
public:
    PnpDmSampler(const LinearOperatorSVD& op, std::span<const double> y, const NoiseModel& noise,
                 const ScoreModel& score, const DiffusionSchedule& sched, AnnealingSchedule anneal,
                 ReverseSdeConfig sde_cfg, SamplerOptions options);

    ChainResult run(std::uint64_t seed, const IterateCallback& on_iterate = {}) const;
    /// Independent chains seeded derive_seed(seed, chain). Run on up to `threads` threads;
    /// statistics are merged in chain order so the result does not depend on scheduling.
    ChainResult run_chains(std::size_t chains, std::uint64_t seed, std::size_t threads = 0) const;

private:
    const LinearOperatorSVD& op_;
    std::vector<double> y_;
    NoiseModel noise_;
    const ScoreModel& score_;
    DiffusionSchedule sched_;
    AnnealingSchedule anneal_;
    ReverseSdeConfig sde_cfg_;
    SamplerOptions options_;
};

ChainResult pnp_dm_run(std::span<const double> y, const LinearOperatorSVD& op, const NoiseModel& noise,
                       const ScoreModel& score, const DiffusionSchedule& sched, const AnnealingSchedule& anneal,
                       const ReverseSdeConfig& sde_cfg, const SamplerOptions& options, std::uint64_t seed);

} // namespace pnpdm
