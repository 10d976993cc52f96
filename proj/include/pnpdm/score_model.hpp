#pragma once

#include <cstddef>
#include <map>
#include <mutex>
#include <span>
#include <vector>

namespace pnpdm {

/// A prior known only through the score of its noise-smoothed density,
/// grad_x log p(x; sigma) with p(.; sigma) = p * N(0, sigma^2 I).
///
/// Implementations are immutable after construction and safe to call concurrently.
class ScoreModel {
public:
    virtual ~ScoreModel() = default;

    virtual std::size_t dim() const = 0;
    virtual void score(std::span<const double> x, double sigma, std::span<double> out) const = 0;

    std::vector<double> score(std::span<const double> x, double sigma) const;
};

/// Score model that also exposes its smoothed log density (used by finite-difference
/// checks and posterior oracles) and a characteristic scale for initialization.
class AnalyticPrior : public ScoreModel {
public:
    virtual double log_density(std::span<const double> x, double sigma) const = 0;
    /// sqrt of the per-coordinate mean second moment, E|x|^2 / n.
    virtual double scale() const = 0;
};

/// N(mean, diag(variance)).
class GaussianPrior final : public AnalyticPrior {
public:
    GaussianPrior(std::vector<double> mean, std::vector<double> variance);
    GaussianPrior(std::size_t dim, double mean, double variance);

    std::size_t dim() const override { return mean_.size(); }
    void score(std::span<const double> x, double sigma, std::span<double> out) const override;
    double log_density(std::span<const double> x, double sigma) const override;
    double scale() const override;

    const std::vector<double>& mean() const { return mean_; }
    const std::vector<double>& variance() const { return variance_; }

    using ScoreModel::score;

private:
    std::vector<double> mean_;
    std::vector<double> variance_;
};

struct GmmComponent {
    double weight = 0.0;
    std::vector<double> mean;
    std::vector<double> variance; // diagonal
};

/// Gaussian mixture with diagonal covariances. Smoothing by N(0, sigma^2 I) keeps it a
/// mixture, so score and density stay closed-form at every noise level.
class GmmPrior final : public AnalyticPrior {
public:
    explicit GmmPrior(std::vector<GmmComponent> components);
    // Copies start with an empty cache.
    GmmPrior(const GmmPrior& other)
        : dim_(other.dim_), components_(other.components_), log_weights_(other.log_weights_) {}
    GmmPrior& operator=(const GmmPrior&) = delete;

    std::size_t dim() const override { return dim_; }
    void score(std::span<const double> x, double sigma, std::span<double> out) const override;
    double log_density(std::span<const double> x, double sigma) const override;
    double scale() const override;

    /// gamma_k(x, sigma), normalized with log-sum-exp.
    std::vector<double> responsibilities(std::span<const double> x, double sigma) const;
    /// The mixture with sigma^2 folded into every component variance.
    GmmPrior widened(double sigma) const;

    const std::vector<GmmComponent>& components() const { return components_; }

    using ScoreModel::score;

private:
    // Unnormalized log responsibilities log w_k + log N(x; mu_k, var_k + sigma^2).
    void log_terms(std::span<const double> x, double sigma, std::span<double> out) const;
    const std::vector<double>& log_dets(double sigma2) const;

    std::size_t dim_ = 0;
    std::vector<GmmComponent> components_;
    std::vector<double> log_weights_;

    // sum_i log(var_ki + sigma^2) per component, memoized per sigma^2 (pure function of
    // the key, so caching does not affect results).
    mutable std::mutex cache_mutex_;
    mutable std::map<double, std::vector<double>> log_det_cache_;
};

} // namespace pnpdm
