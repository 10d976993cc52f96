#include "pnpdm/score_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "pnpdm/error.hpp"
#include "pnpdm/image.hpp"
#include "pnpdm/kernels.hpp"

namespace pnpdm {
namespace {

constexpr double log_two_pi = 1.8378770664093454835606594728112;

void check_sigma(double sigma) {
    if (!(sigma >= 0.0) || !std::isfinite(sigma))
        throw InvalidInput("noise level must be finite and >= 0");
}

void check_variances(const std::vector<double>& v, const char* what) {
    for (double x : v)
        if (!(x > 0.0) || !std::isfinite(x))
            throw InvalidInput(std::string(what) + ": variances must be positive and finite");
}

} // namespace

std::vector<double> ScoreModel::score(std::span<const double> x, double sigma) const {
    std::vector<double> out(x.size());
    score(x, sigma, out);
    return out;
}

// ---------------------------------------------------------------------------------------

GaussianPrior::GaussianPrior(std::vector<double> mean, std::vector<double> variance)
    : mean_(std::move(mean)), variance_(std::move(variance)) {
    if (mean_.empty() || mean_.size() != variance_.size())
        throw InvalidInput("gaussian prior: mean and variance must be non-empty and of equal length");
    require_finite(mean_, "gaussian prior mean");
    check_variances(variance_, "gaussian prior");
}

GaussianPrior::GaussianPrior(std::size_t dim, double mean, double variance)
    : GaussianPrior(std::vector<double>(dim, mean), std::vector<double>(dim, variance)) {}

void GaussianPrior::score(std::span<const double> x, double sigma, std::span<double> out) const {
    check_sigma(sigma);
    if (x.size() != dim() || out.size() != dim())
        throw InvalidInput("gaussian prior: dimension mismatch");
    kernels::active().diag_score(x.data(), mean_.data(), variance_.data(), sigma * sigma, out.data(), dim());
}

double GaussianPrior::log_density(std::span<const double> x, double sigma) const {
    check_sigma(sigma);
    if (x.size() != dim())
        throw InvalidInput("gaussian prior: dimension mismatch");
    const double s2 = sigma * sigma;
    double acc = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) {
        const double v = variance_[i] + s2;
        const double d = x[i] - mean_[i];
        acc += d * d / v + std::log(v) + log_two_pi;
    }
    return -0.5 * acc;
}

double GaussianPrior::scale() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < dim(); ++i)
        acc += mean_[i] * mean_[i] + variance_[i];
    return std::sqrt(acc / static_cast<double>(dim()));
}

// ---------------------------------------------------------------------------------------

GmmPrior::GmmPrior(std::vector<GmmComponent> components) : components_(std::move(components)) {
    if (components_.empty())
        throw InvalidInput("gmm prior: needs at least one component");
    dim_ = components_.front().mean.size();
    if (dim_ == 0)
        throw InvalidInput("gmm prior: zero dimension");
    double total = 0.0;
    for (const auto& c : components_) {
        if (c.mean.size() != dim_ || c.variance.size() != dim_)
            throw InvalidInput("gmm prior: component dimensions differ");
        if (!(c.weight > 0.0) || !std::isfinite(c.weight))
            throw InvalidInput("gmm prior: weights must be positive");
        require_finite(c.mean, "gmm prior mean");
        check_variances(c.variance, "gmm prior");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw InvalidInput("gmm prior: weights sum to " + std::to_string(total) + ", expected 1");
    for (const auto& c : components_)
        log_weights_.push_back(std::log(c.weight));
}

const std::vector<double>& GmmPrior::log_dets(double sigma2) const {
    std::lock_guard lock(cache_mutex_);
    auto it = log_det_cache_.find(sigma2);
    if (it != log_det_cache_.end())
        return it->second;
    if (log_det_cache_.size() >= 65536)
        log_det_cache_.clear();
    std::vector<double> dets(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
        double acc = 0.0;
        for (double v : components_[k].variance)
            acc += std::log(v + sigma2);
        dets[k] = acc;
    }
    // std::map nodes are stable, so the reference survives later insertions.
    return log_det_cache_.emplace(sigma2, std::move(dets)).first->second;
}

void GmmPrior::log_terms(std::span<const double> x, double sigma, std::span<double> out) const {
    check_sigma(sigma);
    if (x.size() != dim_)
        throw InvalidInput("gmm prior: dimension mismatch");
    const double s2 = sigma * sigma;
    const auto& table = kernels::active();
    const double norm = static_cast<double>(dim_) * log_two_pi;
    // Below this size recomputing the log-determinants is cheaper than the cache lookup.
    const bool small = dim_ * components_.size() < 256;
    const std::vector<double>* dets = small ? nullptr : &log_dets(s2);
    for (std::size_t k = 0; k < components_.size(); ++k) {
        const auto& c = components_[k];
        double log_det;
        if (dets) {
            log_det = (*dets)[k];
        } else {
            log_det = 0.0;
            for (double v : c.variance)
                log_det += std::log(v + s2);
        }
        const double quad = table.weighted_sq_dist(x.data(), c.mean.data(), c.variance.data(), s2, dim_);
        out[k] = log_weights_[k] - 0.5 * (quad + log_det + norm);
    }
}

std::vector<double> GmmPrior::responsibilities(std::span<const double> x, double sigma) const {
    std::vector<double> g(components_.size());
    log_terms(x, sigma, g);
    const double top = *std::max_element(g.begin(), g.end());
    double total = 0.0;
    for (double& v : g) {
        v = std::exp(v - top);
        total += v;
    }
    for (double& v : g)
        v /= total;
    return g;
}

void GmmPrior::score(std::span<const double> x, double sigma, std::span<double> out) const {
    if (out.size() != dim_)
        throw InvalidInput("gmm prior: dimension mismatch");
    thread_local std::vector<double> gamma;
    gamma.resize(components_.size());
    log_terms(x, sigma, gamma);
    const double top = *std::max_element(gamma.begin(), gamma.end());
    double total = 0.0;
    for (double& v : gamma) {
        v = std::exp(v - top);
        total += v;
    }
    std::fill(out.begin(), out.end(), 0.0);
    const double s2 = sigma * sigma;
    const auto& table = kernels::active();
    for (std::size_t k = 0; k < components_.size(); ++k) {
        // exp underflow gives exactly zero weight; skipping those terms is exact
        if (gamma[k] == 0.0)
            continue;
        const auto& c = components_[k];
        table.accumulate_diag_score(x.data(), c.mean.data(), c.variance.data(), s2, gamma[k] / total, out.data(),
                                    dim_);
    }
}

double GmmPrior::log_density(std::span<const double> x, double sigma) const {
    std::vector<double> terms(components_.size());
    log_terms(x, sigma, terms);
    const double top = *std::max_element(terms.begin(), terms.end());
    double total = 0.0;
    for (double v : terms)
        total += std::exp(v - top);
    return top + std::log(total);
}

double GmmPrior::scale() const {
    double acc = 0.0;
    for (const auto& c : components_) {
        double s = 0.0;
        for (std::size_t i = 0; i < dim_; ++i)
            s += c.mean[i] * c.mean[i] + c.variance[i];
        acc += c.weight * s;
    }
    return std::sqrt(acc / static_cast<double>(dim_));
}

GmmPrior GmmPrior::widened(double sigma) const {
    check_sigma(sigma);
    auto comps = components_;
    const double s2 = sigma * sigma;
    for (auto& c : comps)
        for (double& v : c.variance)
            v += s2;
    return GmmPrior(std::move(comps));
}

} // namespace pnpdm
