#include "pnpdm/posterior_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "pnpdm/error.hpp"

namespace pnpdm {

namespace {

struct Conditioned {
    GaussianPosterior posterior;
    double log_evidence = 0.0;
};

Eigen::VectorXd to_eigen(std::span<const double> v) {
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

// Gaussian N(mu, diag(var)) conditioned on y = A x + e, e ~ N(0, noise_cov). Written in
// the gain form so that a singular A^T A is harmless.
Conditioned condition(const Eigen::VectorXd& mu, const Eigen::VectorXd& var, const Eigen::MatrixXd& a,
                      const Eigen::MatrixXd& noise_cov, const Eigen::VectorXd& y) {
    const Eigen::MatrixXd sigma_at = var.asDiagonal() * a.transpose(); // Sigma A^T
    Eigen::MatrixXd s = a * sigma_at + noise_cov;
    s = 0.5 * (s + s.transpose());
    Eigen::LLT<Eigen::MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
        throw NumericFailure("posterior oracle: innovation covariance is not positive definite");
    const Eigen::VectorXd resid = y - a * mu;
    const Eigen::VectorXd alpha = llt.solve(resid);
    const Eigen::MatrixXd gain_t = llt.solve(sigma_at.transpose()); // S^-1 A Sigma

    Conditioned out;
    out.posterior.mean = mu + sigma_at * alpha;
    Eigen::MatrixXd cov = -sigma_at * gain_t;
    cov.diagonal() += var;
    out.posterior.covariance = 0.5 * (cov + cov.transpose());

    const Eigen::MatrixXd l = llt.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    out.log_evidence = -0.5 * (resid.dot(alpha) + log_det +
                               static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi));
    return out;
}

void check_problem(std::size_t prior_dim, const LinearOperatorSVD& op, std::span<const double> y) {
    if (prior_dim != op.input_dim())
        throw InvalidInput("posterior oracle: prior dimension does not match the operator");
    if (y.size() != op.output_dim())
        throw InvalidInput("posterior oracle: measurement length does not match the operator");
    require_finite(y, "measurement");
}

Eigen::MatrixXd white(std::size_t m, double sigma_y) {
    return Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)) * (sigma_y * sigma_y);
}

} // namespace

double GaussianPosterior::log_density(const Eigen::VectorXd& x) const {
    Eigen::LLT<Eigen::MatrixXd> llt(covariance);
    if (llt.info() != Eigen::Success)
        throw NumericFailure("posterior covariance is not positive definite");
    const Eigen::VectorXd r = x - mean;
    const Eigen::MatrixXd l = llt.matrixL();
    const double log_det = 2.0 * l.diagonal().array().log().sum();
    return -0.5 * (r.dot(llt.solve(r)) + log_det + static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi));
}

GaussianPosterior gaussian_posterior_oracle(const GaussianPrior& prior, const LinearOperatorSVD& op,
                                            const NoiseModel& noise, std::span<const double> y) {
    check_problem(prior.dim(), op, y);
    const Eigen::MatrixXd a = materialize(op).a;
    return condition(to_eigen(prior.mean()), to_eigen(prior.variance()), a, white(op.output_dim(), noise.sigma_y),
                     to_eigen(y))
        .posterior;
}

Eigen::VectorXd MixturePosterior::mean() const {
    if (components.empty())
        throw InvalidInput("empty mixture");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(components.front().mean.size());
    for (std::size_t k = 0; k < components.size(); ++k)
        out += weights[k] * components[k].mean;
    return out;
}

double MixturePosterior::density(const Eigen::VectorXd& x) const {
    double total = 0.0;
    for (std::size_t k = 0; k < components.size(); ++k)
        if (weights[k] > 0.0)
            total += weights[k] * std::exp(components[k].log_density(x));
    return total;
}

MixturePosterior gmm_posterior_oracle(const GmmPrior& prior, const LinearOperatorSVD& op, const NoiseModel& noise,
                                      std::span<const double> y) {
    check_problem(prior.dim(), op, y);
    const Eigen::MatrixXd a = materialize(op).a;
    const Eigen::MatrixXd noise_cov = white(op.output_dim(), noise.sigma_y);
    const Eigen::VectorXd ye = to_eigen(y);

    MixturePosterior out;
    std::vector<double> log_w;
    for (const auto& c : prior.components()) {
        auto cond = condition(to_eigen(c.mean), to_eigen(c.variance), a, noise_cov, ye);
        log_w.push_back(c.weight > 0.0 ? std::log(c.weight) + cond.log_evidence
                                       : -std::numeric_limits<double>::infinity());
        out.components.push_back(std::move(cond.posterior));
    }
    const double top = *std::max_element(log_w.begin(), log_w.end());
    if (!std::isfinite(top))
        throw NumericFailure("posterior oracle: every mixture component has zero evidence");
    double total = 0.0;
    for (double lw : log_w) {
        out.weights.push_back(std::exp(lw - top));
        total += out.weights.back();
    }
    for (auto& w : out.weights)
        w /= total;
    return out;
}

Eigen::VectorXd split_gibbs_marginal_mean(const GaussianPrior& prior, const LinearOperatorSVD& op,
                                          const NoiseModel& noise, std::span<const double> y, double rho) {
    check_problem(prior.dim(), op, y);
    if (!(rho >= 0.0))
        throw InvalidInput("coupling must be >= 0");
    const Eigen::MatrixXd a = materialize(op).a;
    const Eigen::MatrixXd noise_cov = white(op.output_dim(), noise.sigma_y) + (rho * rho) * (a * a.transpose());
    return condition(to_eigen(prior.mean()), to_eigen(prior.variance()), a, noise_cov, to_eigen(y)).posterior.mean;
}

} // namespace pnpdm
