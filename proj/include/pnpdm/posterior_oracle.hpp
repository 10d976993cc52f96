#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pnpdm/linear_operator.hpp"
#include "pnpdm/score_model.hpp"

namespace pnpdm {

// Exact conjugate posteriors for linear-Gaussian measurements, computed with dense
// algebra. Intended as reference values for small problems (n <= 4096).

struct GaussianPosterior {
    Eigen::VectorXd mean;
    Eigen::MatrixXd covariance;

    double log_density(const Eigen::VectorXd& x) const;
};

GaussianPosterior gaussian_posterior_oracle(const GaussianPrior& prior, const LinearOperatorSVD& op,
                                            const NoiseModel& noise, std::span<const double> y);

/// Posterior of a diagonal GMM prior. Component covariances are full in general, so this
/// is not a GmmPrior.
struct MixturePosterior {
    std::vector<double> weights;
    std::vector<GaussianPosterior> components;

    Eigen::VectorXd mean() const;
    double density(const Eigen::VectorXd& x) const;
};

MixturePosterior gmm_posterior_oracle(const GmmPrior& prior, const LinearOperatorSVD& op, const NoiseModel& noise,
                                      std::span<const double> y);

/// Mean of the x-marginal of the split-Gibbs target at a fixed coupling rho:
/// p(x) N(y; A x, sigma_y^2 I + rho^2 A A^T). This is what a chain frozen at rho samples.
Eigen::VectorXd split_gibbs_marginal_mean(const GaussianPrior& prior, const LinearOperatorSVD& op,
                                          const NoiseModel& noise, std::span<const double> y, double rho);

} // namespace pnpdm
