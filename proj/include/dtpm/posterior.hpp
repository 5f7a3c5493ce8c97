#ifndef DTPM_POSTERIOR_HPP
#define DTPM_POSTERIOR_HPP

#include "dtpm/neighbors.hpp"
#include "dtpm/schedule.hpp"
#include "dtpm/types.hpp"

#include <iosfwd>
#include <span>
#include <vector>

/**
 * @file posterior.hpp
 *
 * @brief Posterior distributions over diffusion time.
 *
 * For a noisy observation x_s and a training set D, the posterior over the noise
 * variance of the schedule grid is proportional to sum_{x0 in D} N(x_s; x0, sigma_t^2 I).
 * With a single data point this is an inverse-Gamma density in sigma^2 with shape
 * d/2 - 1 and scale ||x_s - x0||^2 / 2; the k-NN estimator replaces that scale by
 * the mean half squared distance to the k nearest training points.
 */

namespace dtpm {

struct InverseGammaParams {
    double shape = 1.0;  // a > 0
    double scale = 0.0;  // b >= 0, units of sigma^2

    double mode() const { return scale / (shape + 1.0); }
};

/// Shape parameter for data of dimension d: max(d/2 - 1, 0.5). The floor keeps d <= 2 proper.
double shape_for_dimension(int d);

/// a ln b - lnGamma(a) - (a + 1) ln s - b / s. Throws DomainError unless s > 0, a > 0, b > 0.
double inv_gamma_log_density(double s, const InverseGammaParams& params);

/// Stable log(sum(exp(values))). Throws ContractError on empty input.
double logsumexp(std::span<const double> values);

/**
 * @brief Discrete posterior over the variances of a schedule.
 */
struct GridPosterior {
    std::vector<double> sigma2_grid;  // strictly increasing
    std::vector<double> probs;        // sums to one

    double mean_sigma2() const;
    std::size_t argmax() const;
    /// CSV with header "t,sigma2,prob".
    void write_csv(std::ostream& out) const;
};

/// Normalizes unnormalized log-weights over the grid.
GridPosterior normalize_log_weights(std::span<const double> sigma2_grid, std::span<const double> log_weights);

/// Exact per-timestep log-weights: -d ln sigma_t + logsumexp_x0(-||x - x0||^2 / (2 sigma_t^2)).
std::vector<double> analytic_log_weights(const Vector& x, const Matrix& train, const DiffusionSchedule& schedule);

/// Same as analytic_log_weights but with the log-sum-exp replaced by its max term (nearest point).
std::vector<double> max_approx_log_weights(const Vector& x, const Matrix& train, const DiffusionSchedule& schedule);

/// Exact posterior given the training set. Throws ContractError on an empty train set.
GridPosterior analytic_posterior(const Vector& x, const Matrix& train, const DiffusionSchedule& schedule);

/// Inverse-Gamma density evaluated on the schedule grid and renormalized.
GridPosterior inv_gamma_grid_posterior(const InverseGammaParams& params, const DiffusionSchedule& schedule);

/// Anomaly score of the analytic estimator: posterior mean of sigma^2.
double analytic_score(const Vector& x, const Matrix& train, const DiffusionSchedule& schedule);

/// Mean of ||x - x0||^2 / 2 over the k nearest neighbors. Throws ConfigError if k > index size.
double nonparametric_scale(const Vector& x, const KnnIndex& index, int k);

/// Mode b / (a + 1) of the k-NN inverse-Gamma posterior with a = shape_for_dimension(d).
double nonparametric_score(const Vector& x, const KnnIndex& index, int k);

/// Inverse-Gamma parameters of the k-NN estimator; the scale is clamped to >= 1e-12.
InverseGammaParams nonparametric_params(const Vector& x, const KnnIndex& index, int k);

}  // namespace dtpm

#endif
