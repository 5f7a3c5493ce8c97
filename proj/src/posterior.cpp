#include "dtpm/posterior.hpp"

#include "dtpm/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace dtpm {

namespace {

constexpr double kMinScale = 1e-12;

}  // namespace

double shape_for_dimension(int d) {
    if (d < 1) {
        throw ContractError("dimension must be positive");
    }
    return std::max(0.5 * static_cast<double>(d) - 1.0, 0.5);
}

double inv_gamma_log_density(double s, const InverseGammaParams& params) {
    if (!(s > 0.0)) {
        throw DomainError("inverse-Gamma density needs s > 0");
    }
    if (!(params.shape > 0.0) || !(params.scale > 0.0)) {
        throw DomainError("inverse-Gamma density needs a > 0 and b > 0");
    }
    const double a = params.shape;
    const double b = params.scale;
    return a * std::log(b) - std::lgamma(a) - (a + 1.0) * std::log(s) - b / s;
}

double logsumexp(std::span<const double> values) {
    if (values.empty()) {
        throw ContractError("logsumexp of an empty sequence");
    }
    const double top = *std::max_element(values.begin(), values.end());
    if (std::isinf(top)) {
        return top;
    }
    double sum = 0.0;
    for (double v : values) {
        sum += std::exp(v - top);
    }
    return top + std::log(sum);
}

double GridPosterior::mean_sigma2() const {
    double mean = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        mean += probs[i] * sigma2_grid[i];
    }
    return mean;
}

std::size_t GridPosterior::argmax() const {
    return static_cast<std::size_t>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

void GridPosterior::write_csv(std::ostream& out) const {
    out << "t,sigma2,prob\n";
    const auto old_precision = out.precision(17);
    for (std::size_t i = 0; i < probs.size(); ++i) {
        out << i << ',' << sigma2_grid[i] << ',' << probs[i] << '\n';
    }
    out.precision(old_precision);
}

GridPosterior normalize_log_weights(std::span<const double> sigma2_grid, std::span<const double> log_weights) {
    if (sigma2_grid.size() != log_weights.size() || sigma2_grid.empty()) {
        throw DimensionError("grid and log-weights must be nonempty and equally long");
    }
    const double total = logsumexp(log_weights);
    if (!std::isfinite(total)) {
        throw NumericError("posterior log-weights are not finite");
    }
    GridPosterior post;
    post.sigma2_grid.assign(sigma2_grid.begin(), sigma2_grid.end());
    post.probs.resize(log_weights.size());
    for (std::size_t i = 0; i < log_weights.size(); ++i) {
        post.probs[i] = std::exp(log_weights[i] - total);
    }
    return post;
}

namespace {

std::vector<double> squared_distances_to(const Vector& x, const Matrix& train) {
    if (train.rows() == 0) {
        throw ContractError("posterior needs at least one training point");
    }
    if (train.cols() != x.size() || x.size() == 0) {
        throw DimensionError("query width does not match training width");
    }
    std::vector<double> dist(static_cast<std::size_t>(train.rows()));
    for (Eigen::Index r = 0; r < train.rows(); ++r) {
        dist[static_cast<std::size_t>(r)] = squared_distance(train.row(r).transpose(), x);
    }
    return dist;
}

}  // namespace

std::vector<double> analytic_log_weights(const Vector& x, const Matrix& train, const DiffusionSchedule& schedule) {
    const std::vector<double> dist = squared_distances_to(x, train);
    const double d = static_cast<double>(x.size());
    std::vector<double> terms(dist.size());
    std::vector<double> out(static_cast<std::size_t>(schedule.timesteps));
    for (int t = 0; t < schedule.timesteps; ++t) {
        const double s2 = schedule.sigma2(t);
        for (std::size_t j = 0; j < dist.size(); ++j) {
            terms[j] = -dist[j] / (2.0 * s2);
        }
        out[static_cast<std::size_t>(t)] = -0.5 * d * std::log(s2) + logsumexp(terms);
    }
    return out;
}

std::vector<double> max_approx_log_weights(const Vector& x, const Matrix& train, const DiffusionSchedule& schedule) {
    const std::vector<double> dist = squared_distances_to(x, train);
    const double nearest = *std::min_element(dist.begin(), dist.end());
    const double d = static_cast<double>(x.size());
    std::vector<double> out(static_cast<std::size_t>(schedule.timesteps));
    for (int t = 0; t < schedule.timesteps; ++t) {
        const double s2 = schedule.sigma2(t);
        out[static_cast<std::size_t>(t)] = -0.5 * d * std::log(s2) - nearest / (2.0 * s2);
    }
    return out;
}

GridPosterior analytic_posterior(const Vector& x, const Matrix& train, const DiffusionSchedule& schedule) {
    const std::vector<double> logw = analytic_log_weights(x, train, schedule);
    return normalize_log_weights(schedule.sigma2s, logw);
}

GridPosterior inv_gamma_grid_posterior(const InverseGammaParams& params, const DiffusionSchedule& schedule) {
    std::vector<double> logw(static_cast<std::size_t>(schedule.timesteps));
    for (int t = 0; t < schedule.timesteps; ++t) {
        logw[static_cast<std::size_t>(t)] = inv_gamma_log_density(schedule.sigma2(t), params);
    }
    return normalize_log_weights(schedule.sigma2s, logw);
}

double analytic_score(const Vector& x, const Matrix& train, const DiffusionSchedule& schedule) {
    return analytic_posterior(x, train, schedule).mean_sigma2();
}

double nonparametric_scale(const Vector& x, const KnnIndex& index, int k) {
    const KnnResult nn = index.query(x, k);
    double total = 0.0;
    for (double d2 : nn.squared_distances) {
        total += 0.5 * d2;
    }
    return total / static_cast<double>(k);
}

double nonparametric_score(const Vector& x, const KnnIndex& index, int k) {
    const double a = shape_for_dimension(index.dim());
    return nonparametric_scale(x, index, k) / (a + 1.0);
}

InverseGammaParams nonparametric_params(const Vector& x, const KnnIndex& index, int k) {
    return {shape_for_dimension(index.dim()), std::max(nonparametric_scale(x, index, k), kMinScale)};
}

}  // namespace dtpm
