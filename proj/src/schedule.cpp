#include "dtpm/schedule.hpp"

#include "dtpm/errors.hpp"

#include <cmath>
#include <string>

namespace dtpm {

DiffusionSchedule build_schedule(int timesteps, double beta_hi) {
    if (timesteps < 2) {
        throw ConfigError("number of timesteps must be at least 2, got " + std::to_string(timesteps));
    }
    if (!(beta_hi > 0.0 && beta_hi < 1.0)) {
        throw ConfigError("beta_hi must lie in (0, 1)");
    }

    DiffusionSchedule s;
    s.timesteps = timesteps;
    s.beta_hi = beta_hi;
    const auto n = static_cast<std::size_t>(timesteps);
    s.betas.resize(n);
    s.alpha_bars.resize(n);
    s.sigma2s.resize(n);
    s.sigmas.resize(n);

    double retained = 1.0;
    for (std::size_t t = 0; t < n; ++t) {
        // Shifted linear grid: beta_0 > 0 keeps sigma_0 > 0.
        s.betas[t] = beta_hi * static_cast<double>(t + 1) / static_cast<double>(timesteps);
        retained *= 1.0 - s.betas[t];
        s.alpha_bars[t] = retained;
        s.sigma2s[t] = 1.0 - retained;
        s.sigmas[t] = std::sqrt(s.sigma2s[t]);
        if (s.sigma2s[t] >= 1.0 || (t > 0 && s.sigmas[t] <= s.sigmas[t - 1])) {
            throw ConfigError("schedule saturates at timestep " + std::to_string(t) +
                              ": noise scale no longer increases below 1 in double precision");
        }
    }
    return s;
}

namespace {

void check_timestep(const DiffusionSchedule& schedule, int t) {
    if (t < 0 || t >= schedule.timesteps) {
        throw IndexError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(schedule.timesteps) + ")");
    }
}

}  // namespace

Vector noising_sample(const DiffusionSchedule& schedule, const Vector& x0, int t, Rng& rng) {
    check_timestep(schedule, t);
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sigma = schedule.sigma(t);
    Vector out(x0.size());
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
        out[i] = x0[i] + sigma * normal(rng);
    }
    return out;
}

Vector noising_sample(const DiffusionSchedule& schedule, const Vector& x0, int t, std::span<const double> noise) {
    check_timestep(schedule, t);
    if (noise.size() != static_cast<std::size_t>(x0.size())) {
        throw DimensionError("noise length does not match sample width");
    }
    const double sigma = schedule.sigma(t);
    Vector out(x0.size());
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
        out[i] = x0[i] + sigma * noise[static_cast<std::size_t>(i)];
    }
    return out;
}

}  // namespace dtpm
