#ifndef DTPM_SCHEDULE_HPP
#define DTPM_SCHEDULE_HPP

#include "dtpm/types.hpp"

#include <span>
#include <vector>

namespace dtpm {

/**
 * @brief Variance-exploding noise schedule.
 *
 * Timesteps are 0-based. `betas[t] = beta_hi * (t + 1) / T`, the retained-signal
 * product is `alpha_bars[t] = prod_{s <= t} (1 - betas[s])` and the injected noise
 * has variance `sigma2s[t] = 1 - alpha_bars[t]` and scale `sigmas[t] = sqrt(sigma2s[t])`.
 */
struct DiffusionSchedule {
    int timesteps = 0;
    double beta_hi = 0.0;
    std::vector<double> betas;
    std::vector<double> alpha_bars;
    std::vector<double> sigma2s;
    std::vector<double> sigmas;

    double sigma(int t) const { return sigmas.at(static_cast<std::size_t>(t)); }
    double sigma2(int t) const { return sigma2s.at(static_cast<std::size_t>(t)); }
};

/// Throws ConfigError unless T >= 2 and 0 < beta_hi < 1.
DiffusionSchedule build_schedule(int timesteps, double beta_hi);

/// x0 + sigma_t * eps with eps drawn i.i.d. standard normal from `rng`.
Vector noising_sample(const DiffusionSchedule& schedule, const Vector& x0, int t, Rng& rng);

/// x0 + sigma_t * noise for caller-supplied noise.
Vector noising_sample(const DiffusionSchedule& schedule, const Vector& x0, int t, std::span<const double> noise);

}  // namespace dtpm

#endif
