#ifndef DTPM_MODELS_HPP
#define DTPM_MODELS_HPP

#include "dtpm/mlp.hpp"
#include "dtpm/schedule.hpp"
#include "dtpm/standardizer.hpp"
#include "dtpm/types.hpp"

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

/**
 * @file models.hpp
 *
 * @brief Parametric diffusion-time models.
 *
 * A network f is trained on noisy copies x_t = x_0 + sigma_t * eps of the
 * (standardized) training data to recover the noise level. Two heads exist:
 *
 * - inverse-Gamma: f(x_t) > 0 is the scale b of an inverse-Gamma posterior over
 *   sigma^2 with fixed shape a; trained by the negative log-likelihood
 *   -(a ln b - (a + 1) ln sigma_t^2 - b / sigma_t^2); scored by the mode b / (a + 1).
 * - categorical: f(x_t) is a softmax over B bins of timesteps, bin = floor(t B / T);
 *   trained by cross-entropy; scored by the mean bin index sum_k k p_k.
 *
 * Clean inputs are scored without added noise; larger scores are more anomalous.
 */

namespace dtpm {

enum class Method { Analytic, NonParametric, InvGamma, Categorical };

std::string_view to_string(Method method);
Method parse_method(std::string_view name);
bool is_parametric(Method method);

/// Training hyperparameters. Defaults follow the reference configuration.
struct TrainConfig {
    int epochs = 400;
    int batch_size = 64;
    double lr = 1e-4;
    double dropout = 0.5;
    int timesteps = 300;
    double beta_hi = 0.01;
    int bins = 7;
    std::vector<int> hidden = {256, 512, 256};
    std::uint64_t seed = 0;

    /// Throws ConfigError for non-positive values or out-of-range rates.
    void validate() const;
};

struct InvGammaModel {
    MlpModel mlp;  // softplus head, one output
    double shape = 1.0;
    DiffusionSchedule schedule;
    Standardizer standardizer;
    double final_loss = 0.0;
};

struct CategoricalModel {
    MlpModel mlp;  // softmax head, `bins` outputs
    int bins = 7;
    DiffusionSchedule schedule;
    Standardizer standardizer;
    double final_loss = 0.0;
};

using DtpmModel = std::variant<InvGammaModel, CategoricalModel>;

const MlpModel& network(const DtpmModel& model);
const Standardizer& standardizer(const DtpmModel& model);
const DiffusionSchedule& schedule(const DtpmModel& model);
double final_loss(const DtpmModel& model);

struct LossAndGrad {
    double loss = 0.0;
    Matrix grad;  // w.r.t. predictions (inverse-Gamma) or logits (categorical)
};

/**
 * Batch-mean inverse-Gamma negative log-likelihood and its gradient with respect
 * to the predicted scales. `b_pred` is n x 1. Throws DomainError on nonpositive inputs.
 */
LossAndGrad inv_gamma_loss(const Matrix& b_pred, std::span<const double> sigma2, double shape);

/// Batch-mean cross-entropy of softmax(logits) against integer targets, gradient w.r.t. logits.
LossAndGrad categorical_loss(const Matrix& logits, std::span<const int> targets);

/// floor(t * bins / timesteps). Throws ContractError when out of range.
int categorical_target(int t, int timesteps, int bins);

/// Called once per epoch with the sample-weighted mean training loss.
using EpochCallback = std::function<void(int epoch, double mean_loss)>;

/**
 * Trains a parametric model on already standardized rows.
 *
 * Every epoch shuffles the rows, and for each row draws t ~ U{0, ..., T-1} and
 * eps ~ N(0, I) from the seeded stream. The last batch may be smaller. Throws
 * NumericError (naming epoch and batch) if the loss becomes non-finite.
 */
DtpmModel train(Method method, const Matrix& standardized_train, const Standardizer& standardizer,
                const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Scores for rows already in standardized space.
Vector score_standardized(const DtpmModel& model, const Matrix& z);

/// Scores raw rows; standardizes with the stored statistics. Throws DataError on width mismatch.
Vector score_batch(const DtpmModel& model, const Matrix& raw);
double score(const DtpmModel& model, const Vector& raw);

/// Gradient of the score with respect to a standardized input row.
Vector score_input_gradient(const DtpmModel& model, const Vector& z);

enum class DenoiseStop { Completed, ScoreIncreased, NonFiniteGradient };

struct DenoiseResult {
    std::vector<Vector> trajectory;  // raw-space iterates, starting with the input
    std::vector<double> scores;
    DenoiseStop stop = DenoiseStop::Completed;
};

/**
 * Gradient descent on the anomaly score in standardized space,
 * z <- z - step_size * grad score(z). Stops early after two consecutive score
 * increases (those iterates are dropped) or at a non-finite gradient.
 */
DenoiseResult denoise(const DtpmModel& model, const Vector& raw, int steps, double step_size = 0.01);

}  // namespace dtpm

#endif
