#ifndef DTPM_MLP_HPP
#define DTPM_MLP_HPP

#include "dtpm/types.hpp"

#include <cstdint>
#include <string_view>
#include <vector>

/**
 * @file mlp.hpp
 *
 * @brief Feed-forward network with ReLU hidden layers, inverted dropout,
 * exact manual backpropagation and an Adam optimizer.
 */

namespace dtpm {

enum class OutputHead {
    Softplus,  ///< strictly positive scalar (or vector) output
    Softmax    ///< probability vector over the output units
};

std::string_view to_string(OutputHead head);
OutputHead parse_output_head(std::string_view name);

/**
 * @brief Parameters and mode flags of a multilayer perceptron.
 *
 * Layer `i` maps `layer_dims[i]` inputs to `layer_dims[i + 1]` outputs through
 * `weights[i]` (out x in, row-major) and `biases[i]`. Hidden layers use ReLU
 * followed by dropout when `train_mode` is set; the last layer feeds `head`.
 */
struct MlpModel {
    std::vector<int> layer_dims;
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    OutputHead head = OutputHead::Softplus;
    double dropout_rate = 0.0;
    bool train_mode = false;
    // Bumped by every optimizer step so that stale tapes can be detected.
    std::uint64_t revision = 0;

    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }
    std::size_t num_layers() const { return weights.size(); }
    std::size_t parameter_count() const;
};

/// Glorot-uniform weights, zero biases.
MlpModel make_mlp(std::vector<int> layer_dims, OutputHead head, double dropout_rate, Rng& rng);

/// Throws DimensionError / NumericError if shapes do not chain or parameters are not finite.
void validate(const MlpModel& model);

/// Activations cached by a forward pass, consumed by backward().
struct ForwardTape {
    std::vector<Matrix> inputs;           // input of every layer; inputs[0] is the batch
    std::vector<Matrix> pre_activations;  // affine output of every layer
    std::vector<Matrix> dropout_masks;    // scaled keep masks per hidden layer; empty if unused
    Matrix outputs;
    std::vector<int> layer_dims;
    std::uint64_t revision = 0;
};

struct ForwardResult {
    Matrix outputs;
    ForwardTape tape;
};

/**
 * Runs the network on a batch (one sample per row).
 *
 * In train mode with a positive dropout rate, `rng` draws the dropout masks and
 * must not be null. Outside train mode the pass is deterministic.
 */
ForwardResult forward(const MlpModel& model, const Matrix& batch, Rng* rng = nullptr);

/// Inference-only forward pass: no tape, no dropout.
Matrix predict(const MlpModel& model, const Matrix& batch);

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<Vector> biases;
    Matrix input;  // d loss / d batch

    static Gradients zeros_like(const MlpModel& model);
};

/// Backpropagates `output_grad` (d loss / d outputs) through the head and every layer.
Gradients backward(const MlpModel& model, const ForwardTape& tape, const Matrix& output_grad);

/// Same as backward() but starts from d loss / d logits, skipping the head.
Gradients backward_from_logits(const MlpModel& model, const ForwardTape& tape, const Matrix& logit_grad);

struct AdamState {
    std::vector<Matrix> first_moment_w, second_moment_w;
    std::vector<Vector> first_moment_b, second_moment_b;
    std::int64_t step_count = 0;
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_model(const MlpModel& model, double lr);
};

/// One bias-corrected Adam update. Throws NumericError (leaving model and state untouched)
/// if any gradient entry is not finite.
void adam_step(MlpModel& model, AdamState& state, const Gradients& grads);

namespace activations {

double softplus(double z);
double sigmoid(double z);
void softmax_rows(Matrix& logits);

}  // namespace activations

}  // namespace dtpm

#endif
