#include "dtpm/mlp.hpp"

#include "dtpm/errors.hpp"

#include <cmath>
#include <string>

namespace dtpm {

std::string_view to_string(OutputHead head) {
    switch (head) {
    case OutputHead::Softplus:
        return "softplus";
    case OutputHead::Softmax:
        return "softmax";
    }
    return "unknown";
}

OutputHead parse_output_head(std::string_view name) {
    if (name == "softplus") {
        return OutputHead::Softplus;
    }
    if (name == "softmax") {
        return OutputHead::Softmax;
    }
    throw DataError("unknown output head '" + std::string(name) + "'");
}

std::size_t MlpModel::parameter_count() const {
    std::size_t total = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        total += static_cast<std::size_t>(weights[i].size() + biases[i].size());
    }
    return total;
}

MlpModel make_mlp(std::vector<int> layer_dims, OutputHead head, double dropout_rate, Rng& rng) {
    if (layer_dims.size() < 2) {
        throw ConfigError("an MLP needs at least an input and an output width");
    }
    for (int width : layer_dims) {
        if (width < 1) {
            throw ConfigError("layer widths must be positive");
        }
    }
    if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
        throw ConfigError("dropout rate must lie in [0, 1)");
    }

    MlpModel model;
    model.layer_dims = std::move(layer_dims);
    model.head = head;
    model.dropout_rate = dropout_rate;

    for (std::size_t i = 0; i + 1 < model.layer_dims.size(); ++i) {
        const int fan_in = model.layer_dims[i];
        const int fan_out = model.layer_dims[i + 1];
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        Matrix w(fan_out, fan_in);
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                w(r, c) = dist(rng);
            }
        }
        model.weights.push_back(std::move(w));
        model.biases.push_back(Vector::Zero(fan_out));
    }
    return model;
}

void validate(const MlpModel& model) {
    if (model.layer_dims.size() < 2 || model.weights.size() + 1 != model.layer_dims.size() ||
        model.biases.size() != model.weights.size()) {
        throw DimensionError("layer count does not match layer_dims");
    }
    for (std::size_t i = 0; i < model.weights.size(); ++i) {
        const auto& w = model.weights[i];
        if (w.rows() != model.layer_dims[i + 1] || w.cols() != model.layer_dims[i] ||
            model.biases[i].size() != model.layer_dims[i + 1]) {
            throw DimensionError("layer " + std::to_string(i) + " has shape inconsistent with layer_dims");
        }
        if (!w.allFinite() || !model.biases[i].allFinite()) {
            throw NumericError("layer " + std::to_string(i) + " holds non-finite parameters");
        }
    }
    if (!(model.dropout_rate >= 0.0 && model.dropout_rate < 1.0)) {
        throw ConfigError("dropout rate must lie in [0, 1)");
    }
}

namespace activations {

double softplus(double z) {
    return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

void softmax_rows(Matrix& logits) {
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        const double top = row.maxCoeff();
        row = (row.array() - top).exp();
        row /= row.sum();
    }
}

}  // namespace activations

namespace {

void check_batch(const MlpModel& model, const Matrix& batch) {
    if (batch.cols() != model.input_dim()) {
        throw DimensionError("batch width " + std::to_string(batch.cols()) + " does not match input width " +
                             std::to_string(model.input_dim()));
    }
    if (!batch.allFinite()) {
        throw NumericError("batch contains non-finite values");
    }
}

void affine(const Matrix& input, const Matrix& w, const Vector& b, Matrix& out) {
    out.noalias() = input * w.transpose();
    out.rowwise() += b.transpose();
}

Matrix apply_head(OutputHead head, const Matrix& logits) {
    Matrix out = logits;
    if (head == OutputHead::Softplus) {
        out = out.unaryExpr([](double z) { return activations::softplus(z); });
    } else {
        activations::softmax_rows(out);
    }
    return out;
}

void check_tape(const MlpModel& model, const ForwardTape& tape, const Matrix& grad, Eigen::Index expected_cols) {
    if (tape.layer_dims != model.layer_dims || tape.revision != model.revision ||
        tape.pre_activations.size() != model.num_layers() || tape.inputs.size() != model.num_layers()) {
        throw ContractError("forward tape does not belong to the current model parameters");
    }
    if (grad.rows() != tape.outputs.rows() || grad.cols() != expected_cols) {
        throw DimensionError("gradient shape does not match the forward outputs");
    }
}

}  // namespace

ForwardResult forward(const MlpModel& model, const Matrix& batch, Rng* rng) {
    check_batch(model, batch);
    const bool use_dropout = model.train_mode && model.dropout_rate > 0.0;
    if (use_dropout && rng == nullptr) {
        throw ContractError("train-mode forward with dropout needs a random generator");
    }

    ForwardResult result;
    ForwardTape& tape = result.tape;
    tape.layer_dims = model.layer_dims;
    tape.revision = model.revision;
    tape.inputs.reserve(model.num_layers());
    tape.pre_activations.reserve(model.num_layers());

    const double keep = 1.0 - model.dropout_rate;
    std::bernoulli_distribution keep_draw(keep);

    Matrix current = batch;
    for (std::size_t i = 0; i < model.num_layers(); ++i) {
        Matrix z;
        affine(current, model.weights[i], model.biases[i], z);
        tape.inputs.push_back(std::move(current));
        const bool last = i + 1 == model.num_layers();
        if (last) {
            tape.pre_activations.push_back(std::move(z));
            break;
        }
        Matrix h = z.cwiseMax(0.0);
        tape.pre_activations.push_back(std::move(z));
        if (use_dropout) {
            Matrix mask(h.rows(), h.cols());
            for (Eigen::Index r = 0; r < mask.rows(); ++r) {
                for (Eigen::Index c = 0; c < mask.cols(); ++c) {
                    mask(r, c) = keep_draw(*rng) ? 1.0 / keep : 0.0;
                }
            }
            h.array() *= mask.array();
            tape.dropout_masks.push_back(std::move(mask));
        }
        current = std::move(h);
    }

    tape.outputs = apply_head(model.head, tape.pre_activations.back());
    result.outputs = tape.outputs;
    return result;
}

Matrix predict(const MlpModel& model, const Matrix& batch) {
    check_batch(model, batch);
    Matrix current = batch;
    Matrix z;
    for (std::size_t i = 0; i < model.num_layers(); ++i) {
        affine(current, model.weights[i], model.biases[i], z);
        if (i + 1 < model.num_layers()) {
            current = z.cwiseMax(0.0);
        }
    }
    return apply_head(model.head, z);
}

Gradients Gradients::zeros_like(const MlpModel& model) {
    Gradients g;
    for (std::size_t i = 0; i < model.num_layers(); ++i) {
        g.weights.push_back(Matrix::Zero(model.weights[i].rows(), model.weights[i].cols()));
        g.biases.push_back(Vector::Zero(model.biases[i].size()));
    }
    return g;
}

Gradients backward_from_logits(const MlpModel& model, const ForwardTape& tape, const Matrix& logit_grad) {
    check_tape(model, tape, logit_grad, model.output_dim());

    Gradients grads = Gradients::zeros_like(model);
    Matrix delta = logit_grad;
    for (std::size_t li = model.num_layers(); li-- > 0;) {
        const Matrix& input = tape.inputs[li];
        grads.weights[li].noalias() = delta.transpose() * input;
        grads.biases[li] = delta.colwise().sum().transpose();
        Matrix upstream = delta * model.weights[li];
        if (li == 0) {
            grads.input = std::move(upstream);
            break;
        }
        // Layer li's input is dropout(relu(pre_activations[li - 1])).
        if (!tape.dropout_masks.empty()) {
            upstream.array() *= tape.dropout_masks[li - 1].array();
        }
        upstream.array() *= (tape.pre_activations[li - 1].array() > 0.0).cast<double>();
        delta = std::move(upstream);
    }
    return grads;
}

Gradients backward(const MlpModel& model, const ForwardTape& tape, const Matrix& output_grad) {
    check_tape(model, tape, output_grad, model.output_dim());

    const Matrix& logits = tape.pre_activations.back();
    Matrix logit_grad(output_grad.rows(), output_grad.cols());
    if (model.head == OutputHead::Softplus) {
        logit_grad = output_grad.array() * logits.unaryExpr([](double z) { return activations::sigmoid(z); }).array();
    } else {
        // Softmax Jacobian-vector product: p * (g - <g, p>).
        const Matrix& p = tape.outputs;
        const Vector inner = (output_grad.array() * p.array()).rowwise().sum();
        logit_grad = p.array() * (output_grad.colwise() - inner).array();
    }
    return backward_from_logits(model, tape, logit_grad);
}

AdamState AdamState::for_model(const MlpModel& model, double lr) {
    AdamState state;
    state.lr = lr;
    for (std::size_t i = 0; i < model.num_layers(); ++i) {
        state.first_moment_w.push_back(Matrix::Zero(model.weights[i].rows(), model.weights[i].cols()));
        state.second_moment_w.push_back(Matrix::Zero(model.weights[i].rows(), model.weights[i].cols()));
        state.first_moment_b.push_back(Vector::Zero(model.biases[i].size()));
        state.second_moment_b.push_back(Vector::Zero(model.biases[i].size()));
    }
    return state;
}

namespace {

template <typename Param, typename Grad>
void adam_update(Param& param, Param& m, Param& v, const Grad& g, const AdamState& s, double correction1,
                 double correction2) {
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
    param.array() -= s.lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + s.eps);
}

}  // namespace

void adam_step(MlpModel& model, AdamState& state, const Gradients& grads) {
    if (grads.weights.size() != model.num_layers() || grads.biases.size() != model.num_layers() ||
        state.first_moment_w.size() != model.num_layers() || state.first_moment_b.size() != model.num_layers()) {
        throw DimensionError("gradient / optimizer state layer count mismatch");
    }
    for (std::size_t i = 0; i < model.num_layers(); ++i) {
        if (grads.weights[i].rows() != model.weights[i].rows() || grads.weights[i].cols() != model.weights[i].cols() ||
            grads.biases[i].size() != model.biases[i].size() ||
            state.first_moment_w[i].rows() != model.weights[i].rows() ||
            state.first_moment_w[i].cols() != model.weights[i].cols()) {
            throw DimensionError("gradient shape mismatch in layer " + std::to_string(i));
        }
        if (!grads.weights[i].allFinite() || !grads.biases[i].allFinite()) {
            throw NumericError("non-finite gradient in layer " + std::to_string(i));
        }
    }

    ++state.step_count;
    const double correction1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step_count));
    const double correction2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step_count));
    for (std::size_t i = 0; i < model.num_layers(); ++i) {
        adam_update(model.weights[i], state.first_moment_w[i], state.second_moment_w[i], grads.weights[i], state,
                    correction1, correction2);
        adam_update(model.biases[i], state.first_moment_b[i], state.second_moment_b[i], grads.biases[i], state,
                    correction1, correction2);
    }
    ++model.revision;
}

}  // namespace dtpm
