#include "dtpm/models.hpp"

#include "dtpm/errors.hpp"
#include "dtpm/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace dtpm {

std::string_view to_string(Method method) {
    switch (method) {
    case Method::Analytic:
        return "analytic";
    case Method::NonParametric:
        return "nonparam";
    case Method::InvGamma:
        return "invgamma";
    case Method::Categorical:
        return "categorical";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    if (name == "analytic") {
        return Method::Analytic;
    }
    if (name == "nonparam") {
        return Method::NonParametric;
    }
    if (name == "invgamma") {
        return Method::InvGamma;
    }
    if (name == "categorical") {
        return Method::Categorical;
    }
    throw ConfigError("unknown method '" + std::string(name) + "' (expected analytic, nonparam, invgamma, categorical)");
}

bool is_parametric(Method method) {
    return method == Method::InvGamma || method == Method::Categorical;
}

void TrainConfig::validate() const {
    if (epochs < 1 || batch_size < 1) {
        throw ConfigError("epochs and batch size must be positive");
    }
    if (!(lr > 0.0) || !std::isfinite(lr)) {
        throw ConfigError("learning rate must be positive");
    }
    if (!(dropout >= 0.0 && dropout < 1.0)) {
        throw ConfigError("dropout must lie in [0, 1)");
    }
    if (timesteps < 2) {
        throw ConfigError("timesteps must be at least 2");
    }
    if (!(beta_hi > 0.0 && beta_hi < 1.0)) {
        throw ConfigError("beta_hi must lie in (0, 1)");
    }
    if (bins < 1 || bins > timesteps) {
        throw ConfigError("bins must lie in [1, timesteps]");
    }
    for (int h : hidden) {
        if (h < 1) {
            throw ConfigError("hidden layer sizes must be positive");
        }
    }
}

const MlpModel& network(const DtpmModel& model) {
    return std::visit([](const auto& m) -> const MlpModel& { return m.mlp; }, model);
}

const Standardizer& standardizer(const DtpmModel& model) {
    return std::visit([](const auto& m) -> const Standardizer& { return m.standardizer; }, model);
}

const DiffusionSchedule& schedule(const DtpmModel& model) {
    return std::visit([](const auto& m) -> const DiffusionSchedule& { return m.schedule; }, model);
}

double final_loss(const DtpmModel& model) {
    return std::visit([](const auto& m) { return m.final_loss; }, model);
}

LossAndGrad inv_gamma_loss(const Matrix& b_pred, std::span<const double> sigma2, double shape) {
    if (b_pred.cols() != 1 || static_cast<std::size_t>(b_pred.rows()) != sigma2.size() || sigma2.empty()) {
        throw DimensionError("inverse-Gamma loss expects an n x 1 prediction and n variances");
    }
    if (!(shape > 0.0)) {
        throw DomainError("inverse-Gamma shape must be positive");
    }
    const double n = static_cast<double>(sigma2.size());
    LossAndGrad out;
    out.grad.resize(b_pred.rows(), 1);
    double total = 0.0;
    for (std::size_t i = 0; i < sigma2.size(); ++i) {
        const double b = b_pred(static_cast<Eigen::Index>(i), 0);
        const double s2 = sigma2[i];
        if (!(b > 0.0) || !(s2 > 0.0)) {
            throw DomainError("inverse-Gamma loss needs positive scale and variance");
        }
        total += -(shape * std::log(b) - (shape + 1.0) * std::log(s2) - b / s2);
        out.grad(static_cast<Eigen::Index>(i), 0) = -(shape / b - 1.0 / s2) / n;
    }
    out.loss = total / n;
    return out;
}

LossAndGrad categorical_loss(const Matrix& logits, std::span<const int> targets) {
    if (static_cast<std::size_t>(logits.rows()) != targets.size() || targets.empty()) {
        throw DimensionError("categorical loss expects one target per logit row");
    }
    const double n = static_cast<double>(targets.size());
    LossAndGrad out;
    out.grad = logits;
    activations::softmax_rows(out.grad);
    double total = 0.0;
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        const int target = targets[static_cast<std::size_t>(r)];
        if (target < 0 || target >= logits.cols()) {
            throw ContractError("categorical target out of range");
        }
        const auto row = logits.row(r);
        const double top = row.maxCoeff();
        const double log_norm = top + std::log((row.array() - top).exp().sum());
        total += log_norm - row(target);
        out.grad(r, target) -= 1.0;
    }
    out.grad /= n;
    out.loss = total / n;
    return out;
}

int categorical_target(int t, int timesteps, int bins) {
    if (bins < 1 || bins > timesteps) {
        throw ContractError("bins must lie in [1, timesteps]");
    }
    if (t < 0 || t >= timesteps) {
        throw ContractError("timestep " + std::to_string(t) + " outside [0, " + std::to_string(timesteps) + ")");
    }
    return static_cast<int>(static_cast<long long>(t) * bins / timesteps);
}

namespace {

struct Trainer {
    Method method;
    const Matrix& data;
    const TrainConfig& config;
    DiffusionSchedule sched;
    double shape = 0.0;
    Rng rng;
    MlpModel mlp;
    AdamState adam;

    Trainer(Method m, const Matrix& x, const TrainConfig& cfg)
        : method(m), data(x), config(cfg), sched(build_schedule(cfg.timesteps, cfg.beta_hi)),
          rng(make_rng(cfg.seed, 0x7EA1)) {
        std::vector<int> dims;
        dims.push_back(static_cast<int>(x.cols()));
        dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
        const bool categorical = m == Method::Categorical;
        dims.push_back(categorical ? cfg.bins : 1);
        mlp = make_mlp(dims, categorical ? OutputHead::Softmax : OutputHead::Softplus, cfg.dropout, rng);
        mlp.train_mode = true;
        adam = AdamState::for_model(mlp, cfg.lr);
        shape = shape_for_dimension(static_cast<int>(x.cols()));
    }

    // One optimizer step on the given rows; returns the batch-mean loss.
    double step(std::span<const std::size_t> rows, int epoch, int batch_no) {
        const auto n = static_cast<Eigen::Index>(rows.size());
        const Eigen::Index d = data.cols();
        Matrix noisy(n, d);
        std::vector<double> sigma2(rows.size());
        std::vector<int> targets(rows.size());
        std::uniform_int_distribution<int> pick_t(0, config.timesteps - 1);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (Eigen::Index i = 0; i < n; ++i) {
            const int t = pick_t(rng);
            const double sigma = sched.sigma(t);
            const auto src = data.row(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)]));
            for (Eigen::Index c = 0; c < d; ++c) {
                noisy(i, c) = src(c) + sigma * normal(rng);
            }
            sigma2[static_cast<std::size_t>(i)] = sched.sigma2(t);
            targets[static_cast<std::size_t>(i)] = method == Method::Categorical
                                                       ? categorical_target(t, config.timesteps, config.bins)
                                                       : 0;
        }

        ForwardResult fwd = forward(mlp, noisy, &rng);
        LossAndGrad lg;
        Gradients grads;
        try {
            if (method == Method::Categorical) {
                lg = categorical_loss(fwd.tape.pre_activations.back(), targets);
                grads = backward_from_logits(mlp, fwd.tape, lg.grad);
            } else {
                lg = inv_gamma_loss(fwd.outputs, sigma2, shape);
                grads = backward(mlp, fwd.tape, lg.grad);
            }
            if (!std::isfinite(lg.loss)) {
                throw NumericError("loss is not finite");
            }
            adam_step(mlp, adam, grads);
        } catch (const Error& e) {
            throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batch_no) + ": " + e.what());
        }
        return lg.loss;
    }
};

}  // namespace

DtpmModel train(Method method, const Matrix& standardized_train, const Standardizer& stdz, const TrainConfig& config,
                const EpochCallback& on_epoch) {
    if (!is_parametric(method)) {
        throw ConfigError("method '" + std::string(to_string(method)) + "' has no trainable model");
    }
    config.validate();
    if (standardized_train.rows() == 0 || standardized_train.cols() == 0) {
        throw DataError("training data is empty");
    }
    if (!standardized_train.allFinite()) {
        throw DataError("training data contains non-finite values");
    }
    if (stdz.dim() != standardized_train.cols()) {
        throw DimensionError("standardizer width does not match training data");
    }

    Trainer trainer(method, standardized_train, config);
    const std::size_t n = static_cast<std::size_t>(standardized_train.rows());
    const std::size_t batch = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    double epoch_loss = 0.0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), trainer.rng);
        double weighted = 0.0;
        int batch_no = 0;
        for (std::size_t start = 0; start < n; start += batch, ++batch_no) {
            const std::size_t len = std::min(batch, n - start);
            const double loss = trainer.step(std::span<const std::size_t>(order).subspan(start, len), epoch, batch_no);
            weighted += loss * static_cast<double>(len);
        }
        epoch_loss = weighted / static_cast<double>(n);
        if (on_epoch) {
            on_epoch(epoch, epoch_loss);
        }
    }

    trainer.mlp.train_mode = false;
    if (method == Method::Categorical) {
        return CategoricalModel{std::move(trainer.mlp), config.bins, std::move(trainer.sched), stdz, epoch_loss};
    }
    return InvGammaModel{std::move(trainer.mlp), trainer.shape, std::move(trainer.sched), stdz, epoch_loss};
}

namespace {

struct ScoreVisitor {
    const Matrix& z;

    Vector operator()(const InvGammaModel& m) const {
        const Matrix b = predict(m.mlp, z);
        return b.col(0) / (m.shape + 1.0);
    }

    Vector operator()(const CategoricalModel& m) const {
        const Matrix p = predict(m.mlp, z);
        const Vector bin_index = Vector::LinSpaced(m.bins, 0.0, static_cast<double>(m.bins - 1));
        return p * bin_index;
    }
};

// d score / d outputs for a single row.
Matrix score_output_grad(const DtpmModel& model) {
    if (const auto* ig = std::get_if<InvGammaModel>(&model)) {
        return Matrix::Constant(1, 1, 1.0 / (ig->shape + 1.0));
    }
    const auto& cat = std::get<CategoricalModel>(model);
    Matrix g(1, cat.bins);
    for (int k = 0; k < cat.bins; ++k) {
        g(0, k) = static_cast<double>(k);
    }
    return g;
}

}  // namespace

Vector score_standardized(const DtpmModel& model, const Matrix& z) {
    if (z.cols() != network(model).input_dim()) {
        throw DataError("input width " + std::to_string(z.cols()) + " does not match model width " +
                        std::to_string(network(model).input_dim()));
    }
    return std::visit(ScoreVisitor{z}, model);
}

Vector score_batch(const DtpmModel& model, const Matrix& raw) {
    if (raw.cols() != standardizer(model).dim()) {
        throw DataError("input width " + std::to_string(raw.cols()) + " does not match model width " +
                        std::to_string(standardizer(model).dim()));
    }
    return score_standardized(model, standardizer(model).apply(raw));
}

double score(const DtpmModel& model, const Vector& raw) {
    return score_batch(model, Matrix(raw.transpose()))[0];
}

Vector score_input_gradient(const DtpmModel& model, const Vector& z) {
    const MlpModel& mlp = network(model);
    if (z.size() != mlp.input_dim()) {
        throw DataError("input width does not match model width");
    }
    MlpModel eval = mlp;
    eval.train_mode = false;
    const ForwardResult fwd = forward(eval, Matrix(z.transpose()));
    const Gradients g = backward(eval, fwd.tape, score_output_grad(model));
    return g.input.row(0).transpose();
}

DenoiseResult denoise(const DtpmModel& model, const Vector& raw, int steps, double step_size) {
    if (steps < 1) {
        throw ConfigError("denoise needs at least one step");
    }
    if (!(step_size > 0.0)) {
        throw ConfigError("denoise step size must be positive");
    }
    const Standardizer& stdz = standardizer(model);
    Vector z = stdz.apply(raw);
    auto score_of = [&](const Vector& v) { return score_standardized(model, Matrix(v.transpose()))[0]; };

    DenoiseResult out;
    out.trajectory.push_back(raw);
    out.scores.push_back(score_of(z));

    int increases = 0;
    for (int s = 0; s < steps; ++s) {
        const Vector grad = score_input_gradient(model, z);
        if (!grad.allFinite()) {
            out.stop = DenoiseStop::NonFiniteGradient;
            break;
        }
        z -= step_size * grad;
        const double value = score_of(z);
        increases = value > out.scores.back() ? increases + 1 : 0;
        out.trajectory.push_back(stdz.invert(z));
        out.scores.push_back(value);
        if (increases == 2) {
            out.trajectory.resize(out.trajectory.size() - 2);
            out.scores.resize(out.scores.size() - 2);
            out.stop = DenoiseStop::ScoreIncreased;
            break;
        }
    }
    return out;
}

}  // namespace dtpm
