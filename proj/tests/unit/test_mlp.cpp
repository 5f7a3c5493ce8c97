#include "dtpm/errors.hpp"
#include "dtpm/mlp.hpp"
#include "support/gradcheck.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>

using namespace dtpm;
using namespace dtpm::testing;

namespace {

MlpModel identity_net(int d, OutputHead head) {
    MlpModel m;
    m.layer_dims = {d, d};
    m.weights.push_back(Matrix::Identity(d, d));
    m.biases.push_back(Vector::Zero(d));
    m.head = head;
    return m;
}

// Straight-line re-implementation: nested loops over std::vector, no Eigen products.
std::vector<double> reference_forward(const MlpModel& m, const std::vector<double>& x) {
    std::vector<double> a = x;
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        const auto& w = m.weights[l];
        std::vector<double> z(static_cast<std::size_t>(w.rows()));
        for (Eigen::Index r = 0; r < w.rows(); ++r) {
            double acc = m.biases[l][r];
            for (Eigen::Index c = 0; c < w.cols(); ++c) {
                acc += w(r, c) * a[static_cast<std::size_t>(c)];
            }
            z[static_cast<std::size_t>(r)] = acc;
        }
        if (l + 1 < m.num_layers()) {
            for (auto& v : z) {
                v = v > 0.0 ? v : 0.0;
            }
        }
        a = z;
    }
    if (m.head == OutputHead::Softplus) {
        for (auto& v : a) {
            v = std::log(1.0 + std::exp(v));
        }
    } else {
        double total = 0.0;
        for (double v : a) {
            total += std::exp(v);
        }
        for (auto& v : a) {
            v = std::exp(v) / total;
        }
    }
    return a;
}

MlpModel scalar_net(double w) {
    MlpModel m;
    m.layer_dims = {1, 1};
    m.weights.push_back(Matrix::Constant(1, 1, w));
    m.biases.push_back(Vector::Zero(1));
    return m;
}

Gradients scalar_grad(double g) {
    Gradients grads;
    grads.weights.push_back(Matrix::Constant(1, 1, g));
    grads.biases.push_back(Vector::Zero(1));
    return grads;
}

}  // namespace

TEST_CASE("softplus head on zero input gives ln 2") {
    const MlpModel m = identity_net(3, OutputHead::Softplus);
    const Matrix out = predict(m, Matrix::Zero(2, 3));
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        CHECK(out.data()[i] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
    }
}

TEST_CASE("softmax head with zero logits is uniform") {
    MlpModel m;
    m.layer_dims = {4, 7};
    m.weights.push_back(Matrix::Zero(7, 4));
    m.biases.push_back(Vector::Zero(7));
    m.head = OutputHead::Softmax;
    const Matrix out = predict(m, Matrix::Ones(3, 4));
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        CHECK(std::abs(out.data()[i] - 1.0 / 7.0) < 1e-15);
    }
}

TEST_CASE("forward matches a straight-line re-implementation") {
    Rng rng = make_rng(11);
    for (OutputHead head : {OutputHead::Softplus, OutputHead::Softmax}) {
        const MlpModel m = make_mlp({5, 9, 7, 4}, head, 0.0, rng);
        std::normal_distribution<double> normal(0.0, 2.0);
        Matrix x(6, 5);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            x.data()[i] = normal(rng);
        }
        const Matrix out = forward(m, x).outputs;
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            std::vector<double> row(x.row(r).data(), x.row(r).data() + x.cols());
            const auto expected = reference_forward(m, row);
            for (std::size_t c = 0; c < expected.size(); ++c) {
                CHECK(std::abs(out(r, static_cast<Eigen::Index>(c)) - expected[c]) < 1e-12);
            }
        }
    }
}

TEST_CASE("output head invariants hold on random inputs") {
    Rng rng = make_rng(12);
    const MlpModel soft = make_mlp({6, 16, 7}, OutputHead::Softmax, 0.0, rng);
    const MlpModel plus = make_mlp({6, 16, 1}, OutputHead::Softplus, 0.0, rng);
    std::normal_distribution<double> normal(0.0, 5.0);
    Matrix x(200, 6);
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        x.data()[i] = normal(rng);
    }
    const Matrix p = predict(soft, x);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        CHECK(std::abs(p.row(r).sum() - 1.0) < 1e-9);
        CHECK(p.row(r).minCoeff() >= 0.0);
    }
    const Matrix b = predict(plus, x);
    CHECK(b.minCoeff() > 0.0);
    CHECK(b.allFinite());
}

TEST_CASE("glorot initialization stays inside its bounds and validates") {
    Rng rng = make_rng(13);
    const MlpModel m = make_mlp({8, 256, 512, 256, 7}, OutputHead::Softmax, 0.5, rng);
    CHECK_NOTHROW(validate(m));
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        const double limit = std::sqrt(6.0 / (m.layer_dims[l] + m.layer_dims[l + 1]));
        CHECK(m.weights[l].cwiseAbs().maxCoeff() <= limit);
        CHECK(m.biases[l].isZero());
    }
    CHECK(m.parameter_count() == 8 * 256 + 256 + 256 * 512 + 512 + 512 * 256 + 256 + 256 * 7 + 7);
}

TEST_CASE("forward rejects bad input") {
    Rng rng = make_rng(14);
    MlpModel m = make_mlp({3, 4, 1}, OutputHead::Softplus, 0.5, rng);
    CHECK_THROWS_AS(forward(m, Matrix::Zero(2, 4)), DimensionError);
    Matrix bad = Matrix::Zero(2, 3);
    bad(1, 2) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(forward(m, bad), NumericError);
    m.train_mode = true;
    CHECK_THROWS_AS(forward(m, Matrix::Zero(2, 3)), ContractError);
    CHECK_THROWS_AS(make_mlp({3}, OutputHead::Softplus, 0.0, rng), ConfigError);
    CHECK_THROWS_AS(make_mlp({3, 1}, OutputHead::Softplus, 1.0, rng), ConfigError);
}

TEST_CASE("eval mode is deterministic even with dropout configured") {
    Rng rng = make_rng(15);
    const MlpModel m = make_mlp({4, 32, 3}, OutputHead::Softmax, 0.5, rng);
    const Matrix x = Matrix::Random(5, 4);
    Rng a = make_rng(1);
    Rng b = make_rng(2);
    CHECK(forward(m, x, &a).outputs == forward(m, x, &b).outputs);
    CHECK(forward(m, x).outputs == predict(m, x));
}

TEST_CASE("zero upstream gradient yields zero parameter gradients") {
    Rng rng = make_rng(16);
    const MlpModel m = make_mlp({4, 8, 3}, OutputHead::Softmax, 0.0, rng);
    const ForwardResult fwd = forward(m, Matrix::Random(5, 4));
    const Gradients g = backward(m, fwd.tape, Matrix::Zero(5, 3));
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        CHECK(g.weights[l].isZero(0.0));
        CHECK(g.biases[l].isZero(0.0));
    }
    CHECK(g.input.isZero(0.0));
}

TEST_CASE("single linear layer squared error gradient is 2(Wx+b-y)x^T") {
    Rng rng = make_rng(17);
    const MlpModel m = make_mlp({3, 2}, OutputHead::Softplus, 0.0, rng);
    Vector x(3);
    x << 0.5, -1.25, 2.0;
    Vector y(2);
    y << 0.3, -0.7;
    const ForwardResult fwd = forward(m, Matrix(x.transpose()));
    const Vector residual = m.weights[0] * x + m.biases[0] - y;
    const Gradients g = backward_from_logits(m, fwd.tape, Matrix(2.0 * residual.transpose()));
    const Matrix expected = 2.0 * residual * x.transpose();
    CHECK((g.weights[0] - expected).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((g.biases[0] - 2.0 * residual).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("backprop agrees with central finite differences") {
    Rng rng = make_rng(18);
    const std::vector<std::vector<int>> shapes = {{8, 16, 8, 4}, {3, 5, 2}, {6, 12, 7}};
    for (const auto& dims : shapes) {
        for (LossKind kind : {LossKind::InvGamma, LossKind::CrossEntropyLogits, LossKind::CrossEntropyProbs}) {
            std::vector<int> layer_dims = dims;
            if (kind == LossKind::InvGamma) {
                layer_dims.back() = 1;
            }
            const OutputHead head = kind == LossKind::InvGamma ? OutputHead::Softplus : OutputHead::Softmax;
            const MlpModel m = make_mlp(layer_dims, head, 0.0, rng);
            const LossProblem p = random_problem(m, 10, rng);
            const GradCheckResult res = check_parameter_gradients(m, p, kind, 100, rng);
            CAPTURE(layer_dims.size());
            CHECK(res.checked == 100);
            CHECK(res.max_rel_error < 1e-4);
        }
    }
}

TEST_CASE("backward reuses the dropout masks recorded on the tape") {
    Rng rng = make_rng(19);
    MlpModel m = make_mlp({5, 12, 9, 1}, OutputHead::Softplus, 0.3, rng);
    m.train_mode = true;
    LossProblem p = random_problem(m, 6, rng);

    // Reseeding the generator reproduces the masks, so the loss is a smooth function of the parameters.
    auto loss_at = [&](const MlpModel& model) {
        Rng masks = make_rng(99);
        return inv_gamma_loss(forward(model, p.x, &masks).outputs, p.sigma2, p.shape).loss;
    };
    Rng masks = make_rng(99);
    const ForwardResult fwd = forward(m, p.x, &masks);
    const Gradients g = backward(m, fwd.tape, inv_gamma_loss(fwd.outputs, p.sigma2, p.shape).grad);

    double worst = 0.0;
    const double h = 1e-5;
    for (std::size_t l = 0; l < m.num_layers(); ++l) {
        for (Eigen::Index i = 0; i < m.weights[l].size(); i += 3) {
            double& w = m.weights[l].data()[i];
            const double saved = w;
            w = saved + h;
            const double up = loss_at(m);
            w = saved - h;
            const double down = loss_at(m);
            w = saved;
            worst = std::max(worst, relative_error(g.weights[l].data()[i], (up - down) / (2 * h)));
        }
    }
    CHECK(worst < 1e-4);
}

TEST_CASE("inverted dropout preserves the expected logits") {
    Rng rng = make_rng(20);
    MlpModel m = make_mlp({4, 32, 3}, OutputHead::Softmax, 0.5, rng);
    const Matrix x = Matrix::Random(1, 4);
    const Matrix reference = forward(m, x).tape.pre_activations.back();

    m.train_mode = true;
    const int draws = 10000;
    Vector sum = Vector::Zero(3);
    Vector sum_sq = Vector::Zero(3);
    Rng masks = make_rng(21);
    for (int i = 0; i < draws; ++i) {
        const Vector z = forward(m, x, &masks).tape.pre_activations.back().row(0).transpose();
        sum += z;
        sum_sq += z.cwiseProduct(z);
    }
    const Vector mean = sum / draws;
    const Vector var = sum_sq / draws - mean.cwiseProduct(mean);
    for (int c = 0; c < 3; ++c) {
        const double stderr_ = std::sqrt(var[c] / draws);
        CHECK(std::abs(mean[c] - reference(0, c)) <= 3.0 * stderr_);
    }
}

TEST_CASE("stale tapes are rejected") {
    Rng rng = make_rng(22);
    MlpModel m = make_mlp({3, 4, 2}, OutputHead::Softmax, 0.0, rng);
    const ForwardResult fwd = forward(m, Matrix::Random(2, 3));
    AdamState state = AdamState::for_model(m, 0.01);
    adam_step(m, state, backward(m, fwd.tape, Matrix::Ones(2, 2)));
    CHECK_THROWS_AS(backward(m, fwd.tape, Matrix::Ones(2, 2)), ContractError);

    const MlpModel other = make_mlp({3, 5, 2}, OutputHead::Softmax, 0.0, rng);
    CHECK_THROWS_AS(backward(other, fwd.tape, Matrix::Ones(2, 2)), ContractError);
    const ForwardResult fresh = forward(m, Matrix::Random(2, 3));
    CHECK_THROWS_AS(backward(m, fresh.tape, Matrix::Ones(3, 2)), DimensionError);
}

TEST_CASE("adam with zero gradient and zero moments is a fixed point") {
    MlpModel m = scalar_net(0.75);
    AdamState state = AdamState::for_model(m, 0.1);
    adam_step(m, state, scalar_grad(0.0));
    CHECK(m.weights[0](0, 0) == 0.75);
    CHECK(state.step_count == 1);
}

TEST_CASE("adam first step moves by about lr") {
    MlpModel m = scalar_net(1.0);
    AdamState state = AdamState::for_model(m, 0.1);
    adam_step(m, state, scalar_grad(1.0));
    // 1 - 0.1 * 1 / (1 + 1e-8)
    CHECK(std::abs(m.weights[0](0, 0) - 0.900000000999999990) < 1e-12);
}

TEST_CASE("adam two steps match a scalar hand trace") {
    MlpModel m = scalar_net(1.0);
    AdamState state = AdamState::for_model(m, 0.1);
    adam_step(m, state, scalar_grad(1.0));
    adam_step(m, state, scalar_grad(0.5));
    CHECK(std::abs(m.weights[0](0, 0) - 0.80678203829816040791) < 1e-12);
    CHECK(state.step_count == 2);
    CHECK(m.revision == 2);
}

TEST_CASE("adam rejects non-finite gradients without touching parameters") {
    MlpModel m = scalar_net(1.0);
    AdamState state = AdamState::for_model(m, 0.1);
    CHECK_THROWS_AS(adam_step(m, state, scalar_grad(std::numeric_limits<double>::infinity())), NumericError);
    CHECK(m.weights[0](0, 0) == 1.0);
    CHECK(state.step_count == 0);
}

TEST_CASE("identical seeds give bit-identical optimization trajectories") {
    auto run = [] {
        Rng rng = make_rng(23);
        MlpModel m = make_mlp({4, 16, 3}, OutputHead::Softmax, 0.5, rng);
        m.train_mode = true;
        AdamState state = AdamState::for_model(m, 1e-2);
        const LossProblem p = random_problem(m, 8, rng);
        for (int step = 0; step < 20; ++step) {
            const ForwardResult fwd = forward(m, p.x, &rng);
            adam_step(m, state,
                      backward_from_logits(m, fwd.tape,
                                           categorical_loss(fwd.tape.pre_activations.back(), p.targets).grad));
        }
        return m;
    };
    const MlpModel a = run();
    const MlpModel b = run();
    for (std::size_t l = 0; l < a.num_layers(); ++l) {
        CHECK(a.weights[l] == b.weights[l]);
        CHECK(a.biases[l] == b.biases[l]);
    }
}
