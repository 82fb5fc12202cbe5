#include "doctest.h"

#include <cmath>

#include "rff/io.hpp"
#include "rff/nn.hpp"

using namespace rff;

namespace {

MLPModel single_layer(const Mat& w, const Vec& b, Activation act, OutputActivation out) {
    MLPModel m;
    m.layers.push_back({w, b, act, 0.0});
    m.output_activation = out;
    return m;
}

// Independent finite-difference gradient of the batch loss w.r.t. one
// parameter.
double fd_param(MLPModel model, std::span<const LabeledVector> batch, LossKind loss, size_t layer,
                bool bias, Eigen::Index r, Eigen::Index c, double h = 1e-5) {
    auto& target = model.layers[layer];
    double& slot = bias ? target.biases(r) : target.weights(r, c);
    const double orig = slot;
    slot = orig + h;
    const double up = batch_loss(model, batch, loss);
    slot = orig - h;
    const double down = batch_loss(model, batch, loss);
    slot = orig;
    return (up - down) / (2.0 * h);
}

MLPModel random_small_model(Rng& rng, int& input_width, LossKind loss) {
    const int depth = 1 + static_cast<int>(rng.integer(4));
    std::vector<int> widths;
    widths.push_back(1 + static_cast<int>(rng.integer(8)));
    for (int l = 0; l < depth; ++l) widths.push_back(1 + static_cast<int>(rng.integer(8)));
    if (loss == LossKind::cross_entropy) widths.back() = 1;
    input_width = widths.front();
    return make_mlp(widths, loss == LossKind::cross_entropy ? OutputActivation::sigmoid
                                                            : OutputActivation::identity,
                    0.0, rng.raw());
}

}  // namespace

TEST_CASE("forward: identity layer passes input through") {
    const Mat w = Mat::Identity(3, 3);
    const Vec b = Vec::Zero(3);
    MLPModel m = single_layer(w, b, Activation::identity, OutputActivation::identity);
    Vec v(3);
    v << 1.5, -2.0, 0.25;
    CHECK((forward(m, v) - v).norm() == 0.0);
}

TEST_CASE("forward: zero pre-activation through sigmoid gives 0.5") {
    MLPModel m = single_layer(Mat::Zero(1, 2), Vec::Zero(1), Activation::identity,
                              OutputActivation::sigmoid);
    Vec v(2);
    v << 3.0, -1.0;
    CHECK(forward(m, v)(0) == doctest::Approx(0.5));
}

TEST_CASE("forward: two-layer relu net matches hand evaluation") {
    MLPModel m;
    Mat w1(2, 2);
    w1 << 1.0, 2.0, -3.0, 0.5;
    Vec b1(2);
    b1 << 0.5, -0.25;
    Mat w2(1, 2);
    w2 << 2.0, -1.0;
    Vec b2(1);
    b2 << 0.125;
    m.layers.push_back({w1, b1, Activation::relu, 0.0});
    m.layers.push_back({w2, b2, Activation::identity, 0.0});
    m.output_activation = OutputActivation::identity;

    Vec x(2);
    x << 1.0, -1.0;
    // independent evaluation with plain arithmetic
    const double z1 = 1.0 * 1.0 + 2.0 * -1.0 + 0.5;
    const double z2 = -3.0 * 1.0 + 0.5 * -1.0 - 0.25;
    const double a1 = z1 > 0 ? z1 : 0.0;
    const double a2 = z2 > 0 ? z2 : 0.0;
    const double expected = 2.0 * a1 - 1.0 * a2 + 0.125;
    CHECK(forward(m, x)(0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("forward: repeated calls are identical") {
    MLPModel m = make_mlp({4, 5, 1}, OutputActivation::sigmoid, 0.0, 9);
    Rng rng(2);
    Vec x(4);
    for (Eigen::Index i = 0; i < 4; ++i) x(i) = rng.normal();
    const Vec a = forward(m, x);
    const Vec b = forward(m, x);
    CHECK((a - b).norm() == 0.0);
}

TEST_CASE("forward: width mismatch is rejected") {
    MLPModel m = make_mlp({4, 3, 1}, OutputActivation::sigmoid, 0.0, 9);
    CHECK_THROWS_AS(forward(m, Vec::Zero(5)), std::invalid_argument);
}

TEST_CASE("cross entropy matches its stated values") {
    Vec p1(1), l1(1);
    p1 << 1.0;
    l1 << 1.0;
    CHECK(loss_cross_entropy(p1, l1) == doctest::Approx(0.0));

    Vec p2(1), l2(1);
    p2 << std::exp(-1.0);
    l2 << 1.0;
    CHECK(loss_cross_entropy(p2, l2) == doctest::Approx(1.0).epsilon(1e-12));

    // only positive labels contribute; direct evaluation oracle
    Vec p3(2), l3(2);
    p3 << 0.9, 0.2;
    l3 << 1.0, 0.0;
    const double expected = (-std::log(0.9) + 0.0) / 2.0;
    CHECK(loss_cross_entropy(p3, l3) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(loss_cross_entropy(p3, l3) == doctest::Approx(0.05268).epsilon(1e-4));
}

TEST_CASE("cross entropy rejects empty and mismatched batches") {
    CHECK_THROWS_AS(loss_cross_entropy(Vec(), Vec()), std::invalid_argument);
    CHECK_THROWS_AS(loss_cross_entropy(Vec::Ones(2), Vec::Ones(3)), std::invalid_argument);
}

TEST_CASE("full binary cross entropy is zero iff predictions match labels") {
    Vec p(2), l(2);
    p << 1.0, 0.0;
    l << 1.0, 0.0;
    CHECK(loss_bce(p, l) == doctest::Approx(0.0));
    p << 0.7, 0.0;
    CHECK(loss_bce(p, l) > 0.0);
    // the positive-only form misses this case; the full loss does not
    Vec p0(1), l0(1);
    p0 << 0.7;
    l0 << 0.0;
    CHECK(loss_cross_entropy(p0, l0) == doctest::Approx(0.0));
    CHECK(loss_bce(p0, l0) > 0.0);
}

TEST_CASE("mse matches a brute-force oracle") {
    Vec a(2), b(2);
    a << 0.0, 0.0;
    b << 1.0, 0.0;
    CHECK(loss_mse(a, b) == doctest::Approx(0.5));
    CHECK(loss_mse(b, b) == doctest::Approx(0.0));

    Rng rng(4);
    Vec x(7), y(7);
    for (Eigen::Index i = 0; i < 7; ++i) {
        x(i) = rng.normal();
        y(i) = rng.normal();
    }
    double acc = 0.0;
    for (Eigen::Index i = 0; i < 7; ++i) acc += (y(i) - x(i)) * (y(i) - x(i));
    CHECK(loss_mse(x, y) == doctest::Approx(acc / 7.0).epsilon(1e-12));
    CHECK_THROWS_AS(loss_mse(x, Vec::Zero(3)), std::invalid_argument);
}

TEST_CASE("backward: zero weights and zero input leave only output bias gradients") {
    MLPModel m = make_mlp({3, 4, 1}, OutputActivation::sigmoid, 0.0, 5);
    for (auto& layer : m.layers) {
        layer.weights.setZero();
        layer.biases.setZero();
    }
    Vec x = Vec::Zero(3), t(1);
    t << 1.0;
    const LabeledVector ex{x, t};
    auto grads = backward(m, std::span<const LabeledVector>(&ex, 1), LossKind::cross_entropy);
    CHECK(grads[0].d_weights.norm() == 0.0);
    CHECK(grads[1].d_weights.norm() == 0.0);
    CHECK(grads[0].d_biases.norm() == 0.0);  // relu'(0) = 0 kills the hidden path
    CHECK(grads[1].d_biases(0) == doctest::Approx(0.5 - 1.0));  // sigmoid(0) - label
}

TEST_CASE("backward: duplicated example matches the single-example gradient") {
    MLPModel m = make_mlp({3, 4, 1}, OutputActivation::sigmoid, 0.0, 6);
    Rng rng(8);
    Vec x(3), t(1);
    for (Eigen::Index i = 0; i < 3; ++i) x(i) = rng.normal();
    t << 1.0;
    const LabeledVector ex{x, t};
    const std::vector<LabeledVector> two{ex, ex};
    auto g1 = backward(m, std::span<const LabeledVector>(&ex, 1), LossKind::cross_entropy);
    auto g2 = backward(m, two, LossKind::cross_entropy);
    for (size_t l = 0; l < g1.size(); ++l) {
        CHECK((g1[l].d_weights - g2[l].d_weights).norm() < 1e-14);
        CHECK((g1[l].d_biases - g2[l].d_biases).norm() < 1e-14);
    }
}

TEST_CASE("backward: analytic gradients match central finite differences") {
    Rng rng(123);
    for (int trial = 0; trial < 12; ++trial) {
        const LossKind loss = trial % 2 == 0 ? LossKind::cross_entropy : LossKind::mse;
        int input_width = 0;
        MLPModel m = random_small_model(rng, input_width, loss);

        std::vector<LabeledVector> batch;
        for (int i = 0; i < 3; ++i) {
            Vec x(input_width), t(m.output_width());
            for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = rng.normal();
            for (Eigen::Index k = 0; k < t.size(); ++k)
                t(k) = loss == LossKind::cross_entropy ? static_cast<double>(rng.integer(2))
                                                       : rng.normal();
            batch.push_back({std::move(x), std::move(t)});
        }

        auto grads = backward(m, batch, loss);
        for (size_t l = 0; l < m.layers.size(); ++l) {
            for (Eigen::Index r = 0; r < m.layers[l].weights.rows(); ++r)
                for (Eigen::Index c = 0; c < m.layers[l].weights.cols(); ++c) {
                    const double fd = fd_param(m, batch, loss, l, false, r, c);
                    const double an = grads[l].d_weights(r, c);
                    const double scale = std::max({std::abs(fd), std::abs(an), 1e-6});
                    CHECK(std::abs(fd - an) / scale < 1e-4);
                }
            for (Eigen::Index r = 0; r < m.layers[l].biases.size(); ++r) {
                const double fd = fd_param(m, batch, loss, l, true, r, 0);
                const double an = grads[l].d_biases(r);
                const double scale = std::max({std::abs(fd), std::abs(an), 1e-6});
                CHECK(std::abs(fd - an) / scale < 1e-4);
            }
        }
    }
}

TEST_CASE("input gradient: closed form for a linear model with mse") {
    // f(x) = W x, identity output, loss (1/m)|Wx - 0|^2 -> grad = (2/m) W^T W x
    Rng rng(9);
    Mat w(3, 4);
    for (Eigen::Index r = 0; r < 3; ++r)
        for (Eigen::Index c = 0; c < 4; ++c) w(r, c) = rng.normal();
    MLPModel m = single_layer(w, Vec::Zero(3), Activation::identity, OutputActivation::identity);
    Vec x(4);
    for (Eigen::Index i = 0; i < 4; ++i) x(i) = rng.normal();
    const Vec expected = 2.0 / 3.0 * w.transpose() * (w * x);
    const Vec got = input_gradient(m, x, Vec::Zero(3), LossKind::mse);
    CHECK((expected - got).norm() < 1e-12);
}

TEST_CASE("input gradient: constant model has zero gradient") {
    MLPModel m = single_layer(Mat::Zero(1, 4), Vec::Zero(1), Activation::identity,
                              OutputActivation::sigmoid);
    Vec x = Vec::Ones(4), t(1);
    t << 1.0;
    CHECK(input_gradient(m, x, t, LossKind::cross_entropy).norm() == 0.0);
}

TEST_CASE("input gradient: matches finite differences") {
    Rng rng(77);
    for (int trial = 0; trial < 6; ++trial) {
        int input_width = 0;
        MLPModel m = random_small_model(rng, input_width, LossKind::cross_entropy);
        Vec x(input_width), t(1);
        for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = rng.normal();
        t << 1.0;
        const LabeledVector ex{x, t};
        const Vec g = input_gradient(m, x, t, LossKind::cross_entropy);
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            Vec xp = x, xm = x;
            xp(i) += 1e-5;
            xm(i) -= 1e-5;
            const LabeledVector e1{xp, t}, e2{xm, t};
            const double fd = (batch_loss(m, std::span<const LabeledVector>(&e1, 1),
                                          LossKind::cross_entropy) -
                               batch_loss(m, std::span<const LabeledVector>(&e2, 1),
                                          LossKind::cross_entropy)) /
                              2e-5;
            const double scale = std::max({std::abs(fd), std::abs(g(i)), 1e-6});
            CHECK(std::abs(fd - g(i)) / scale < 1e-4);
        }
    }
}

TEST_CASE("input gradient batch matches per-example gradients") {
    Rng rng(31);
    MLPModel m = make_mlp({5, 6, 1}, OutputActivation::sigmoid, 0.0, 14);
    Mat inputs(5, 4);
    Mat targets(1, 4);
    for (Eigen::Index c = 0; c < 4; ++c) {
        for (Eigen::Index r = 0; r < 5; ++r) inputs(r, c) = rng.normal();
        targets(0, c) = static_cast<double>(rng.integer(2));
    }
    const Mat batch = input_gradient_batch(m, inputs, targets, LossKind::cross_entropy);
    for (Eigen::Index c = 0; c < 4; ++c) {
        const Vec one = input_gradient(m, inputs.col(c), targets.col(c), LossKind::cross_entropy);
        CHECK((batch.col(c) - one).norm() < 1e-12);
    }
}

TEST_CASE("dropout: surviving activations carry inverted scaling") {
    // single identity layer with dropout on it would be the output layer
    // (never dropped), so use a 2-layer identity stack and check the hidden
    // mask statistics through the output
    MLPModel m;
    m.layers.push_back({Mat::Identity(1, 1), Vec::Zero(1), Activation::identity, 0.5});
    m.layers.push_back({Mat::Identity(1, 1), Vec::Zero(1), Activation::identity, 0.0});
    m.output_activation = OutputActivation::identity;

    Rng rng(55);
    Mat x(1, 1);
    x(0, 0) = 3.0;
    int zeros = 0, doubled = 0;
    const int n = 4000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double y = forward_training(m, x, rng)(0, 0);
        if (y == 0.0) ++zeros;
        if (y == doctest::Approx(6.0)) ++doubled;
        sum += y;
    }
    CHECK(zeros + doubled == n);  // only 0 or x/(1-r)
    CHECK(std::abs(static_cast<double>(zeros) / n - 0.5) < 0.05);
    CHECK(sum / n == doctest::Approx(3.0).epsilon(0.08));  // expectation preserved
}

TEST_CASE("sgd_train: zero epochs returns the model unchanged") {
    MLPModel m = make_mlp({2, 3, 1}, OutputActivation::sigmoid, 0.0, 21);
    const Mat w0 = m.layers[0].weights;
    std::vector<LabeledVector> data{{Vec::Zero(2), Vec::Ones(1)}};
    TrainConfig cfg;
    cfg.epochs = 0;
    TrainResult res = sgd_train(m, data, cfg);
    CHECK((res.model.layers[0].weights - w0).norm() == 0.0);
    CHECK(res.epoch_loss.empty());
}

TEST_CASE("sgd_train: identical seeds give bitwise identical parameters") {
    Rng rng(64);
    std::vector<LabeledVector> data;
    for (int i = 0; i < 40; ++i) {
        Vec x(2), t(1);
        x << rng.normal(), rng.normal();
        t << static_cast<double>(i % 2);
        data.push_back({std::move(x), std::move(t)});
    }
    MLPModel m = make_mlp({2, 4, 1}, OutputActivation::sigmoid, 0.25, 3);
    TrainConfig cfg{0.05, 5, 8, 99, LossKind::cross_entropy};
    TrainResult a = sgd_train(m, data, cfg);
    TrainResult b = sgd_train(m, data, cfg);
    for (size_t l = 0; l < a.model.layers.size(); ++l) {
        CHECK((a.model.layers[l].weights - b.model.layers[l].weights).norm() == 0.0);
        CHECK((a.model.layers[l].biases - b.model.layers[l].biases).norm() == 0.0);
    }
    CHECK(a.epoch_loss == b.epoch_loss);
}

TEST_CASE("sgd_train: separable clusters reach high accuracy") {
    Rng rng(11);
    std::vector<LabeledVector> data;
    for (int i = 0; i < 200; ++i) {
        const int label = i % 2;
        Vec x(2), t(1);
        const double cx = label == 1 ? 2.0 : -2.0;
        x << cx + 0.4 * rng.normal(), cx + 0.4 * rng.normal();
        t << static_cast<double>(label);
        data.push_back({std::move(x), std::move(t)});
    }
    MLPModel m = make_mlp({2, 8, 1}, OutputActivation::sigmoid, 0.0, 17);
    TrainConfig cfg{0.05, 200, 16, 5, LossKind::cross_entropy};
    TrainResult res = sgd_train(std::move(m), data, cfg);
    CHECK(accuracy(res.model, data) >= 0.99);
}

TEST_CASE("sgd_train: divergence raises with the loss trace attached") {
    Rng rng(13);
    std::vector<LabeledVector> data;
    for (int i = 0; i < 32; ++i) {
        Vec x(2), t(1);
        x << 10.0 * rng.normal(), 10.0 * rng.normal();
        t << 100.0 * rng.normal();
        data.push_back({x, t});
    }
    MLPModel m = make_mlp({2, 4, 1}, OutputActivation::identity, 0.0, 2);
    TrainConfig cfg{1e9, 30, 8, 5, LossKind::mse};
    CHECK_THROWS_AS(sgd_train(m, data, cfg), TrainingDiverged);
}

TEST_CASE("predict_label thresholds at 0.5 inclusive") {
    auto with_bias = [](double bias) {
        MLPModel m;
        Vec b(1);
        b << bias;
        m.layers.push_back({Mat::Zero(1, 2), b, Activation::identity, 0.0});
        m.output_activation = OutputActivation::sigmoid;
        return m;
    };
    const Vec x = Vec::Zero(2);
    CHECK(predict_label(with_bias(0.0), x) == 1);  // exactly 0.5 -> trusted
    CHECK(predict_label(with_bias(std::log(0.49 / 0.51)), x) == 0);
    CHECK(predict_label(with_bias(std::log(0.51 / 0.49)), x) == 1);
}

TEST_CASE("model json round trip is bit exact") {
    MLPModel m = make_mlp({3, 5, 2}, OutputActivation::identity, 0.25, 77);
    const json doc = model_to_json(m);
    const MLPModel back = model_from_json(json::parse(doc.dump()));
    REQUIRE(back.layers.size() == m.layers.size());
    for (size_t l = 0; l < m.layers.size(); ++l) {
        CHECK((back.layers[l].weights - m.layers[l].weights).norm() == 0.0);
        CHECK((back.layers[l].biases - m.layers[l].biases).norm() == 0.0);
        CHECK(back.layers[l].activation == m.layers[l].activation);
        CHECK(back.layers[l].dropout_rate == m.layers[l].dropout_rate);
    }
}
