#include "rff/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace rff {

namespace {

constexpr double kLogClamp = 1e-12;

Mat apply_activation(Activation act, const Mat& z) {
    switch (act) {
        case Activation::relu:
            return z.cwiseMax(0.0);
        case Activation::sigmoid:
            return z.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
        case Activation::identity:
            return z;
    }
    throw std::logic_error("unknown activation");
}

// derivative of the activation expressed through pre-activation z and
// post-activation a (sigmoid reuses a)
Mat activation_derivative(Activation act, const Mat& z, const Mat& a) {
    switch (act) {
        case Activation::relu:
            return z.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; });
        case Activation::sigmoid:
            return a.cwiseProduct(Mat::Ones(a.rows(), a.cols()) - a);
        case Activation::identity:
            return Mat::Ones(z.rows(), z.cols());
    }
    throw std::logic_error("unknown activation");
}

Mat apply_output_activation(OutputActivation act, const Mat& a) {
    if (act == OutputActivation::sigmoid)
        return a.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
    return a;
}

struct ForwardTrace {
    std::vector<Mat> z;          // pre-activations per layer
    std::vector<Mat> a;          // post-activation (and post-dropout) per layer; a[0] = input
    std::vector<Mat> a_raw;      // post-activation before dropout
    std::vector<Mat> masks;      // dropout masks (empty when unused)
    Mat output;                  // after output activation
};

ForwardTrace forward_trace(const MLPModel& model, const Mat& inputs, Rng* dropout_rng) {
    const size_t L = model.layers.size();
    ForwardTrace t;
    t.z.resize(L);
    t.a.resize(L + 1);
    t.a_raw.resize(L);
    t.masks.resize(L);
    t.a[0] = inputs;

    for (size_t l = 0; l < L; ++l) {
        const DenseLayer& layer = model.layers[l];
        if (layer.weights.cols() != t.a[l].rows())
            throw std::invalid_argument("forward: input width " + std::to_string(t.a[l].rows()) +
                                        " does not match layer " + std::to_string(l) +
                                        " expecting " + std::to_string(layer.weights.cols()));
        t.z[l] = (layer.weights * t.a[l]).colwise() + layer.biases;
        if (!t.z[l].allFinite())
            throw std::runtime_error("non-finite pre-activation at layer " + std::to_string(l));
        t.a_raw[l] = apply_activation(layer.activation, t.z[l]);

        const bool last = (l + 1 == L);
        if (dropout_rng != nullptr && !last && layer.dropout_rate > 0.0) {
            const double keep = 1.0 - layer.dropout_rate;
            Mat mask(t.a_raw[l].rows(), t.a_raw[l].cols());
            for (Eigen::Index c = 0; c < mask.cols(); ++c)
                for (Eigen::Index r = 0; r < mask.rows(); ++r)
                    mask(r, c) = dropout_rng->uniform() < keep ? 1.0 / keep : 0.0;
            t.masks[l] = mask;
            t.a[l + 1] = t.a_raw[l].cwiseProduct(mask);
        } else {
            t.a[l + 1] = t.a_raw[l];
        }
    }
    t.output = apply_output_activation(model.output_activation, t.a[L]);
    return t;
}

// Loss of a batch given the final outputs; targets are columns.
double loss_value(LossKind loss, const Mat& outputs, const Mat& targets) {
    const double m = static_cast<double>(outputs.rows());
    const double B = static_cast<double>(outputs.cols());
    if (loss == LossKind::mse)
        return (targets - outputs).squaredNorm() / (m * B);
    double total = 0.0;
    for (Eigen::Index c = 0; c < outputs.cols(); ++c)
        for (Eigen::Index r = 0; r < outputs.rows(); ++r) {
            const double p = targets(r, c);
            const double ph = outputs(r, c);
            total -= p * std::log(std::max(ph, kLogClamp)) +
                     (1.0 - p) * std::log(std::max(1.0 - ph, kLogClamp));
        }
    return total / (m * B);
}

// Gradient of the batch-mean loss w.r.t. the last layer's post-activation
// a^(L) (i.e. before the output activation). The sigmoid/cross-entropy pair
// is folded analytically so saturated outputs stay well-posed.
Mat output_delta(const MLPModel& model, LossKind loss, const Mat& outputs, const Mat& targets) {
    const double m = static_cast<double>(outputs.rows());
    const double B = static_cast<double>(outputs.cols());
    if (loss == LossKind::cross_entropy) {
        if (model.output_activation != OutputActivation::sigmoid)
            throw std::invalid_argument("cross-entropy training requires a sigmoid output");
        return (outputs - targets) / (m * B);
    }
    Mat d = 2.0 * (outputs - targets) / (m * B);
    if (model.output_activation == OutputActivation::sigmoid)
        d = d.cwiseProduct(outputs.cwiseProduct(Mat::Ones(outputs.rows(), outputs.cols()) - outputs));
    return d;
}

struct BackwardResult {
    std::vector<LayerGrads> grads;
    Mat input_grad;
    double loss = 0.0;
};

BackwardResult backward_impl(const MLPModel& model, const Mat& inputs, const Mat& targets,
                             LossKind loss, Rng* dropout_rng, bool want_input_grad) {
    const size_t L = model.layers.size();
    ForwardTrace t = forward_trace(model, inputs, dropout_rng);

    BackwardResult out;
    out.loss = loss_value(loss, t.output, targets);
    out.grads.resize(L);

    Mat g = output_delta(model, loss, t.output, targets);  // dL/da^(L)
    for (size_t li = L; li-- > 0;) {
        const DenseLayer& layer = model.layers[li];
        if (t.masks[li].size() > 0) g = g.cwiseProduct(t.masks[li]);
        Mat gz = g.cwiseProduct(activation_derivative(layer.activation, t.z[li], t.a_raw[li]));
        if (!gz.allFinite())
            throw std::runtime_error("non-finite gradient at layer " + std::to_string(li));
        out.grads[li].d_weights = gz * t.a[li].transpose();
        out.grads[li].d_biases = gz.rowwise().sum();
        if (li > 0 || want_input_grad) g = layer.weights.transpose() * gz;
    }
    if (want_input_grad) out.input_grad = g;
    return out;
}

Mat pack_inputs(std::span<const LabeledVector> batch) {
    Mat X(batch[0].input.size(), batch.size());
    for (size_t i = 0; i < batch.size(); ++i) X.col(static_cast<Eigen::Index>(i)) = batch[i].input;
    return X;
}

Mat pack_targets(std::span<const LabeledVector> batch) {
    Mat T(batch[0].target.size(), batch.size());
    for (size_t i = 0; i < batch.size(); ++i) T.col(static_cast<Eigen::Index>(i)) = batch[i].target;
    return T;
}

}  // namespace

int MLPModel::input_width() const {
    return layers.empty() ? 0 : static_cast<int>(layers.front().weights.cols());
}

int MLPModel::output_width() const {
    return layers.empty() ? 0 : static_cast<int>(layers.back().weights.rows());
}

void MLPModel::validate() const {
    if (layers.empty()) throw std::invalid_argument("model has no layers");
    for (size_t l = 0; l < layers.size(); ++l) {
        const DenseLayer& layer = layers[l];
        if (layer.weights.rows() != layer.biases.size())
            throw std::invalid_argument("layer " + std::to_string(l) + ": bias width mismatch");
        if (l > 0 && layers[l - 1].weights.rows() != layer.weights.cols())
            throw std::invalid_argument("layer " + std::to_string(l) + ": input width mismatch");
        if (!layer.weights.allFinite() || !layer.biases.allFinite())
            throw std::invalid_argument("layer " + std::to_string(l) + ": non-finite parameters");
        if (!(layer.dropout_rate >= 0.0 && layer.dropout_rate < 1.0))
            throw std::invalid_argument("layer " + std::to_string(l) + ": dropout_rate must be in [0,1)");
    }
}

MLPModel make_mlp(const std::vector<int>& widths, OutputActivation out_act,
                  double hidden_dropout, std::uint64_t seed) {
    if (widths.size() < 2) throw std::invalid_argument("make_mlp: need at least input and output widths");
    Rng rng(seed);
    MLPModel model;
    model.output_activation = out_act;
    for (size_t l = 1; l < widths.size(); ++l) {
        DenseLayer layer;
        const int fan_in = widths[l - 1];
        const int fan_out = widths[l];
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        layer.weights.resize(fan_out, fan_in);
        for (Eigen::Index c = 0; c < layer.weights.cols(); ++c)
            for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
                layer.weights(r, c) = rng.uniform(-limit, limit);
        layer.biases = Vec::Zero(fan_out);
        const bool last = (l + 1 == widths.size());
        layer.activation = last ? Activation::identity : Activation::relu;
        layer.dropout_rate = last ? 0.0 : hidden_dropout;
        model.layers.push_back(std::move(layer));
    }
    model.validate();
    return model;
}

Vec forward(const MLPModel& model, const Vec& input) {
    return forward_trace(model, input, nullptr).output.col(0);
}

Mat forward_batch(const MLPModel& model, const Mat& inputs) {
    return forward_trace(model, inputs, nullptr).output;
}

Mat forward_training(const MLPModel& model, const Mat& inputs, Rng& rng) {
    return forward_trace(model, inputs, &rng).output;
}

double loss_cross_entropy(const Vec& predictions, const Vec& labels) {
    if (predictions.size() == 0) throw std::invalid_argument("cross entropy: empty batch");
    if (predictions.size() != labels.size())
        throw std::invalid_argument("cross entropy: length mismatch");
    double total = 0.0;
    for (Eigen::Index i = 0; i < predictions.size(); ++i)
        total -= labels(i) * std::log(std::max(predictions(i), kLogClamp));
    return total / static_cast<double>(predictions.size());
}

double loss_bce(const Vec& predictions, const Vec& labels) {
    if (predictions.size() == 0) throw std::invalid_argument("cross entropy: empty batch");
    if (predictions.size() != labels.size())
        throw std::invalid_argument("cross entropy: length mismatch");
    double total = 0.0;
    for (Eigen::Index i = 0; i < predictions.size(); ++i)
        total -= labels(i) * std::log(std::max(predictions(i), kLogClamp)) +
                 (1.0 - labels(i)) * std::log(std::max(1.0 - predictions(i), kLogClamp));
    return total / static_cast<double>(predictions.size());
}

double loss_mse(const Vec& output, const Vec& target) {
    if (output.size() != target.size()) throw std::invalid_argument("mse: length mismatch");
    if (output.size() == 0) throw std::invalid_argument("mse: empty vectors");
    return (target - output).squaredNorm() / static_cast<double>(output.size());
}

std::vector<LayerGrads> backward(const MLPModel& model, std::span<const LabeledVector> batch,
                                 LossKind loss, Rng* dropout_rng) {
    if (batch.empty()) throw std::invalid_argument("backward: empty batch");
    return backward_impl(model, pack_inputs(batch), pack_targets(batch), loss, dropout_rng, false)
        .grads;
}

Vec input_gradient(const MLPModel& model, const Vec& input, const Vec& target, LossKind loss) {
    return backward_impl(model, input, target, loss, nullptr, true).input_grad.col(0);
}

Mat input_gradient_batch(const MLPModel& model, const Mat& inputs, const Mat& targets,
                         LossKind loss) {
    // backward_impl seeds the batch-mean loss; scale back to per-example
    // gradients (columns do not mix on the input-gradient path).
    Mat g = backward_impl(model, inputs, targets, loss, nullptr, true).input_grad;
    return g * static_cast<double>(inputs.cols());
}

double batch_loss(const MLPModel& model, std::span<const LabeledVector> batch, LossKind loss) {
    if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
    Mat outputs = forward_batch(model, pack_inputs(batch));
    return loss_value(loss, outputs, pack_targets(batch));
}

double sgd_epoch(MLPModel& model, const std::vector<LabeledVector>& dataset,
                 const TrainConfig& config, Rng& rng) {
    const size_t n = dataset.size();
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (size_t i = n; i > 1; --i)
        std::swap(order[i - 1], order[rng.integer(i)]);

    double loss_sum = 0.0;
    size_t count = 0;
    for (size_t start = 0; start < n; start += static_cast<size_t>(config.batch_size)) {
        const size_t end = std::min(n, start + static_cast<size_t>(config.batch_size));
        std::vector<LabeledVector> rows;
        rows.reserve(end - start);
        for (size_t k = start; k < end; ++k) rows.push_back(dataset[order[k]]);

        BackwardResult res = backward_impl(model, pack_inputs(rows), pack_targets(rows),
                                           config.loss, &rng, false);
        loss_sum += res.loss * static_cast<double>(rows.size());
        count += rows.size();
        for (size_t l = 0; l < model.layers.size(); ++l) {
            model.layers[l].weights -= config.learning_rate * res.grads[l].d_weights;
            model.layers[l].biases -= config.learning_rate * res.grads[l].d_biases;
        }
    }
    return loss_sum / static_cast<double>(count);
}

TrainResult sgd_train(MLPModel model, const std::vector<LabeledVector>& dataset,
                      const TrainConfig& config) {
    if (dataset.empty()) throw std::invalid_argument("sgd_train: empty dataset");
    if (config.learning_rate <= 0.0) throw std::invalid_argument("sgd_train: learning_rate must be > 0");
    if (config.batch_size < 1) throw std::invalid_argument("sgd_train: batch_size must be >= 1");
    model.validate();

    Rng rng(config.seed);
    std::vector<double> trace;
    trace.reserve(static_cast<size_t>(std::max(config.epochs, 0)));
    for (int e = 0; e < config.epochs; ++e) {
        double epoch_loss;
        try {
            epoch_loss = sgd_epoch(model, dataset, config, rng);
        } catch (const std::runtime_error& err) {
            throw TrainingDiverged(
                "training diverged at epoch " + std::to_string(e) + ": " + err.what(), trace);
        }
        if (!std::isfinite(epoch_loss))
            throw TrainingDiverged("training diverged at epoch " + std::to_string(e), trace);
        trace.push_back(epoch_loss);
    }
    return {std::move(model), std::move(trace)};
}

int predict_label(const MLPModel& model, const Vec& input) {
    if (model.output_activation != OutputActivation::sigmoid)
        throw std::invalid_argument("predict_label: needs a sigmoid-output model");
    return forward(model, input)(0) >= 0.5 ? 1 : 0;
}

double accuracy(const MLPModel& model, std::span<const LabeledVector> examples) {
    if (examples.empty()) throw std::invalid_argument("accuracy: empty evaluation set");
    Mat outputs = forward_batch(model, pack_inputs(examples));
    int correct = 0;
    for (size_t i = 0; i < examples.size(); ++i) {
        const int pred = outputs(0, static_cast<Eigen::Index>(i)) >= 0.5 ? 1 : 0;
        if (pred == static_cast<int>(examples[i].target(0) + 0.5)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(examples.size());
}

}  // namespace rff
