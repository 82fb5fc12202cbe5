#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rff/linalg.hpp"
#include "rff/rng.hpp"

namespace rff {

enum class Activation { relu, sigmoid, identity };
enum class OutputActivation { sigmoid, identity };
enum class LossKind { cross_entropy, mse };

struct DenseLayer {
    Mat weights;               // d_l x d_{l-1}
    Vec biases;                // d_l
    Activation activation = Activation::relu;
    double dropout_rate = 0.0; // training-time only, inverted dropout
};

struct MLPModel {
    std::vector<DenseLayer> layers;
    OutputActivation output_activation = OutputActivation::sigmoid;

    int input_width() const;
    int output_width() const;

    // Throws std::invalid_argument on dimension mismatch between layers,
    // non-finite parameters, or dropout_rate outside [0, 1).
    void validate() const;
};

struct TrainConfig {
    double learning_rate = 0.01;
    int epochs = 100;
    int batch_size = 64;
    std::uint64_t seed = 1;
    LossKind loss = LossKind::cross_entropy;
};

// One supervised example. For the binary classifier `target` has width 1
// holding the 0/1 label; for reconstruction tasks it has the output width.
struct LabeledVector {
    Vec input;
    Vec target;
};

struct LayerGrads {
    Mat d_weights;
    Vec d_biases;
};

// Thrown when training encounters a non-finite loss; carries the per-epoch
// trace recorded up to the failure.
struct TrainingDiverged : std::runtime_error {
    TrainingDiverged(const std::string& what, std::vector<double> trace_so_far)
        : std::runtime_error(what), trace(std::move(trace_so_far)) {}
    std::vector<double> trace;
};

struct TrainResult {
    MLPModel model;
    std::vector<double> epoch_loss;
};

// Builds an MLP with the given layer widths (including input and output).
// Hidden layers use ReLU with `hidden_dropout`, the final layer is affine
// with the requested output activation. Weights drawn uniform in
// +-sqrt(6/(fan_in+fan_out)), biases zero.
MLPModel make_mlp(const std::vector<int>& widths, OutputActivation out_act,
                  double hidden_dropout, std::uint64_t seed);

// Inference-mode forward pass (dropout disabled).
Vec forward(const MLPModel& model, const Vec& input);

// Column-batched inference forward; inputs are columns.
Mat forward_batch(const MLPModel& model, const Mat& inputs);

// Training-mode forward with inverted-dropout masks drawn from rng;
// surviving activations are scaled by 1/(1-rate) so the expectation matches
// inference mode.
Mat forward_training(const MLPModel& model, const Mat& inputs, Rng& rng);

// Cross entropy exactly as the classifier loss is stated: only positive
// labels contribute, -(1/N) sum_i p_i log(p_hat_i). Predictions are clamped
// from below at 1e-12 before the log.
double loss_cross_entropy(const Vec& predictions, const Vec& labels);

// Full binary cross entropy, -(1/N) sum_i [p log p_hat + (1-p) log(1-p_hat)].
// This is the loss actually minimized when training classifiers; the
// positive-only form above cannot teach the untrusted class.
double loss_bce(const Vec& predictions, const Vec& labels);

// Mean squared error over components, (1/width) sum_k (target_k - output_k)^2.
double loss_mse(const Vec& output, const Vec& target);

// Gradients of the batch-mean loss w.r.t. every weight and bias.
// `dropout_rng` non-null enables training-mode dropout with masks drawn from
// it. LossKind::cross_entropy trains the full binary cross entropy.
std::vector<LayerGrads> backward(const MLPModel& model,
                                 std::span<const LabeledVector> batch,
                                 LossKind loss, Rng* dropout_rng = nullptr);

// dLoss/dInput for a single example in inference mode.
Vec input_gradient(const MLPModel& model, const Vec& input, const Vec& target,
                   LossKind loss);

// Column-batched input gradients; column i holds dLoss_i/dInput_i for the
// per-example (not batch-mean) loss.
Mat input_gradient_batch(const MLPModel& model, const Mat& inputs, const Mat& targets,
                         LossKind loss);

// Scalar loss of a batch under the training objective (used by the trainer
// and by finite-difference checks).
double batch_loss(const MLPModel& model, std::span<const LabeledVector> batch,
                  LossKind loss);

// One epoch of mini-batch SGD in place; returns the mean over batch losses.
// Exposed so adversarial-training loops can interleave work between epochs.
double sgd_epoch(MLPModel& model, const std::vector<LabeledVector>& dataset,
                 const TrainConfig& config, Rng& rng);

// Plain mini-batch SGD. Deterministic under config.seed. Throws
// TrainingDiverged if the loss goes non-finite.
TrainResult sgd_train(MLPModel model, const std::vector<LabeledVector>& dataset,
                      const TrainConfig& config);

// Thresholded prediction for sigmoid-output models: 1 iff p_hat >= 0.5.
int predict_label(const MLPModel& model, const Vec& input);

// Fraction of examples whose predicted label matches target(0).
double accuracy(const MLPModel& model, std::span<const LabeledVector> examples);

}  // namespace rff
