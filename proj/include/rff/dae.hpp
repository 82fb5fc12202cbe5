#pragma once

#include "rff/attack.hpp"
#include "rff/nn.hpp"

namespace rff {

// Denoising autoencoder; bottleneck width q must stay below the signal
// width 2l.
struct DAEModel {
    MLPModel encoder;  // 2l -> q
    MLPModel decoder;  // q -> 2l

    int bottleneck() const { return encoder.output_width(); }
    void validate() const;
};

struct DAETrainingSet {
    std::vector<LabeledVector> pairs;  // input = perturbed or clean, target = clean
    double train_psr_db = -20.0;
    PerturbationSpec spec;
};

// Builds the union of perturbed->clean pairs (delta crafted against the
// receiver's classifier at train_psr_db) and clean->clean identity pairs.
DAETrainingSet build_training_pairs(const std::vector<Vec>& clean_signals,
                                    const std::vector<double>& labels,
                                    const MLPModel& receiver_model, const PerturbationSpec& spec,
                                    double train_psr_db, Rng& rng);

struct DAETrainResult {
    DAEModel model;
    std::vector<double> epoch_loss;
};

// Trains encoder and decoder jointly on MSE; hidden widths follow the
// 256/128/64/128/256 stack with the 64-unit bottleneck.
DAETrainResult train_dae(const DAETrainingSet& pairs, const TrainConfig& config,
                         const std::vector<int>& hidden_widths = {256, 128, 64, 128, 256},
                         double dropout = 0.0);

Vec denoise(const DAEModel& model, const Vec& noisy);

}  // namespace rff
