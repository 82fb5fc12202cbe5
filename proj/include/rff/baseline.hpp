#pragma once

#include <functional>

#include "rff/attack.hpp"
#include "rff/stft.hpp"

namespace rff {

enum class BaselineKind { unaware, proposed_stft, at_fgsm, at_pgd, gaussian_smoothing, fq, pa };

struct BaselineSpec {
    BaselineKind kind = BaselineKind::unaware;
    double aug_psr_db = -20.0;  // adversarial-training augmentation strength
    double noise_std = 0.1;     // smoothing noise, relative to feature RMS
};

const char* baseline_name(BaselineKind kind);
BaselineKind baseline_from_name(const std::string& name);

using FeatureMap = std::function<Vec(const IQSignal&)>;

// Time-domain mapping for unaware/AT/smoothing, DFT features for fq,
// amplitude-phase for pa, flattened spectrogram magnitudes for the proposed
// eavesdropper.
FeatureMap make_feature_pipeline(BaselineKind kind, const STFTConfig& stft_config);

// Adversarial training: between epochs, regenerates adversarial counterparts
// of the training set against the current model at aug_psr_db and fits one
// epoch on clean + adversarial.
TrainResult train_adversarial(MLPModel model, const std::vector<LabeledVector>& dataset,
                              AttackAlgo algo, NormKind norm, double aug_psr_db,
                              const TrainConfig& config);

// Gaussian smoothing: one seeded AWGN-corrupted copy of each training
// example, noise std relative to the dataset feature RMS.
TrainResult train_gaussian_smoothed(MLPModel model, const std::vector<LabeledVector>& dataset,
                                    double noise_std, const TrainConfig& config);

// Grid searches for the augmentation magnitude that is "empirically
// determined": candidates are scored by mean accuracy over the clean
// validation set and a self-crafted probe attack.
struct TunedBaseline {
    TrainResult result;
    double chosen_param = 0.0;
};

TunedBaseline tune_adversarial(const MLPModel& init, const std::vector<LabeledVector>& train,
                               const std::vector<LabeledVector>& validation, AttackAlgo algo,
                               NormKind norm, const std::vector<double>& psr_grid,
                               const TrainConfig& config, double probe_psr_db = -20.0);

TunedBaseline tune_gaussian_smoothed(const MLPModel& init, const std::vector<LabeledVector>& train,
                                     const std::vector<LabeledVector>& validation,
                                     const std::vector<double>& std_grid, const TrainConfig& config,
                                     double probe_psr_db = -20.0);

}  // namespace rff
