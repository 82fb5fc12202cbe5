#include "rff/baseline.hpp"

#include <cmath>
#include <stdexcept>

namespace rff {

namespace {

// Robust-accuracy probe used for grid-search scoring: accuracy on the
// validation set attacked against the candidate model itself.
double probe_score(const MLPModel& model, const std::vector<LabeledVector>& validation,
                   AttackAlgo algo, NormKind norm, double probe_psr_db) {
    Mat inputs(validation.front().input.size(), validation.size());
    Vec labels(validation.size());
    for (size_t i = 0; i < validation.size(); ++i) {
        inputs.col(static_cast<Eigen::Index>(i)) = validation[i].input;
        labels(static_cast<Eigen::Index>(i)) = validation[i].target(0);
    }
    PerturbationSpec spec;
    spec.algorithm = algo;
    spec.norm = norm;
    const Mat deltas = craft_deltas_at_psr(model, inputs, labels, spec, probe_psr_db);
    const Mat outputs = forward_batch(model, inputs + deltas);
    int correct = 0;
    for (Eigen::Index i = 0; i < labels.size(); ++i)
        if ((outputs(0, i) >= 0.5 ? 1.0 : 0.0) == labels(i)) ++correct;
    const double robust = static_cast<double>(correct) / static_cast<double>(labels.size());
    return 0.5 * (robust + accuracy(model, validation));
}

}  // namespace

const char* baseline_name(BaselineKind kind) {
    switch (kind) {
        case BaselineKind::unaware: return "unaware";
        case BaselineKind::proposed_stft: return "proposed_stft";
        case BaselineKind::at_fgsm: return "at_fgsm";
        case BaselineKind::at_pgd: return "at_pgd";
        case BaselineKind::gaussian_smoothing: return "gaussian_smoothing";
        case BaselineKind::fq: return "fq";
        case BaselineKind::pa: return "pa";
    }
    throw std::logic_error("unknown baseline kind");
}

BaselineKind baseline_from_name(const std::string& name) {
    for (BaselineKind k :
         {BaselineKind::unaware, BaselineKind::proposed_stft, BaselineKind::at_fgsm,
          BaselineKind::at_pgd, BaselineKind::gaussian_smoothing, BaselineKind::fq,
          BaselineKind::pa})
        if (name == baseline_name(k)) return k;
    throw std::invalid_argument("unknown baseline: " + name);
}

FeatureMap make_feature_pipeline(BaselineKind kind, const STFTConfig& stft_config) {
    switch (kind) {
        case BaselineKind::unaware:
        case BaselineKind::at_fgsm:
        case BaselineKind::at_pgd:
        case BaselineKind::gaussian_smoothing:
            return [](const IQSignal& s) { return to_real(s); };
        case BaselineKind::fq:
            return [](const IQSignal& s) { return fq_features(s); };
        case BaselineKind::pa:
            return [](const IQSignal& s) { return pa_features(s); };
        case BaselineKind::proposed_stft:
            return [stft_config](const IQSignal& s) {
                return magnitude_features(stft(s, stft_config));
            };
    }
    throw std::invalid_argument("make_feature_pipeline: unknown baseline kind");
}

TrainResult train_adversarial(MLPModel model, const std::vector<LabeledVector>& dataset,
                              AttackAlgo algo, NormKind norm, double aug_psr_db,
                              const TrainConfig& config) {
    if (dataset.empty()) throw std::invalid_argument("train_adversarial: empty dataset");
    model.validate();
    // augmentation off: literally plain training
    if (std::isinf(aug_psr_db) && aug_psr_db < 0.0) return sgd_train(std::move(model), dataset, config);

    Mat inputs(dataset.front().input.size(), dataset.size());
    Vec labels(dataset.size());
    for (size_t i = 0; i < dataset.size(); ++i) {
        inputs.col(static_cast<Eigen::Index>(i)) = dataset[i].input;
        labels(static_cast<Eigen::Index>(i)) = dataset[i].target(0);
    }
    PerturbationSpec spec;
    spec.algorithm = algo;
    spec.norm = norm;

    Rng rng(config.seed);
    std::vector<double> trace;
    std::vector<LabeledVector> augmented;
    augmented.reserve(dataset.size() * 2);
    for (int e = 0; e < config.epochs; ++e) {
        const Mat deltas = craft_deltas_at_psr(model, inputs, labels, spec, aug_psr_db);
        augmented = dataset;
        for (size_t i = 0; i < dataset.size(); ++i) {
            LabeledVector adv = dataset[i];
            adv.input += deltas.col(static_cast<Eigen::Index>(i));
            augmented.push_back(std::move(adv));
        }
        const double epoch_loss = sgd_epoch(model, augmented, config, rng);
        if (!std::isfinite(epoch_loss))
            throw TrainingDiverged("adversarial training diverged at epoch " + std::to_string(e),
                                   trace);
        trace.push_back(epoch_loss);
    }
    return {std::move(model), std::move(trace)};
}

TrainResult train_gaussian_smoothed(MLPModel model, const std::vector<LabeledVector>& dataset,
                                    double noise_std, const TrainConfig& config) {
    if (dataset.empty()) throw std::invalid_argument("train_gaussian_smoothed: empty dataset");
    if (noise_std < 0.0) throw std::invalid_argument("train_gaussian_smoothed: noise_std must be >= 0");

    double ms = 0.0;
    for (const auto& ex : dataset) ms += ex.input.squaredNorm() / static_cast<double>(ex.input.size());
    const double rms = std::sqrt(ms / static_cast<double>(dataset.size()));

    Rng rng(derive_seed(config.seed, "smoothing-aug"));
    std::vector<LabeledVector> augmented = dataset;
    augmented.reserve(dataset.size() * 2);
    for (const auto& ex : dataset) {
        LabeledVector noisy = ex;
        for (Eigen::Index k = 0; k < noisy.input.size(); ++k)
            noisy.input(k) += noise_std * rms * rng.normal();
        augmented.push_back(std::move(noisy));
    }
    return sgd_train(std::move(model), augmented, config);
}

TunedBaseline tune_adversarial(const MLPModel& init, const std::vector<LabeledVector>& train,
                               const std::vector<LabeledVector>& validation, AttackAlgo algo,
                               NormKind norm, const std::vector<double>& psr_grid,
                               const TrainConfig& config, double probe_psr_db) {
    if (psr_grid.empty()) throw std::invalid_argument("tune_adversarial: empty grid");
    TunedBaseline best;
    double best_score = -1.0;
    for (double psr : psr_grid) {
        TrainResult candidate = train_adversarial(init, train, algo, norm, psr, config);
        const double score = probe_score(candidate.model, validation, algo, norm, probe_psr_db);
        if (score > best_score) {
            best_score = score;
            best.result = std::move(candidate);
            best.chosen_param = psr;
        }
    }
    return best;
}

TunedBaseline tune_gaussian_smoothed(const MLPModel& init, const std::vector<LabeledVector>& train,
                                     const std::vector<LabeledVector>& validation,
                                     const std::vector<double>& std_grid, const TrainConfig& config,
                                     double probe_psr_db) {
    if (std_grid.empty()) throw std::invalid_argument("tune_gaussian_smoothed: empty grid");
    TunedBaseline best;
    double best_score = -1.0;
    for (double noise_std : std_grid) {
        TrainResult candidate = train_gaussian_smoothed(init, train, noise_std, config);
        const double score =
            probe_score(candidate.model, validation, AttackAlgo::fgsm, NormKind::l2, probe_psr_db);
        if (score > best_score) {
            best_score = score;
            best.result = std::move(candidate);
            best.chosen_param = noise_std;
        }
    }
    return best;
}

}  // namespace rff
