#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rff/baseline.hpp"
#include "rff/dae.hpp"
#include "rff/io.hpp"
#include "rff/spectral.hpp"

namespace rff {

struct ExperimentConfig {
    ScenarioConfig scenario;
    STFTConfig stft;
    PerturbationSpec attack;        // sweep perturbation family
    std::vector<double> psr_grid;   // dB, ascending
    std::vector<char> environments; // subset of {'A','B'}
    std::vector<BaselineSpec> baselines;
    std::string output_dir = "out";
    std::uint64_t seed = 1;

    TrainConfig receiver_train;
    TrainConfig dae_train;
    TrainConfig eaves_train;
    double receiver_dropout = 0.5;
    double dae_dropout = 0.5;
    double eaves_dropout = 0.5;
    double dae_train_psr_db = -20.0;

    int theorem_examples = 48;
    double assumption_psr_db = -20.0;
    int shap_permutations = 100;
    int shap_inputs_per_class = 6;
    // When set, AT/smoothing magnitudes are grid searched instead of taken
    // from each BaselineSpec.
    bool grid_search_baselines = false;

    void validate() const;
};

ExperimentConfig default_experiment_config();
json config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const json& doc);

// key "A/unaware", "B/proposed_stft", ...
struct ClassifierBundle {
    MLPModel model;  // operates on raw pipeline features
    BaselineSpec spec;
    char environment = 'A';
    double clean_accuracy = 0.0;
    double chosen_param = 0.0;  // grid-searched magnitude when applicable
};

struct TrainedModels {
    MLPModel receiver;  // raw signal domain
    double receiver_clean_accuracy = 0.0;
    DAEModel dae;
    std::map<std::string, ClassifierBundle> eavesdroppers;
};

struct SweepRow {
    std::string defense;  // receiver, receiver_dae, or an eavesdropper key
    char environment = '-';
    NormKind norm = NormKind::l2;
    AttackAlgo algorithm = AttackAlgo::fgsm;
    double psr_db = 0.0;  // -inf marks the clean column
    double accuracy = 0.0;
    int n_test = 0;
};

struct ConfusionCounts {
    long tp = 0, fp = 0, tn = 0, fn = 0;
    long total() const { return tp + fp + tn + fn; }
    double accuracy() const { return static_cast<double>(tp + tn) / static_cast<double>(total()); }
};

// One evaluation transmission staged for all parties: a shared emission with
// paired receiver/eavesdropper channel+noise realizations and the
// transmitter's own approximation draw for crafting.
struct EvalTransmission {
    IQSignal emitted;
    double label = 0.0;
    int device_id = 0;
    ChannelRealization ch_rx, ch_ev;
    std::vector<std::complex<double>> noise_rx, noise_ev;
    Vec s_approx_real;  // transmitter's modeled receive-domain signal
};

std::vector<EvalTransmission> build_eval_set(const ExperimentConfig& cfg);

TrainedModels train_all(const ExperimentConfig& cfg, const Dataset& rx_data,
                        const Dataset& ev_data);

struct SweepResult {
    std::vector<SweepRow> rows;
};

SweepResult run_sweep(const ExperimentConfig& cfg, const TrainedModels& models,
                      const std::vector<EvalTransmission>& eval_set);

// Clean-signal confusion for the receiver pipeline or an eavesdropper bundle;
// the seen split is the sweep's evaluation set, so the derived accuracy
// matches the sweep's clean column exactly.
ConfusionCounts confusion_seen(const ExperimentConfig& cfg, const TrainedModels& models,
                               const std::vector<EvalTransmission>& eval_set,
                               const std::string& defense);
ConfusionCounts confusion_unseen(const ExperimentConfig& cfg, const TrainedModels& models,
                                 const Dataset& data, const std::string& defense);

struct ExplainResult {
    Mat mean_abs_attribution;  // T x F, averaged over the explained inputs
    double mid_band_fraction = 0.0;
    std::vector<std::pair<int, double>> top_features;  // flat index, mean |phi|
};

ExplainResult run_explain(const ExperimentConfig& cfg, const TrainedModels& models,
                          const Dataset& ev_data);

struct TheoremSweepRow {
    double psr_db;
    PSDInvarianceReport report;
};

struct SpectralResults {
    std::vector<TheoremSweepRow> theorem_rows;  // over the PSR grid
    BandEnergyReport l2_bands, linf_bands, noise_bands;
};

SpectralResults run_spectral_checks(const ExperimentConfig& cfg, const TrainedModels& models);

// Runs the stages in order (generate, train, attack, sweep, verify-theorem,
// explain, report), stopping after `last_stage`, and writes the artifacts
// plus manifest.json with content hashes. Any stage failure is rethrown with
// the stage name; files already written stay in place.
std::filesystem::path run_pipeline(const ExperimentConfig& cfg,
                                   const std::string& last_stage = "report");

// Entry point for the command-line verbs; `stage` is one of generate, train,
// attack, sweep, verify-theorem, explain, report, run.
int run_stage_command(const std::string& stage, const ExperimentConfig& cfg);

// Rescales the first layer so the model accepts unscaled features.
MLPModel absorb_input_scale(MLPModel model, double scale);
// Rescales the last layer so outputs return to the unscaled domain.
MLPModel absorb_output_scale(MLPModel model, double scale);

}  // namespace rff
