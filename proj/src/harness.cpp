#include "rff/harness.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <set>
#include <sstream>

namespace rff {

namespace fs = std::filesystem;

namespace {

std::vector<int> arch_for(char env, int input_width) {
    if (env == 'A') return {input_width, 256, 128, 64, 1};
    if (env == 'B') return {input_width, 100, 80, 1};
    throw std::invalid_argument("unknown environment (expected A or B)");
}

std::vector<LabeledVector> featurize(const std::vector<SignalExample>& split,
                                     const FeatureMap& fm, double scale) {
    std::vector<LabeledVector> out;
    out.reserve(split.size());
    for (const SignalExample& ex : split) {
        Vec target(1);
        target(0) = ex.label;
        out.push_back({fm(ex.signal) / scale, std::move(target)});
    }
    return out;
}

double feature_rms(const std::vector<SignalExample>& split, const FeatureMap& fm) {
    double ms = 0.0;
    long count = 0;
    for (const SignalExample& ex : split) {
        const Vec f = fm(ex.signal);
        ms += f.squaredNorm();
        count += f.size();
    }
    const double rms = std::sqrt(ms / static_cast<double>(count));
    return rms > 0.0 ? rms : 1.0;
}

std::string bundle_key(char env, BaselineKind kind) {
    return std::string(1, env) + "/" + baseline_name(kind);
}

const char* norm_name(NormKind n) { return n == NormKind::l2 ? "l2" : "linf"; }
const char* algo_name(AttackAlgo a) { return a == AttackAlgo::fgsm ? "fgsm" : "pgd"; }

int eval_count_per_device(const ScenarioConfig& sc) {
    return sc.signals_per_device - (sc.signals_per_device * 3) / 4;
}

// Deterministic defense ordering for reports: receiver rows first, then the
// eavesdropper bundles in key order.
std::vector<std::string> defense_order(const TrainedModels& models) {
    std::vector<std::string> order{"receiver", "receiver_dae"};
    for (const auto& [key, bundle] : models.eavesdroppers) order.push_back(key);
    return order;
}

struct StageLog {
    void begin(const std::string& name) { std::cerr << "[stage] " << name << "\n"; }
};

}  // namespace

void ExperimentConfig::validate() const {
    if (psr_grid.empty()) throw std::invalid_argument("config: psr_grid must be nonempty");
    if (!std::is_sorted(psr_grid.begin(), psr_grid.end()))
        throw std::invalid_argument("config: psr_grid must be ascending");
    if (environments.empty()) throw std::invalid_argument("config: environments must be nonempty");
    for (char e : environments)
        if (e != 'A' && e != 'B') throw std::invalid_argument("config: environment must be A or B");
    if (baselines.empty()) throw std::invalid_argument("config: baselines must be nonempty");
}

ExperimentConfig default_experiment_config() {
    ExperimentConfig cfg;
    for (double p = -40.0; p <= -10.0 + 1e-9; p += 3.0) cfg.psr_grid.push_back(p);
    cfg.environments = {'A', 'B'};
    cfg.baselines = {{BaselineKind::unaware, -20.0, 0.1},
                     {BaselineKind::proposed_stft, -20.0, 0.1},
                     {BaselineKind::at_fgsm, -20.0, 0.1},
                     {BaselineKind::at_pgd, -20.0, 0.1},
                     {BaselineKind::gaussian_smoothing, -20.0, 0.1},
                     {BaselineKind::fq, -20.0, 0.1},
                     {BaselineKind::pa, -20.0, 0.1}};
    cfg.receiver_train = {0.02, 80, 64, 11, LossKind::cross_entropy};
    cfg.dae_train = {0.02, 30, 64, 12, LossKind::mse};
    cfg.eaves_train = {0.02, 60, 64, 13, LossKind::cross_entropy};
    cfg.receiver_dropout = 0.2;
    cfg.dae_dropout = 0.0;
    cfg.eaves_dropout = 0.2;
    return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
    json doc;
    doc["scenario"] = scenario_to_json(cfg.scenario);
    doc["stft"] = {{"window_length", cfg.stft.window_length},
                   {"gaussian_std", cfg.stft.gaussian_std},
                   {"hop", cfg.stft.hop},
                   {"fft_size", cfg.stft.fft_size}};
    doc["attack"] = {{"algorithm", algo_name(cfg.attack.algorithm)},
                     {"norm", norm_name(cfg.attack.norm)},
                     {"iterations", cfg.attack.iterations}};
    doc["psr_grid"] = cfg.psr_grid;
    std::string envs;
    for (char e : cfg.environments) envs.push_back(e);
    doc["environments"] = envs;
    json b = json::array();
    for (const BaselineSpec& s : cfg.baselines)
        b.push_back({{"kind", baseline_name(s.kind)},
                     {"aug_psr_db", s.aug_psr_db},
                     {"noise_std", s.noise_std}});
    doc["baselines"] = std::move(b);
    doc["output_dir"] = cfg.output_dir;
    doc["seed"] = cfg.seed;
    auto train_json = [](const TrainConfig& t) {
        return json{{"learning_rate", t.learning_rate},
                    {"epochs", t.epochs},
                    {"batch_size", t.batch_size},
                    {"seed", t.seed}};
    };
    doc["receiver_train"] = train_json(cfg.receiver_train);
    doc["dae_train"] = train_json(cfg.dae_train);
    doc["eaves_train"] = train_json(cfg.eaves_train);
    doc["receiver_dropout"] = cfg.receiver_dropout;
    doc["dae_dropout"] = cfg.dae_dropout;
    doc["eaves_dropout"] = cfg.eaves_dropout;
    doc["dae_train_psr_db"] = cfg.dae_train_psr_db;
    doc["theorem_examples"] = cfg.theorem_examples;
    doc["assumption_psr_db"] = cfg.assumption_psr_db;
    doc["shap_permutations"] = cfg.shap_permutations;
    doc["shap_inputs_per_class"] = cfg.shap_inputs_per_class;
    doc["grid_search_baselines"] = cfg.grid_search_baselines;
    return doc;
}

ExperimentConfig config_from_json(const json& doc) {
    ExperimentConfig cfg = default_experiment_config();
    if (doc.contains("scenario")) cfg.scenario = scenario_from_json(doc.at("scenario"));
    if (doc.contains("stft")) {
        const json& s = doc.at("stft");
        cfg.stft.window_length = s.value("window_length", cfg.stft.window_length);
        cfg.stft.gaussian_std = s.value("gaussian_std", cfg.stft.gaussian_std);
        cfg.stft.hop = s.value("hop", cfg.stft.hop);
        cfg.stft.fft_size = s.value("fft_size", cfg.stft.fft_size);
    }
    if (doc.contains("attack")) {
        const json& a = doc.at("attack");
        if (a.contains("algorithm"))
            cfg.attack.algorithm =
                a.at("algorithm").get<std::string>() == "pgd" ? AttackAlgo::pgd : AttackAlgo::fgsm;
        if (a.contains("norm"))
            cfg.attack.norm =
                a.at("norm").get<std::string>() == "linf" ? NormKind::linf : NormKind::l2;
        cfg.attack.iterations = a.value("iterations", cfg.attack.iterations);
    }
    if (doc.contains("psr_grid")) cfg.psr_grid = doc.at("psr_grid").get<std::vector<double>>();
    if (doc.contains("environments")) {
        cfg.environments.clear();
        for (char e : doc.at("environments").get<std::string>()) cfg.environments.push_back(e);
    }
    if (doc.contains("baselines")) {
        cfg.baselines.clear();
        for (const json& jb : doc.at("baselines")) {
            BaselineSpec s;
            s.kind = baseline_from_name(jb.at("kind").get<std::string>());
            s.aug_psr_db = jb.value("aug_psr_db", s.aug_psr_db);
            s.noise_std = jb.value("noise_std", s.noise_std);
            cfg.baselines.push_back(s);
        }
    }
    cfg.output_dir = doc.value("output_dir", cfg.output_dir);
    cfg.seed = doc.value("seed", cfg.seed);
    auto train_from = [](const json& j, TrainConfig t, LossKind loss) {
        t.learning_rate = j.value("learning_rate", t.learning_rate);
        t.epochs = j.value("epochs", t.epochs);
        t.batch_size = j.value("batch_size", t.batch_size);
        t.seed = j.value("seed", t.seed);
        t.loss = loss;
        return t;
    };
    if (doc.contains("receiver_train"))
        cfg.receiver_train = train_from(doc.at("receiver_train"), cfg.receiver_train, LossKind::cross_entropy);
    if (doc.contains("dae_train"))
        cfg.dae_train = train_from(doc.at("dae_train"), cfg.dae_train, LossKind::mse);
    if (doc.contains("eaves_train"))
        cfg.eaves_train = train_from(doc.at("eaves_train"), cfg.eaves_train, LossKind::cross_entropy);
    cfg.receiver_dropout = doc.value("receiver_dropout", cfg.receiver_dropout);
    cfg.dae_dropout = doc.value("dae_dropout", cfg.dae_dropout);
    cfg.eaves_dropout = doc.value("eaves_dropout", cfg.eaves_dropout);
    cfg.dae_train_psr_db = doc.value("dae_train_psr_db", cfg.dae_train_psr_db);
    cfg.theorem_examples = doc.value("theorem_examples", cfg.theorem_examples);
    cfg.assumption_psr_db = doc.value("assumption_psr_db", cfg.assumption_psr_db);
    cfg.shap_permutations = doc.value("shap_permutations", cfg.shap_permutations);
    cfg.shap_inputs_per_class = doc.value("shap_inputs_per_class", cfg.shap_inputs_per_class);
    cfg.grid_search_baselines = doc.value("grid_search_baselines", cfg.grid_search_baselines);
    return cfg;
}

MLPModel absorb_input_scale(MLPModel model, double scale) {
    if (scale <= 0.0) throw std::invalid_argument("absorb_input_scale: scale must be > 0");
    model.layers.front().weights /= scale;
    return model;
}

MLPModel absorb_output_scale(MLPModel model, double scale) {
    if (scale <= 0.0) throw std::invalid_argument("absorb_output_scale: scale must be > 0");
    model.layers.back().weights *= scale;
    model.layers.back().biases *= scale;
    return model;
}

TrainedModels train_all(const ExperimentConfig& cfg, const Dataset& rx_data,
                        const Dataset& ev_data) {
    TrainedModels out;
    const FeatureMap time_map = make_feature_pipeline(BaselineKind::unaware, cfg.stft);

    // Receiver: time-domain classifier, Environment A architecture.
    {
        const double scale = feature_rms(rx_data.train, time_map);
        const auto train = featurize(rx_data.train, time_map, scale);
        const auto test = featurize(rx_data.test, time_map, scale);
        MLPModel init = make_mlp(arch_for('A', static_cast<int>(train.front().input.size())),
                                 OutputActivation::sigmoid, cfg.receiver_dropout,
                                 derive_seed(cfg.seed, "init/receiver"));
        TrainConfig tc = cfg.receiver_train;
        tc.loss = LossKind::cross_entropy;
        TrainResult res = sgd_train(std::move(init), train, tc);
        out.receiver_clean_accuracy = accuracy(res.model, test);
        out.receiver = absorb_input_scale(std::move(res.model), scale);
    }

    // DAE trained on the receiver's own signals against the deployed attack
    // family at the configured training PSR.
    {
        std::vector<Vec> clean;
        std::vector<double> labels;
        clean.reserve(rx_data.train.size());
        for (const SignalExample& ex : rx_data.train) {
            clean.push_back(to_real(ex.signal));
            labels.push_back(ex.label);
        }
        Rng rng(derive_seed(cfg.seed, "dae-pairs"));
        DAETrainingSet pairs =
            build_training_pairs(clean, labels, out.receiver, cfg.attack, cfg.dae_train_psr_db, rng);

        double ms = 0.0;
        long count = 0;
        for (const Vec& v : clean) {
            ms += v.squaredNorm();
            count += v.size();
        }
        const double scale = std::sqrt(ms / static_cast<double>(count));
        for (LabeledVector& p : pairs.pairs) {
            p.input /= scale;
            p.target /= scale;
        }
        TrainConfig tc = cfg.dae_train;
        tc.loss = LossKind::mse;
        DAETrainResult res = train_dae(pairs, tc, {256, 128, 64, 128, 256}, cfg.dae_dropout);
        out.dae.encoder = absorb_input_scale(std::move(res.model.encoder), scale);
        out.dae.decoder = absorb_output_scale(std::move(res.model.decoder), scale);
    }

    // Eavesdropper models: every baseline in every requested environment.
    for (char env : cfg.environments) {
        for (const BaselineSpec& spec : cfg.baselines) {
            const FeatureMap fm = make_feature_pipeline(spec.kind, cfg.stft);
            const double scale = feature_rms(ev_data.train, fm);
            const auto train = featurize(ev_data.train, fm, scale);
            const auto test = featurize(ev_data.test, fm, scale);
            const std::string key = bundle_key(env, spec.kind);

            MLPModel init = make_mlp(arch_for(env, static_cast<int>(train.front().input.size())),
                                     OutputActivation::sigmoid, cfg.eaves_dropout,
                                     derive_seed(cfg.seed, "init/" + key));
            TrainConfig tc = cfg.eaves_train;
            tc.loss = LossKind::cross_entropy;
            tc.seed = derive_seed(cfg.seed, "train/" + key);

            ClassifierBundle bundle;
            bundle.spec = spec;
            bundle.environment = env;
            if (spec.kind == BaselineKind::at_fgsm || spec.kind == BaselineKind::at_pgd) {
                const AttackAlgo algo =
                    spec.kind == BaselineKind::at_fgsm ? AttackAlgo::fgsm : AttackAlgo::pgd;
                if (cfg.grid_search_baselines) {
                    TunedBaseline tuned = tune_adversarial(init, train, test, algo, cfg.attack.norm,
                                                           {-30.0, -25.0, -20.0, -15.0}, tc);
                    bundle.model = std::move(tuned.result.model);
                    bundle.chosen_param = tuned.chosen_param;
                } else {
                    bundle.model =
                        train_adversarial(std::move(init), train, algo, cfg.attack.norm,
                                          spec.aug_psr_db, tc)
                            .model;
                    bundle.chosen_param = spec.aug_psr_db;
                }
            } else if (spec.kind == BaselineKind::gaussian_smoothing) {
                if (cfg.grid_search_baselines) {
                    TunedBaseline tuned = tune_gaussian_smoothed(init, train, test,
                                                                 {0.05, 0.1, 0.2, 0.4}, tc);
                    bundle.model = std::move(tuned.result.model);
                    bundle.chosen_param = tuned.chosen_param;
                } else {
                    bundle.model =
                        train_gaussian_smoothed(std::move(init), train, spec.noise_std, tc).model;
                    bundle.chosen_param = spec.noise_std;
                }
            } else {
                bundle.model = sgd_train(std::move(init), train, tc).model;
            }
            bundle.clean_accuracy = accuracy(bundle.model, test);
            bundle.model = absorb_input_scale(std::move(bundle.model), scale);
            out.eavesdroppers.emplace(key, std::move(bundle));
        }
    }
    return out;
}

std::vector<EvalTransmission> build_eval_set(const ExperimentConfig& cfg) {
    const ScenarioConfig& sc = cfg.scenario;
    const auto profiles = scenario_profiles(sc);
    const IQSignal preamble = make_preamble(sc.signal_len);
    const int n_seen = sc.n_trusted + sc.n_untrusted_seen;
    const int per_device = eval_count_per_device(sc);

    std::vector<EvalTransmission> out;
    out.reserve(static_cast<size_t>(n_seen) * per_device);
    for (int d = 0; d < n_seen; ++d) {
        const TransmitterProfile& profile = profiles[static_cast<size_t>(d)];
        const LinkChannel link_rx = make_link_channel(sc, Vantage::receiver, profile.device_id);
        const LinkChannel link_ev = make_link_channel(sc, Vantage::eavesdropper, profile.device_id);
        for (int j = 0; j < per_device; ++j) {
            Rng rng(derive_seed(cfg.seed, "eval",
                                static_cast<std::uint64_t>(d) * sc.signals_per_device + j));
            EvalTransmission tx;
            tx.device_id = profile.device_id;
            tx.label = profile.trusted ? 1.0 : 0.0;
            tx.emitted = apply_fingerprint(preamble, profile, rng.raw());

            // The transmitter's belief about the receive-domain signal: its
            // own draw from the link distribution.
            ChannelRealization estimate = draw_link_realization(link_rx, sc.signal_len, rng);
            tx.s_approx_real = to_real(transmit(tx.emitted, estimate, sc.snr_db, rng));

            tx.ch_rx = draw_link_realization(link_rx, sc.signal_len, rng);
            tx.noise_rx = draw_noise(tx.emitted, tx.ch_rx, sc.snr_db, rng);
            tx.ch_ev = draw_link_realization(link_ev, sc.signal_len, rng);
            tx.noise_ev = draw_noise(tx.emitted, tx.ch_ev, sc.snr_db, rng);
            out.push_back(std::move(tx));
        }
    }
    return out;
}

SweepResult run_sweep(const ExperimentConfig& cfg, const TrainedModels& models,
                      const std::vector<EvalTransmission>& eval_set) {
    if (eval_set.empty()) throw std::invalid_argument("run_sweep: empty evaluation set");
    const Eigen::Index n = static_cast<Eigen::Index>(eval_set.size());
    const Eigen::Index width = eval_set.front().s_approx_real.size();

    Mat approx(width, n);
    Vec labels(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        approx.col(i) = eval_set[static_cast<size_t>(i)].s_approx_real;
        labels(i) = eval_set[static_cast<size_t>(i)].label;
    }

    std::vector<double> psr_points;
    psr_points.push_back(-std::numeric_limits<double>::infinity());
    for (double p : cfg.psr_grid) psr_points.push_back(p);

    // feature maps per distinct baseline kind
    std::map<std::string, FeatureMap> maps;
    for (const auto& [key, bundle] : models.eavesdroppers)
        maps.emplace(key, make_feature_pipeline(bundle.spec.kind, cfg.stft));

    SweepResult result;
    for (double psr : psr_points) {
        Mat deltas = Mat::Zero(width, n);
        if (!std::isinf(psr))
            deltas = craft_deltas_at_psr(models.receiver, approx, labels, cfg.attack, psr);

        Mat rx_features(width, n);
        std::vector<IQSignal> ev_signals;
        ev_signals.reserve(static_cast<size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
            const EvalTransmission& tx = eval_set[static_cast<size_t>(i)];
            const IQSignal x_adv = std::isinf(psr) ? tx.emitted
                                                   : add(tx.emitted, to_complex(deltas.col(i)));
            rx_features.col(i) = to_real(transmit_with_noise(x_adv, tx.ch_rx, tx.noise_rx));
            ev_signals.push_back(transmit_with_noise(x_adv, tx.ch_ev, tx.noise_ev));
        }

        auto accuracy_of = [&](const Mat& outputs) {
            int correct = 0;
            for (Eigen::Index i = 0; i < n; ++i)
                if ((outputs(0, i) >= 0.5 ? 1.0 : 0.0) == labels(i)) ++correct;
            return static_cast<double>(correct) / static_cast<double>(n);
        };

        // receiver without and with the DAE front end
        result.rows.push_back({"receiver", '-', cfg.attack.norm, cfg.attack.algorithm, psr,
                               accuracy_of(forward_batch(models.receiver, rx_features)),
                               static_cast<int>(n)});
        const Mat denoised = forward_batch(models.dae.decoder,
                                           forward_batch(models.dae.encoder, rx_features));
        result.rows.push_back({"receiver_dae", '-', cfg.attack.norm, cfg.attack.algorithm, psr,
                               accuracy_of(forward_batch(models.receiver, denoised)),
                               static_cast<int>(n)});

        for (const auto& [key, bundle] : models.eavesdroppers) {
            const FeatureMap& fm = maps.at(key);
            Mat features(bundle.model.input_width(), n);
            for (Eigen::Index i = 0; i < n; ++i)
                features.col(i) = fm(ev_signals[static_cast<size_t>(i)]);
            result.rows.push_back({key, bundle.environment, cfg.attack.norm, cfg.attack.algorithm,
                                   psr, accuracy_of(forward_batch(bundle.model, features)),
                                   static_cast<int>(n)});
        }
    }
    return result;
}

namespace {

ConfusionCounts count_confusion(const Vec& outputs, const Vec& labels) {
    ConfusionCounts c;
    for (Eigen::Index i = 0; i < outputs.size(); ++i) {
        const bool pred = outputs(i) >= 0.5;
        const bool truth = labels(i) >= 0.5;
        if (pred && truth) ++c.tp;
        else if (pred && !truth) ++c.fp;
        else if (!pred && truth) ++c.fn;
        else ++c.tn;
    }
    return c;
}

}  // namespace

ConfusionCounts confusion_seen(const ExperimentConfig& cfg, const TrainedModels& models,
                               const std::vector<EvalTransmission>& eval_set,
                               const std::string& defense) {
    const Eigen::Index n = static_cast<Eigen::Index>(eval_set.size());
    Vec labels(n), outputs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const EvalTransmission& tx = eval_set[static_cast<size_t>(i)];
        labels(i) = tx.label;
        if (defense == "receiver" || defense == "receiver_dae") {
            Vec f = to_real(transmit_with_noise(tx.emitted, tx.ch_rx, tx.noise_rx));
            if (defense == "receiver_dae") f = denoise(models.dae, f);
            outputs(i) = forward(models.receiver, f)(0);
        } else {
            const ClassifierBundle& bundle = models.eavesdroppers.at(defense);
            const FeatureMap fm = make_feature_pipeline(bundle.spec.kind, cfg.stft);
            outputs(i) =
                forward(bundle.model, fm(transmit_with_noise(tx.emitted, tx.ch_ev, tx.noise_ev)))(0);
        }
    }
    return count_confusion(outputs, labels);
}

ConfusionCounts confusion_unseen(const ExperimentConfig& cfg, const TrainedModels& models,
                                 const Dataset& data, const std::string& defense) {
    const Eigen::Index n = static_cast<Eigen::Index>(data.unseen.size());
    if (n == 0) return {};
    Vec labels(n), outputs(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const SignalExample& ex = data.unseen[static_cast<size_t>(i)];
        labels(i) = ex.label;
        if (defense == "receiver" || defense == "receiver_dae") {
            Vec f = to_real(ex.signal);
            if (defense == "receiver_dae") f = denoise(models.dae, f);
            outputs(i) = forward(models.receiver, f)(0);
        } else {
            const ClassifierBundle& bundle = models.eavesdroppers.at(defense);
            const FeatureMap fm = make_feature_pipeline(bundle.spec.kind, cfg.stft);
            outputs(i) = forward(bundle.model, fm(ex.signal))(0);
        }
    }
    return count_confusion(outputs, labels);
}

ExplainResult run_explain(const ExperimentConfig& cfg, const TrainedModels& models,
                          const Dataset& ev_data) {
    // Explain the proposed STFT eavesdropper; prefer Environment A.
    const ClassifierBundle* bundle = nullptr;
    for (const auto& [key, b] : models.eavesdroppers)
        if (b.spec.kind == BaselineKind::proposed_stft && (bundle == nullptr || b.environment == 'A'))
            bundle = &b;
    if (bundle == nullptr)
        throw std::invalid_argument("run_explain: no proposed_stft eavesdropper was trained");

    const FeatureMap fm = make_feature_pipeline(BaselineKind::proposed_stft, cfg.stft);
    const int T = cfg.stft.frames_for(cfg.scenario.signal_len);
    const int F = cfg.stft.fft_size;

    // Absent features are replaced by their training-set means.
    Vec background = Vec::Zero(static_cast<Eigen::Index>(T) * F);
    for (const SignalExample& ex : ev_data.train) background += fm(ex.signal);
    background /= static_cast<double>(ev_data.train.size());
    const MaskingPolicy policy{background};

    const MLPModel& model = bundle->model;
    BatchScalarModel batch_model = [&model](const Mat& inputs) {
        return forward_batch(model, inputs).row(0).transpose().eval();
    };

    std::vector<const SignalExample*> chosen;
    int want0 = cfg.shap_inputs_per_class, want1 = cfg.shap_inputs_per_class;
    for (const SignalExample& ex : ev_data.test) {
        if (ex.label == 0 && want0 > 0) { chosen.push_back(&ex); --want0; }
        if (ex.label == 1 && want1 > 0) { chosen.push_back(&ex); --want1; }
        if (want0 == 0 && want1 == 0) break;
    }
    if (chosen.empty()) throw std::invalid_argument("run_explain: no test inputs available");

    Vec mean_abs = Vec::Zero(background.size());
    for (size_t i = 0; i < chosen.size(); ++i) {
        const ShapleyEstimate est =
            shapley_mc_batch(batch_model, fm(chosen[i]->signal), policy, cfg.shap_permutations,
                             derive_seed(cfg.seed, "shap", i));
        mean_abs += est.attributions.cwiseAbs();
    }
    mean_abs /= static_cast<double>(chosen.size());

    ExplainResult out;
    out.mean_abs_attribution.resize(T, F);
    for (int t = 0; t < T; ++t)
        for (int f = 0; f < F; ++f)
            out.mean_abs_attribution(t, f) = mean_abs(static_cast<Eigen::Index>(t) * F + f);

    const BandPartition bands = standard_bands(F);
    out.mid_band_fraction = band_importance(mean_abs, T, F, bands.mid).fraction;

    std::vector<std::pair<int, double>> ranked;
    for (Eigen::Index k = 0; k < mean_abs.size(); ++k)
        ranked.emplace_back(static_cast<int>(k), mean_abs(k));
    std::sort(ranked.begin(), ranked.end(),
              [](const auto& a, const auto& b) { return a.second > b.second; });
    ranked.resize(std::min<size_t>(10, ranked.size()));
    out.top_features = std::move(ranked);
    return out;
}

SpectralResults run_spectral_checks(const ExperimentConfig& cfg, const TrainedModels& models) {
    AttackVerificationContext ctx;
    ctx.receiver_model = &models.receiver;
    ctx.scenario = cfg.scenario;
    ctx.stft = cfg.stft;
    ctx.n_examples = cfg.theorem_examples;
    ctx.seed = derive_seed(cfg.seed, "spectral");

    const BandPartition bands = standard_bands(cfg.stft.fft_size);
    SpectralResults out;
    for (double psr : cfg.psr_grid)
        out.theorem_rows.push_back({psr, verify_theorem1(ctx, cfg.attack, psr, bands.mid)});

    PerturbationSpec l2 = cfg.attack;
    l2.norm = NormKind::l2;
    PerturbationSpec linf = cfg.attack;
    linf.norm = NormKind::linf;
    out.l2_bands = verify_assumptions(ctx, l2, cfg.assumption_psr_db);
    out.linf_bands = verify_assumptions(ctx, linf, cfg.assumption_psr_db);
    out.noise_bands = random_noise_band_energy(ctx, cfg.assumption_psr_db);
    return out;
}

namespace {

std::string psr_cell(double psr) {
    return std::isinf(psr) ? std::string("-inf") : fmt_double(psr);
}

void write_sweep_csv(const fs::path& path, const SweepResult& sweep) {
    CsvTable t;
    t.header = {"defense", "environment", "norm", "algorithm", "psr_db", "accuracy", "n_test"};
    for (const SweepRow& r : sweep.rows)
        t.rows.push_back({r.defense, std::string(1, r.environment), norm_name(r.norm),
                          algo_name(r.algorithm), psr_cell(r.psr_db), fmt_double(r.accuracy),
                          std::to_string(r.n_test)});
    write_csv(path, t);
}

void write_confusion_csv(const fs::path& path,
                         const std::vector<std::tuple<std::string, std::string, ConfusionCounts>>& rows) {
    CsvTable t;
    t.header = {"defense", "split", "tp", "fp", "tn", "fn", "accuracy"};
    for (const auto& [defense, split, c] : rows)
        t.rows.push_back({defense, split, std::to_string(c.tp), std::to_string(c.fp),
                          std::to_string(c.tn), std::to_string(c.fn), fmt_double(c.accuracy())});
    write_csv(path, t);
}

void write_theorem_csv(const fs::path& path, const SpectralResults& res) {
    CsvTable t;
    t.header = {"psr_db", "mid_band_relative_error", "per_bin_max_error"};
    for (const TheoremSweepRow& r : res.theorem_rows)
        t.rows.push_back({fmt_double(r.psr_db), fmt_double(r.report.mid_band_relative_error),
                          fmt_double(r.report.per_bin_max_error)});
    write_csv(path, t);
}

void write_assumptions_csv(const fs::path& path, const SpectralResults& res) {
    CsvTable t;
    t.header = {"perturbation", "low_fraction", "mid_fraction", "high_fraction", "argmax_band"};
    auto row = [&](const char* name, const BandEnergyReport& r) {
        static const char* band_names[] = {"low", "mid", "high"};
        t.rows.push_back({name, fmt_double(r.low_fraction), fmt_double(r.mid_fraction),
                          fmt_double(r.high_fraction), band_names[r.argmax_band()]});
    };
    row("l2", res.l2_bands);
    row("linf", res.linf_bands);
    row("random_noise", res.noise_bands);
    write_csv(path, t);
}

}  // namespace

std::filesystem::path run_pipeline(const ExperimentConfig& cfg, const std::string& last_stage) {
    cfg.validate();
    const fs::path out_dir(cfg.output_dir);
    fs::create_directories(out_dir);
    StageLog log;

    json manifest;
    manifest["config"] = config_to_json(cfg);
    manifest["tool"] = "rffsim";
    manifest["format_version"] = 1;

    Dataset rx_data, ev_data;
    bool done = false;
    auto stage = [&](const std::string& name, auto&& body) {
        if (done) return;
        log.begin(name);
        try {
            body();
        } catch (const std::exception& e) {
            throw std::runtime_error("stage " + name + " failed: " + e.what());
        }
        if (name == last_stage) done = true;
    };

    stage("generate", [&] {
        rx_data = generate_dataset(cfg.scenario, Vantage::receiver);
        ev_data = generate_dataset(cfg.scenario, Vantage::eavesdropper);
        write_dataset_csv(out_dir / "dataset_receiver.csv", rx_data);
        write_dataset_sidecar(out_dir / "dataset_receiver.json", rx_data);
        write_dataset_csv(out_dir / "dataset_eavesdropper.csv", ev_data);
        write_dataset_sidecar(out_dir / "dataset_eavesdropper.json", ev_data);

        // seen/unseen discipline audit
        std::set<int> train_devices, unseen_devices;
        for (const auto& ex : rx_data.train) train_devices.insert(ex.device_id);
        for (const auto& ex : rx_data.unseen) unseen_devices.insert(ex.device_id);
        for (int d : unseen_devices)
            if (train_devices.count(d))
                throw std::runtime_error("unseen device " + std::to_string(d) + " leaked into training");
    });

    TrainedModels models;
    std::vector<EvalTransmission> eval_set;
    stage("train", [&] {
        models = train_all(cfg, rx_data, ev_data);
        eval_set = build_eval_set(cfg);
        write_text_file(out_dir / "receiver.json", model_to_json(models.receiver).dump(2) + "\n");
        write_text_file(out_dir / "dae.json",
                        dae_to_json(models.dae, cfg.dae_train_psr_db, cfg.attack).dump(2) + "\n");
        json acc;
        acc["receiver_clean_accuracy"] = models.receiver_clean_accuracy;
        for (const auto& [key, bundle] : models.eavesdroppers) {
            std::string fname = "eaves_" + std::string(1, bundle.environment) + "_" +
                                baseline_name(bundle.spec.kind) + ".json";
            write_text_file(out_dir / fname, model_to_json(bundle.model).dump(2) + "\n");
            acc["eavesdropper"][key] = {{"clean_accuracy", bundle.clean_accuracy},
                                        {"chosen_param", bundle.chosen_param}};
        }
        manifest["accuracies"] = std::move(acc);

        std::vector<std::tuple<std::string, std::string, ConfusionCounts>> conf_rows;
        for (const std::string& defense : defense_order(models)) {
            conf_rows.emplace_back(defense, "seen",
                                   confusion_seen(cfg, models, eval_set, defense));
            conf_rows.emplace_back(
                defense, "unseen",
                confusion_unseen(cfg, models,
                                 defense.rfind("receiver", 0) == 0 ? rx_data : ev_data, defense));
        }
        write_confusion_csv(out_dir / "confusion.csv", conf_rows);
    });

    stage("attack", [&] {
        const Eigen::Index n = static_cast<Eigen::Index>(eval_set.size());
        Mat approx(eval_set.front().s_approx_real.size(), n);
        Vec labels(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            approx.col(i) = eval_set[static_cast<size_t>(i)].s_approx_real;
            labels(i) = eval_set[static_cast<size_t>(i)].label;
        }
        const Mat deltas =
            craft_deltas_at_psr(models.receiver, approx, labels, cfg.attack, cfg.assumption_psr_db);
        const Mat targets = labels.transpose();
        const Mat out_before = forward_batch(models.receiver, approx);
        const Mat out_after = forward_batch(models.receiver, approx + deltas);

        CsvTable t;
        t.header = {"example_id", "psr_db", "loss_before", "loss_after", "norm"};
        for (Eigen::Index i = 0; i < n; ++i) {
            Vec pb(1), pa(1), lbl(1);
            pb(0) = out_before(0, i);
            pa(0) = out_after(0, i);
            lbl(0) = labels(i);
            const double nrm = cfg.attack.norm == NormKind::l2
                                   ? deltas.col(i).norm()
                                   : deltas.col(i).cwiseAbs().maxCoeff();
            t.rows.push_back({std::to_string(i), fmt_double(cfg.assumption_psr_db),
                              fmt_double(loss_bce(pb, lbl)), fmt_double(loss_bce(pa, lbl)),
                              fmt_double(nrm)});
        }
        write_csv(out_dir / "attack_results.csv", t);
    });

    SweepResult sweep;
    stage("sweep", [&] {
        sweep = run_sweep(cfg, models, eval_set);
        write_sweep_csv(out_dir / "sweep.csv", sweep);
    });

    SpectralResults spectral;
    stage("verify-theorem", [&] {
        spectral = run_spectral_checks(cfg, models);
        write_theorem_csv(out_dir / "theorem.csv", spectral);
        write_assumptions_csv(out_dir / "assumptions.csv", spectral);
        manifest["spectral"] = {
            {"l2_argmax_band", spectral.l2_bands.argmax_band()},
            {"linf_argmax_band", spectral.linf_bands.argmax_band()},
            {"noise_max_fraction", spectral.noise_bands.max_fraction()},
        };
    });

    ExplainResult explain;
    stage("explain", [&] {
        explain = run_explain(cfg, models, ev_data);
        CsvTable t;
        t.header = {"frame"};
        for (int f = 0; f < explain.mean_abs_attribution.cols(); ++f)
            t.header.push_back("f_" + std::to_string(f));
        for (Eigen::Index r = 0; r < explain.mean_abs_attribution.rows(); ++r) {
            std::vector<std::string> row{std::to_string(r)};
            for (Eigen::Index c = 0; c < explain.mean_abs_attribution.cols(); ++c)
                row.push_back(fmt_double(explain.mean_abs_attribution(r, c)));
            t.rows.push_back(std::move(row));
        }
        write_csv(out_dir / "attribution_map.csv", t);

        CsvTable top;
        top.header = {"rank", "frame", "bin", "mean_abs_phi"};
        const int F = cfg.stft.fft_size;
        for (size_t r = 0; r < explain.top_features.size(); ++r)
            top.rows.push_back({std::to_string(r + 1),
                                std::to_string(explain.top_features[r].first / F),
                                std::to_string(explain.top_features[r].first % F),
                                fmt_double(explain.top_features[r].second)});
        write_csv(out_dir / "top_features.csv", top);
        manifest["explain"] = {{"mid_band_fraction", explain.mid_band_fraction}};
    });

    stage("report", [&] {
        // accuracy vs PSR, one series per defense; clean column drawn at the
        // left edge of the grid
        SeriesPlot plot;
        plot.title = "Accuracy vs PSR (" + std::string(norm_name(cfg.attack.norm)) + " " +
                     algo_name(cfg.attack.algorithm) + ")";
        plot.x_label = "PSR [dB]";
        plot.y_label = "accuracy";
        std::map<std::string, SeriesPlot::Series> series;
        const double x_clean = cfg.psr_grid.front() - 6.0;
        for (const SweepRow& r : sweep.rows) {
            auto& s = series[r.defense];
            s.name = r.defense;
            s.x.push_back(std::isinf(r.psr_db) ? x_clean : r.psr_db);
            s.y.push_back(r.accuracy);
        }
        for (auto& [name, s] : series) plot.series.push_back(std::move(s));
        write_text_file(out_dir / "sweep.svg", render_line_chart(plot));

        SeriesPlot tplot;
        tplot.title = "Mid-band PSD relative error vs PSR";
        tplot.x_label = "PSR [dB]";
        tplot.y_label = "relative error";
        SeriesPlot::Series ts;
        ts.name = "mid-band error";
        for (const TheoremSweepRow& r : spectral.theorem_rows) {
            ts.x.push_back(r.psr_db);
            ts.y.push_back(r.report.mid_band_relative_error);
        }
        tplot.series.push_back(std::move(ts));
        write_text_file(out_dir / "theorem.svg", render_line_chart(tplot));

        write_text_file(out_dir / "attribution_map.svg",
                        render_heatmap(explain.mean_abs_attribution, "mean |phi| per bin"));
    });

    // manifest with content hashes over everything written above
    json files = json::object();
    std::vector<fs::path> paths;
    for (const auto& entry : fs::directory_iterator(out_dir))
        if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
            paths.push_back(entry.path());
    std::sort(paths.begin(), paths.end());
    for (const fs::path& p : paths) files[p.filename().string()] = sha256_file(p);
    manifest["files"] = std::move(files);
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return out_dir;
}

int run_stage_command(const std::string& stage, const ExperimentConfig& cfg) {
    const std::vector<std::string> order{"generate", "train",  "attack", "sweep",
                                         "verify-theorem", "explain", "report"};
    if (stage != "run" && std::find(order.begin(), order.end(), stage) == order.end())
        throw std::invalid_argument("unknown stage: " + stage);
    // Stages build on one another and regeneration is deterministic, so a
    // single-stage request runs the pipeline up to that stage.
    run_pipeline(cfg, stage == "run" ? "report" : stage);
    return 0;
}

}  // namespace rff
