#include "rff/dae.hpp"

#include <algorithm>
#include <stdexcept>

namespace rff {

void DAEModel::validate() const {
    encoder.validate();
    decoder.validate();
    if (encoder.output_width() != decoder.input_width())
        throw std::invalid_argument("dae: encoder/decoder width mismatch");
    if (encoder.output_width() >= encoder.input_width())
        throw std::invalid_argument("dae: bottleneck must be narrower than the input");
    if (decoder.output_width() != encoder.input_width())
        throw std::invalid_argument("dae: decoder must restore the input width");
}

DAETrainingSet build_training_pairs(const std::vector<Vec>& clean_signals,
                                    const std::vector<double>& labels,
                                    const MLPModel& receiver_model, const PerturbationSpec& spec,
                                    double train_psr_db, Rng& rng) {
    if (clean_signals.size() != labels.size())
        throw std::invalid_argument("build_training_pairs: signal/label count mismatch");
    DAETrainingSet set;
    set.train_psr_db = train_psr_db;
    set.spec = spec;
    set.pairs.reserve(clean_signals.size() * 2);

    PerturbationSpec sized = spec;
    for (size_t i = 0; i < clean_signals.size(); ++i) {
        const Vec& s = clean_signals[i];
        const double psr_lin = std::pow(10.0, train_psr_db / 10.0);
        sized.power_budget = spec.norm == NormKind::l2
                                 ? psr_lin * s.squaredNorm()
                                 : psr_lin * s.squaredNorm() / static_cast<double>(s.size());
        AttackResult res = craft_delta(receiver_model, s, labels[i], sized, &rng);
        Vec perturbed = s;
        if (res.delta.norm() > 0.0) perturbed += scale_to_psr(res.delta, s, train_psr_db);
        set.pairs.push_back({std::move(perturbed), s});
    }
    for (const Vec& s : clean_signals) set.pairs.push_back({s, s});
    return set;
}

DAETrainResult train_dae(const DAETrainingSet& pairs, const TrainConfig& config,
                         const std::vector<int>& hidden_widths, double dropout) {
    if (pairs.pairs.empty()) throw std::invalid_argument("train_dae: empty training set");
    const int width = static_cast<int>(pairs.pairs.front().input.size());

    const auto bottleneck_it = std::min_element(hidden_widths.begin(), hidden_widths.end());
    const size_t bottleneck_idx =
        static_cast<size_t>(std::distance(hidden_widths.begin(), bottleneck_it));

    std::vector<int> widths;
    widths.push_back(width);
    widths.insert(widths.end(), hidden_widths.begin(), hidden_widths.end());
    widths.push_back(width);

    TrainConfig cfg = config;
    cfg.loss = LossKind::mse;
    MLPModel stack = make_mlp(widths, OutputActivation::identity, dropout, cfg.seed);
    TrainResult trained = sgd_train(std::move(stack), pairs.pairs, cfg);

    // Split the trained stack at the bottleneck: encoder ends with the layer
    // producing the narrowest activation.
    DAETrainResult out;
    out.epoch_loss = std::move(trained.epoch_loss);
    auto& layers = trained.model.layers;
    out.model.encoder.output_activation = OutputActivation::identity;
    out.model.decoder.output_activation = OutputActivation::identity;
    for (size_t l = 0; l < layers.size(); ++l) {
        if (l <= bottleneck_idx)
            out.model.encoder.layers.push_back(std::move(layers[l]));
        else
            out.model.decoder.layers.push_back(std::move(layers[l]));
    }
    out.model.validate();
    return out;
}

Vec denoise(const DAEModel& model, const Vec& noisy) {
    if (noisy.size() != model.encoder.input_width())
        throw std::invalid_argument("denoise: input width mismatch");
    return forward(model.decoder, forward(model.encoder, noisy));
}

}  // namespace rff
