#include "rff/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace rff {

namespace {

const char* activation_name(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::identity: return "identity";
    }
    throw std::logic_error("unknown activation");
}

Activation activation_from_name(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "sigmoid") return Activation::sigmoid;
    if (s == "identity") return Activation::identity;
    throw std::invalid_argument("unknown activation: " + s);
}

constexpr int kModelFormatVersion = 1;

}  // namespace

json model_to_json(const MLPModel& model) {
    json doc;
    doc["format_version"] = kModelFormatVersion;
    doc["output_activation"] =
        model.output_activation == OutputActivation::sigmoid ? "sigmoid" : "identity";
    json layers = json::array();
    for (const DenseLayer& layer : model.layers) {
        json jl;
        jl["activation"] = activation_name(layer.activation);
        jl["dropout_rate"] = layer.dropout_rate;
        jl["rows"] = layer.weights.rows();
        jl["cols"] = layer.weights.cols();
        json w = json::array();
        for (Eigen::Index r = 0; r < layer.weights.rows(); ++r)
            for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) w.push_back(layer.weights(r, c));
        jl["weights"] = std::move(w);
        json b = json::array();
        for (Eigen::Index r = 0; r < layer.biases.size(); ++r) b.push_back(layer.biases(r));
        jl["biases"] = std::move(b);
        layers.push_back(std::move(jl));
    }
    doc["layers"] = std::move(layers);
    return doc;
}

MLPModel model_from_json(const json& doc) {
    if (doc.at("format_version").get<int>() != kModelFormatVersion)
        throw std::invalid_argument("model document: unsupported format version");
    MLPModel model;
    model.output_activation = doc.at("output_activation").get<std::string>() == "sigmoid"
                                  ? OutputActivation::sigmoid
                                  : OutputActivation::identity;
    for (const json& jl : doc.at("layers")) {
        DenseLayer layer;
        layer.activation = activation_from_name(jl.at("activation").get<std::string>());
        layer.dropout_rate = jl.at("dropout_rate").get<double>();
        const Eigen::Index rows = jl.at("rows").get<Eigen::Index>();
        const Eigen::Index cols = jl.at("cols").get<Eigen::Index>();
        const auto& w = jl.at("weights");
        if (static_cast<Eigen::Index>(w.size()) != rows * cols)
            throw std::invalid_argument("model document: weight array size mismatch");
        layer.weights.resize(rows, cols);
        Eigen::Index k = 0;
        for (Eigen::Index r = 0; r < rows; ++r)
            for (Eigen::Index c = 0; c < cols; ++c) layer.weights(r, c) = w[k++].get<double>();
        const auto& b = jl.at("biases");
        if (static_cast<Eigen::Index>(b.size()) != rows)
            throw std::invalid_argument("model document: bias array size mismatch");
        layer.biases.resize(rows);
        for (Eigen::Index r = 0; r < rows; ++r) layer.biases(r) = b[r].get<double>();
        model.layers.push_back(std::move(layer));
    }
    model.validate();
    return model;
}

json dae_to_json(const DAEModel& model, double train_psr_db, const PerturbationSpec& spec) {
    json doc;
    doc["encoder"] = model_to_json(model.encoder);
    doc["decoder"] = model_to_json(model.decoder);
    doc["manifest"] = {
        {"train_psr_db", train_psr_db},
        {"attack_algorithm", spec.algorithm == AttackAlgo::fgsm ? "fgsm" : "pgd"},
        {"attack_norm", spec.norm == NormKind::l2 ? "l2" : "linf"},
        {"attack_iterations", spec.iterations},
    };
    return doc;
}

DAEModel dae_from_json(const json& doc) {
    DAEModel model;
    model.encoder = model_from_json(doc.at("encoder"));
    model.decoder = model_from_json(doc.at("decoder"));
    model.validate();
    return model;
}

json scenario_to_json(const ScenarioConfig& cfg) {
    return json{{"n_trusted", cfg.n_trusted},
                {"n_untrusted_seen", cfg.n_untrusted_seen},
                {"n_untrusted_unseen", cfg.n_untrusted_unseen},
                {"signals_per_device", cfg.signals_per_device},
                {"signal_len", cfg.signal_len},
                {"snr_db", cfg.snr_db},
                {"channel_model",
                 cfg.channel_model == ChannelModel::rayleigh_block ? "rayleigh_block" : "rician"},
                {"coherence_block", cfg.coherence_block},
                {"channel_jitter", cfg.channel_jitter},
                {"seed", cfg.seed},
                {"max_gain_imbalance_db", cfg.max_gain_imbalance_db},
                {"max_phase_imbalance_rad", cfg.max_phase_imbalance_rad},
                {"max_dc_offset", cfg.max_dc_offset},
                {"max_cfo", cfg.max_cfo},
                {"max_phase_noise_std", cfg.max_phase_noise_std}};
}

ScenarioConfig scenario_from_json(const json& doc) {
    ScenarioConfig cfg;
    cfg.n_trusted = doc.value("n_trusted", cfg.n_trusted);
    cfg.n_untrusted_seen = doc.value("n_untrusted_seen", cfg.n_untrusted_seen);
    cfg.n_untrusted_unseen = doc.value("n_untrusted_unseen", cfg.n_untrusted_unseen);
    cfg.signals_per_device = doc.value("signals_per_device", cfg.signals_per_device);
    cfg.signal_len = doc.value("signal_len", cfg.signal_len);
    cfg.snr_db = doc.value("snr_db", cfg.snr_db);
    if (doc.contains("channel_model"))
        cfg.channel_model = doc.at("channel_model").get<std::string>() == "rician"
                                ? ChannelModel::rician
                                : ChannelModel::rayleigh_block;
    cfg.coherence_block = doc.value("coherence_block", cfg.coherence_block);
    cfg.channel_jitter = doc.value("channel_jitter", cfg.channel_jitter);
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.max_gain_imbalance_db = doc.value("max_gain_imbalance_db", cfg.max_gain_imbalance_db);
    cfg.max_phase_imbalance_rad = doc.value("max_phase_imbalance_rad", cfg.max_phase_imbalance_rad);
    cfg.max_dc_offset = doc.value("max_dc_offset", cfg.max_dc_offset);
    cfg.max_cfo = doc.value("max_cfo", cfg.max_cfo);
    cfg.max_phase_noise_std = doc.value("max_phase_noise_std", cfg.max_phase_noise_std);
    return cfg;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_csv(const std::filesystem::path& path, const CsvTable& table) {
    std::ostringstream out;
    for (size_t i = 0; i < table.header.size(); ++i)
        out << (i ? "," : "") << table.header[i];
    out << '\n';
    for (const auto& row : table.rows) {
        if (row.size() != table.header.size())
            throw std::invalid_argument("write_csv: row width differs from header");
        for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
        out << '\n';
    }
    write_text_file(path, out.str());
}

void write_dataset_csv(const std::filesystem::path& csv_path, const Dataset& dataset) {
    CsvTable table;
    table.header = {"device_id", "label", "split"};
    for (int k = 0; k < 2 * dataset.config.signal_len; ++k)
        table.header.push_back("f_" + std::to_string(k));

    auto emit = [&](const std::vector<SignalExample>& split, const char* name) {
        for (const SignalExample& ex : split) {
            std::vector<std::string> row{std::to_string(ex.device_id), std::to_string(ex.label),
                                         name};
            const Vec v = to_real(ex.signal);
            for (Eigen::Index k = 0; k < v.size(); ++k) row.push_back(fmt_double(v(k)));
            table.rows.push_back(std::move(row));
        }
    };
    emit(dataset.train, "train");
    emit(dataset.test, "test");
    emit(dataset.unseen, "unseen");
    write_csv(csv_path, table);
}

void write_dataset_sidecar(const std::filesystem::path& json_path, const Dataset& dataset) {
    json doc;
    doc["scenario"] = scenario_to_json(dataset.config);
    doc["vantage"] = dataset.vantage == Vantage::receiver ? "receiver" : "eavesdropper";
    doc["counts"] = {{"train", dataset.train.size()},
                     {"test", dataset.test.size()},
                     {"unseen", dataset.unseen.size()}};
    int positives = 0;
    for (const auto& ex : dataset.train) positives += ex.label;
    doc["train_label_balance"] =
        dataset.train.empty() ? 0.0 : static_cast<double>(positives) / dataset.train.size();
    write_text_file(json_path, doc.dump(2) + "\n");
}

std::string sha256_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xf]);
    }
    return out;
}

std::string sha256_file(const std::filesystem::path& path) {
    return sha256_hex(read_text_file(path));
}

namespace {

struct Extent {
    double lo = 0.0, hi = 1.0;
    void grow(double v) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
};

const char* kSeriesColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                               "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

}  // namespace

std::string render_line_chart(const SeriesPlot& plot) {
    constexpr int W = 760, H = 480, ML = 64, MR = 170, MT = 40, MB = 48;
    Extent xe{1e300, -1e300}, ye{1e300, -1e300};
    for (const auto& s : plot.series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            xe.grow(s.x[i]);
            ye.grow(s.y[i]);
        }
    if (xe.lo > xe.hi) { xe = {0, 1}; ye = {0, 1}; }
    if (xe.hi == xe.lo) xe.hi = xe.lo + 1;
    if (ye.hi == ye.lo) ye.hi = ye.lo + 1;
    auto px = [&](double x) { return ML + (x - xe.lo) / (xe.hi - xe.lo) * (W - ML - MR); };
    auto py = [&](double y) { return H - MB - (y - ye.lo) / (ye.hi - ye.lo) * (H - MT - MB); };

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='15'>" << plot.title
        << "</text>\n";
    svg << "<line x1='" << ML << "' y1='" << H - MB << "' x2='" << W - MR << "' y2='" << H - MB
        << "' stroke='black'/>\n";
    svg << "<line x1='" << ML << "' y1='" << MT << "' x2='" << ML << "' y2='" << H - MB
        << "' stroke='black'/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = xe.lo + (xe.hi - xe.lo) * i / 4.0;
        const double yv = ye.lo + (ye.hi - ye.lo) * i / 4.0;
        svg << "<text x='" << px(xv) << "' y='" << H - MB + 18
            << "' text-anchor='middle' font-size='11'>" << fmt_double(std::round(xv * 100) / 100)
            << "</text>\n";
        svg << "<text x='" << ML - 8 << "' y='" << py(yv) + 4
            << "' text-anchor='end' font-size='11'>" << fmt_double(std::round(yv * 1000) / 1000)
            << "</text>\n";
    }
    svg << "<text x='" << (ML + W - MR) / 2 << "' y='" << H - 10
        << "' text-anchor='middle' font-size='12'>" << plot.x_label << "</text>\n";
    svg << "<text x='16' y='" << (MT + H - MB) / 2 << "' font-size='12' transform='rotate(-90 16 "
        << (MT + H - MB) / 2 << ")' text-anchor='middle'>" << plot.y_label << "</text>\n";

    for (size_t si = 0; si < plot.series.size(); ++si) {
        const auto& s = plot.series[si];
        const char* color = kSeriesColors[si % 10];
        svg << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
        for (size_t i = 0; i < s.x.size(); ++i) svg << px(s.x[i]) << "," << py(s.y[i]) << " ";
        svg << "'/>\n";
        const int ly = MT + static_cast<int>(si) * 18;
        svg << "<line x1='" << W - MR + 10 << "' y1='" << ly << "' x2='" << W - MR + 30 << "' y2='"
            << ly << "' stroke='" << color << "' stroke-width='2'/>\n";
        svg << "<text x='" << W - MR + 36 << "' y='" << ly + 4 << "' font-size='11'>" << s.name
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string render_heatmap(const Mat& values, const std::string& title) {
    const int rows = static_cast<int>(values.rows());
    const int cols = static_cast<int>(values.cols());
    constexpr int cell = 12, ML = 40, MT = 40;
    const int W = ML + cols * cell + 20;
    const int H = MT + rows * cell + 20;
    double lo = values.minCoeff(), hi = values.maxCoeff();
    if (hi == lo) hi = lo + 1;

    std::ostringstream svg;
    svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    svg << "<rect width='100%' height='100%' fill='white'/>\n";
    svg << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
        << "</text>\n";
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            const double v = (values(r, c) - lo) / (hi - lo);
            const int red = static_cast<int>(255 * v);
            const int blue = static_cast<int>(255 * (1 - v));
            svg << "<rect x='" << ML + c * cell << "' y='" << MT + r * cell << "' width='" << cell
                << "' height='" << cell << "' fill='rgb(" << red << ",40," << blue << ")'/>\n";
        }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace rff
