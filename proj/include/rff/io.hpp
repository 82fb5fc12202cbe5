#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "rff/dae.hpp"
#include "rff/nn.hpp"
#include "rff/signal.hpp"

#include "json.hpp"

namespace rff {

using json = nlohmann::json;

// Versioned model document with row-major weight arrays. Doubles are emitted
// as shortest round-trip decimals, so parse(dump(model)) restores bit-exact
// float64 values.
json model_to_json(const MLPModel& model);
MLPModel model_from_json(const json& doc);

// Two model documents plus a manifest recording how the DAE was trained.
json dae_to_json(const DAEModel& model, double train_psr_db, const PerturbationSpec& spec);
DAEModel dae_from_json(const json& doc);

json scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig scenario_from_json(const json& doc);

// %.17g; round-trips any finite double.
std::string fmt_double(double v);

void write_text_file(const std::filesystem::path& path, const std::string& content);
std::string read_text_file(const std::filesystem::path& path);

// One CSV document; every cell already formatted.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::filesystem::path& path, const CsvTable& table);

// Dataset CSV per the documented schema (device_id, label, split,
// f_0..f_{2l-1}) plus a JSON sidecar with the generating config.
void write_dataset_csv(const std::filesystem::path& csv_path, const Dataset& dataset);
void write_dataset_sidecar(const std::filesystem::path& json_path, const Dataset& dataset);

std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::filesystem::path& path);

// Minimal deterministic SVG emitters; acceptance never reads these, they
// mirror the CSVs for eyeballing.
struct SeriesPlot {
    std::string title, x_label, y_label;
    struct Series {
        std::string name;
        std::vector<double> x, y;
    };
    std::vector<Series> series;
};

std::string render_line_chart(const SeriesPlot& plot);
std::string render_heatmap(const Mat& values, const std::string& title);

}  // namespace rff
