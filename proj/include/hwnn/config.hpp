#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "hwnn/data.hpp"
#include "hwnn/trainer.hpp"

namespace hwnn {

// Flat "key = value" experiment file with [section] headers. Unknown keys are
// rejected by name. See README for the grammar.
struct ExperimentConfig {
    // [dataset]
    std::string data_kind = "csv"; // csv | idx | cache
    std::string path;
    std::string idx_images, idx_labels, idx_test_images, idx_test_labels;
    char delimiter = ',';
    bool header = false;
    int label_col = -1;
    NormMethod normalize_method = NormMethod::MinMax;
    double train_fraction = 0.8;
    std::uint64_t split_seed = 7;

    // [net]
    std::vector<std::size_t> topology;

    // [train]
    std::string regime = "bp"; // bp | sens | noise | combined
    TrainConfig train;
    std::string train_hw; // hardware spec string for the noise phase

    // [hw]
    int word_bits = 16;
    std::map<std::string, int> mode_widths = {{"K1", 3}, {"K2", 4}, {"K3", 5}, {"K4", 6}};

    // [eval]
    std::vector<std::string> sweep;
    std::size_t monte_carlo_runs = 50;

    // [cost]
    std::map<std::string, double> mult_costs; // keyed by mode label or "exact"
    std::map<std::string, double> sram_costs; // keyed by voltage label or "nominal"
    double accuracy_floor = 2.0;              // admissibility margin in accuracy points

    // [output]
    std::string out_dir = "out";

    std::uint64_t config_hash = 0;
};

ExperimentConfig load_config(const std::string &path);

// Folds CLI overrides into the config (and its hash).
void override_seed(ExperimentConfig &cfg, std::uint64_t seed);
void override_out_dir(ExperimentConfig &cfg, const std::string &dir);

std::uint64_t fnv1a64(const std::string &text);

// Metadata comment line shared by every CSV this tool writes.
std::string csv_meta_line(const ExperimentConfig &cfg);

} // namespace hwnn
