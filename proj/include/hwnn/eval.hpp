#pragma once

#include <map>
#include <string>
#include <vector>

#include "hwnn/config.hpp"
#include "hwnn/sensitivity.hpp"
#include "hwnn/trainer.hpp"

namespace hwnn {

// Parsed sweep entry. Grammar (parts joined by '+'):
//   exact                ideal real arithmetic, the normalization baseline
//   quant                fixed point, exact multiplier
//   K1..K4 | k=N         fixed point, approximate multiplier
//   ntv:P[@LABEL]        storage bit flips with per-bit probability P
struct HardwareSpec {
    std::string text;
    bool ideal = false;
    std::optional<ApproxMulConfig> multiplier;
    std::optional<NtvConfig> storage;
};

HardwareSpec parse_hardware_spec(const std::string &text,
                                 const std::map<std::string, int> &mode_widths);

struct EvalRow {
    std::string model;
    std::size_t runs = 0;
    double acc_mean = 0.0;
    double acc_std = 0.0;
    double loss_mean = 0.0;
    double loss_std = 0.0;
    double exact_acc = 0.0;
    double exact_loss = 0.0;
    double normalized_error = 0.0; // loss_mean / exact_loss of the same net
};

struct RunReport {
    std::string label;
    std::uint64_t seed = 0;
    std::vector<EvalRow> rows;
};

// Evaluates the checkpoint on `data` under every sweep entry. Noise-free
// entries run a single deterministic pass; entries with storage noise run
// mc_runs Monte-Carlo passes on distinct rng streams. Fixed-point formats are
// calibrated from the net and calib_features.
RunReport evaluate_sweep(const Mlp &net, const Dataset &data, const Matrix &calib_features,
                         const std::vector<HardwareSpec> &sweep, std::size_t mc_runs,
                         int word_bits, std::uint64_t seed, const std::string &label);

struct CostTable {
    std::map<std::string, double> mult; // "exact" plus one entry per mode label
    std::map<std::string, double> sram; // "nominal" plus one entry per voltage label
};

struct CostRow {
    std::string model;
    bool admissible = false;
    double acc_mean = 0.0;
    double relative_cost = 0.0;
    bool cheapest = false;
};

// Flags every sweep row whose accuracy is within `floor_points` of the exact
// row, computes its multiply+storage cost relative to exact hardware at
// nominal voltage, and marks the cheapest admissible model (ties broken
// toward the more aggressive multiplier).
std::vector<CostRow> cost_report(const RunReport &report, const CostTable &table,
                                 double floor_points,
                                 const std::map<std::string, int> &mode_widths);

// CSV writers. Every file starts with the metadata comment line and a header.
void write_epoch_csv(const std::vector<EpochRecord> &records, const std::string &path,
                     const std::string &meta);
void write_report_csv(const RunReport &report, const std::string &path, const std::string &meta);
std::vector<std::string> write_sensitivity_maps(const SensitivityMap &map,
                                                const std::string &dir_prefix,
                                                const std::string &meta);
void write_cost_csv(const std::vector<CostRow> &rows, const std::string &path,
                    const std::string &meta);

// Reads back a report.csv written by write_report_csv.
RunReport read_report_csv(const std::string &path);

} // namespace hwnn
