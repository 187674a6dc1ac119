#pragma once

#include <string>
#include <utility>

#include "hwnn/eval.hpp"

namespace hwnn {

// Loads and prepares the configured dataset: delimited text or cache files go
// through the seeded 80/20-style split with train-fitted normalization; IDX
// pairs use the predefined test files when given.
std::pair<Dataset, Dataset> load_experiment_data(const ExperimentConfig &cfg);

// Subcommand bodies. Each writes its outputs under cfg.out_dir.
void cmd_train(const ExperimentConfig &cfg, bool quiet = false);
void cmd_evaluate(const ExperimentConfig &cfg, const std::string &checkpoint,
                  const std::string &label, std::size_t runs_override = 0);
void cmd_sensitivity_map(const ExperimentConfig &cfg, const std::string &checkpoint,
                         std::size_t limit);
void cmd_cost_report(const ExperimentConfig &cfg, const std::string &report_path);

// Full command-line entry point. Exit codes: 0 success, 2 config error,
// 3 training abort, 4 I/O error.
int run_cli(int argc, const char *const *argv);

} // namespace hwnn
