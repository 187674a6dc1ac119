#include "hwnn/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>

namespace hwnn {

namespace {

DelimitedSchema schema_of(const ExperimentConfig &cfg) {
    DelimitedSchema s;
    s.delimiter = cfg.delimiter;
    s.has_header = cfg.header;
    s.label_col = cfg.label_col;
    return s;
}

void harmonize_classes(Dataset &a, Dataset &b) {
    const int classes = std::max(a.class_count, b.class_count);
    a.class_count = classes;
    b.class_count = classes;
}

} // namespace

std::pair<Dataset, Dataset> load_experiment_data(const ExperimentConfig &cfg) {
    const SplitSpec spec{cfg.train_fraction, cfg.split_seed};
    if (cfg.data_kind == "csv") {
        if (cfg.path.empty()) throw ConfigError("config: dataset.path is required for kind=csv");
        return split(load_delimited(cfg.path, schema_of(cfg)), spec, cfg.normalize_method);
    }
    if (cfg.data_kind == "cache") {
        if (cfg.path.empty()) throw ConfigError("config: dataset.path is required for kind=cache");
        return split(load_cache(cfg.path), spec, cfg.normalize_method);
    }
    if (cfg.data_kind == "idx") {
        if (cfg.idx_images.empty() || cfg.idx_labels.empty())
            throw ConfigError("config: dataset.images/labels are required for kind=idx");
        Dataset train = load_idx(cfg.idx_images, cfg.idx_labels);
        if (cfg.idx_test_images.empty()) return split(train, spec, cfg.normalize_method);
        Dataset test = load_idx(cfg.idx_test_images, cfg.idx_test_labels);
        harmonize_classes(train, test);
        train = normalize(train, cfg.normalize_method);
        test = apply_stats(test, train.stats);
        return {std::move(train), std::move(test)};
    }
    throw ConfigError("config: dataset.kind must be csv, idx or cache (got '" + cfg.data_kind + "')");
}

namespace {

void check_topology(const ExperimentConfig &cfg, const Dataset &train) {
    if (cfg.topology.size() < 2) throw ConfigError("config: topology needs at least two widths");
    if (cfg.topology.front() != train.dims())
        throw ConfigError("config: topology input width " + std::to_string(cfg.topology.front()) +
                          " does not match dataset dims " + std::to_string(train.dims()));
    const bool binary_single = cfg.topology.back() == 1 && train.class_count == 2;
    if (!binary_single && cfg.topology.back() != static_cast<std::size_t>(train.class_count))
        throw ConfigError("config: topology output width " + std::to_string(cfg.topology.back()) +
                          " does not match class count " + std::to_string(train.class_count));
}

HardwareModel hardware_from_spec(const HardwareSpec &spec, int word_bits) {
    if (spec.ideal)
        throw ConfigError("config: train.hw must name real hardware, not 'exact'");
    HardwareModel hw;
    hw.multiplier = spec.multiplier;
    hw.storage = spec.storage;
    hw.weight_format = {word_bits, word_bits - 1};
    hw.activation_format = {word_bits, word_bits - 1};
    return hw;
}

std::string out_path(const ExperimentConfig &cfg, const std::string &file) {
    std::filesystem::create_directories(cfg.out_dir);
    return (std::filesystem::path(cfg.out_dir) / file).string();
}

} // namespace

void cmd_train(const ExperimentConfig &cfg, bool quiet) {
    auto [train, test] = load_experiment_data(cfg);
    check_topology(cfg, train);

    TrainConfig tc = cfg.train;
    const bool needs_hw =
        cfg.regime == "noise" || (cfg.regime == "combined" && tc.epochs_pas > 0);
    if (needs_hw) {
        if (cfg.train_hw.empty())
            throw ConfigError("config: train.hw is required for regime '" + cfg.regime + "'");
        tc.hw = hardware_from_spec(parse_hardware_spec(cfg.train_hw, cfg.mode_widths), cfg.word_bits);
    }
    if (!quiet)
        tc.on_epoch = [](const EpochRecord &r) {
            std::printf("epoch %zu [%s] loss=%.6g train_acc=%.4f test_acc=%.4f S=%.6g gamma=%.3g\n",
                        r.epoch, r.phase.c_str(), r.train_loss, r.train_acc, r.test_acc,
                        r.sensitivity, r.gamma);
        };

    Rng init = Rng(tc.seed).split(kStreamInit);
    Mlp net = Mlp::init_random(cfg.topology, init);

    TrainResult result;
    if (cfg.regime == "bp") result = train_bp(std::move(net), train, test, tc);
    else if (cfg.regime == "sens") result = train_sens(std::move(net), train, test, tc);
    else if (cfg.regime == "noise") result = train_noise(std::move(net), train, test, tc);
    else if (cfg.regime == "combined") result = train_combined(std::move(net), train, test, tc);
    else throw ConfigError("config: unknown regime '" + cfg.regime + "'");

    const std::string meta = csv_meta_line(cfg);
    save_checkpoint(result.net, out_path(cfg, "checkpoint.txt"), tc.seed);
    if (result.phase_boundary)
        save_checkpoint(*result.phase_boundary, out_path(cfg, "checkpoint_sens.txt"), tc.seed);
    write_epoch_csv(result.records, out_path(cfg, "epochs.csv"), meta);

    if (!quiet) {
        std::printf("wrote %s\n", out_path(cfg, "checkpoint.txt").c_str());
        if (!result.records.empty()) {
            const EpochRecord &last = result.records.back();
            std::printf("final: loss=%.6g test_acc=%.4f S=%.6g after %zu epochs\n", last.train_loss,
                        last.test_acc, last.sensitivity, result.records.size());
        }
    }
}

void cmd_evaluate(const ExperimentConfig &cfg, const std::string &checkpoint,
                  const std::string &label, std::size_t runs_override) {
    if (cfg.sweep.empty()) throw ConfigError("config: eval.sweep must be nonempty for evaluate");
    auto [train, test] = load_experiment_data(cfg);
    const Mlp net = load_checkpoint(checkpoint);

    std::vector<HardwareSpec> sweep;
    for (const std::string &s : cfg.sweep) sweep.push_back(parse_hardware_spec(s, cfg.mode_widths));
    const std::size_t runs = runs_override ? runs_override : cfg.monte_carlo_runs;

    const RunReport report = evaluate_sweep(net, test, train.features, sweep, runs, cfg.word_bits,
                                            cfg.train.seed, label);
    write_report_csv(report, out_path(cfg, "report.csv"), csv_meta_line(cfg));
    for (const EvalRow &r : report.rows)
        std::printf("%-24s runs=%-3zu acc=%.4f+-%.4f loss=%.6g norm_err=%.4g\n", r.model.c_str(),
                    r.runs, r.acc_mean, r.acc_std, r.loss_mean, r.normalized_error);
}

void cmd_sensitivity_map(const ExperimentConfig &cfg, const std::string &checkpoint,
                         std::size_t limit) {
    auto [train, test] = load_experiment_data(cfg);
    const Mlp net = load_checkpoint(checkpoint);
    if (net.input_width() != train.dims())
        throw ConfigError("config: checkpoint input width does not match dataset");

    const std::size_t n = std::min(limit ? limit : train.size(), train.size());
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    const Dataset probe = subset(train, rows);

    const SensitivityMap map = sensitivity_map(net, probe.features);
    std::filesystem::create_directories(cfg.out_dir);
    const auto paths = write_sensitivity_maps(
        map, (std::filesystem::path(cfg.out_dir) / "").string(), csv_meta_line(cfg));
    std::printf("S(w) = %.9g over %zu samples; %zu layer maps written\n", map.total, n,
                paths.size());
}

void cmd_cost_report(const ExperimentConfig &cfg, const std::string &report_path) {
    if (cfg.mult_costs.empty() || cfg.sram_costs.empty())
        throw ConfigError("config: [cost] must define mult.* and sram.* entries");
    CostTable table{cfg.mult_costs, cfg.sram_costs};
    const RunReport report = read_report_csv(report_path);
    const auto rows = cost_report(report, table, cfg.accuracy_floor, cfg.mode_widths);
    write_cost_csv(rows, out_path(cfg, "cost_report.csv"), csv_meta_line(cfg));
    for (const CostRow &r : rows)
        std::printf("%-24s admissible=%d cost=%.4g%s\n", r.model.c_str(), r.admissible ? 1 : 0,
                    r.relative_cost, r.cheapest ? "  <- cheapest" : "");
}

int run_cli(int argc, const char *const *argv) {
    CLI::App app{"training and approximate-inference evaluation for small MLPs"};
    app.require_subcommand(1);

    std::string config_path, out_dir, checkpoint, label = "net", report_path;
    std::uint64_t seed = 0;
    bool seed_set = false, quiet = false;
    std::size_t runs = 0, limit = 256;

    auto add_common = [&](CLI::App *cmd) {
        cmd->add_option("--config", config_path, "experiment config file")->required();
        cmd->add_option("--seed", seed, "override train.seed")->each([&](const std::string &) {
            seed_set = true;
        });
        cmd->add_option("--out", out_dir, "override output directory");
    };

    CLI::App *train = app.add_subcommand("train", "train a network under the configured regime");
    add_common(train);
    train->add_flag("--quiet", quiet, "suppress per-epoch output");

    CLI::App *evaluate = app.add_subcommand("evaluate", "sweep hardware models over a checkpoint");
    add_common(evaluate);
    evaluate->add_option("--checkpoint", checkpoint, "checkpoint path (default <out>/checkpoint.txt)");
    evaluate->add_option("--label", label, "report label for this net");
    evaluate->add_option("--runs", runs, "override Monte-Carlo run count");

    CLI::App *smap = app.add_subcommand("sensitivity-map", "per-weight sensitivity map CSVs");
    add_common(smap);
    smap->add_option("--checkpoint", checkpoint, "checkpoint path (default <out>/checkpoint.txt)");
    smap->add_option("--limit", limit, "number of training samples to average over (0 = all)");

    CLI::App *cost = app.add_subcommand("cost-report", "relative cost summary from a report.csv");
    add_common(cost);
    cost->add_option("--report", report_path, "report csv (default <out>/report.csv)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        ExperimentConfig cfg = load_config(config_path);
        if (seed_set) override_seed(cfg, seed);
        if (!out_dir.empty()) override_out_dir(cfg, out_dir);
        const std::string default_ckpt =
            (std::filesystem::path(cfg.out_dir) / "checkpoint.txt").string();
        if (checkpoint.empty()) checkpoint = default_ckpt;
        if (report_path.empty())
            report_path = (std::filesystem::path(cfg.out_dir) / "report.csv").string();

        if (train->parsed()) cmd_train(cfg, quiet);
        else if (evaluate->parsed()) cmd_evaluate(cfg, checkpoint, label, runs);
        else if (smap->parsed()) cmd_sensitivity_map(cfg, checkpoint, limit);
        else if (cost->parsed()) cmd_cost_report(cfg, report_path);
        return 0;
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const TrainAbort &e) {
        std::cerr << "training aborted: " << e.what() << "\n";
        return 3;
    } catch (const IoError &e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument &e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace hwnn
