#include "hwnn/config.hpp"

#include <fstream>
#include <sstream>

namespace hwnn {

namespace {

std::string trim(const std::string &s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

bool parse_bool(const std::string &v, const std::string &key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: " + key + ": expected a boolean, got '" + v + "'");
}

double parse_real(const std::string &v, const std::string &key) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("config: " + key + ": expected a number, got '" + v + "'");
    }
}

std::uint64_t parse_u64(const std::string &v, const std::string &key) {
    try {
        std::size_t pos = 0;
        const std::uint64_t x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return x;
    } catch (...) {
        throw ConfigError("config: " + key + ": expected an integer, got '" + v + "'");
    }
}

std::vector<std::string> split_list(const std::string &v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        tok = trim(tok);
        if (!tok.empty()) out.push_back(tok);
    }
    return out;
}

} // namespace

std::uint64_t fnv1a64(const std::string &text) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

ExperimentConfig load_config(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();

    ExperimentConfig cfg;
    cfg.config_hash = fnv1a64(text);

    std::istringstream lines(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        line = trim(line);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config: line " + std::to_string(line_no) + ": bad section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const std::string qkey = section + "." + key;

        if (section == "dataset") {
            if (key == "kind") cfg.data_kind = value;
            else if (key == "path") cfg.path = value;
            else if (key == "images") cfg.idx_images = value;
            else if (key == "labels") cfg.idx_labels = value;
            else if (key == "test_images") cfg.idx_test_images = value;
            else if (key == "test_labels") cfg.idx_test_labels = value;
            else if (key == "delimiter") {
                if (value.size() != 1) throw ConfigError("config: dataset.delimiter: one character expected");
                cfg.delimiter = value[0];
            } else if (key == "header") cfg.header = parse_bool(value, qkey);
            else if (key == "label_col") cfg.label_col = static_cast<int>(parse_real(value, qkey));
            else if (key == "normalize") cfg.normalize_method = norm_method_from_name(value);
            else if (key == "train_fraction") cfg.train_fraction = parse_real(value, qkey);
            else if (key == "split_seed") cfg.split_seed = parse_u64(value, qkey);
            else throw ConfigError("config: unknown key '" + key + "' in section [dataset]");
        } else if (section == "net") {
            if (key == "topology") {
                cfg.topology.clear();
                for (const auto &tok : split_list(value))
                    cfg.topology.push_back(static_cast<std::size_t>(parse_u64(tok, qkey)));
            } else throw ConfigError("config: unknown key '" + key + "' in section [net]");
        } else if (section == "train") {
            if (key == "regime") cfg.regime = value;
            else if (key == "eta") cfg.train.eta = parse_real(value, qkey);
            else if (key == "eta_noise") cfg.train.eta_noise = parse_real(value, qkey);
            else if (key == "epochs") cfg.train.epochs_act = parse_u64(value, qkey);
            else if (key == "epochs_noise") cfg.train.epochs_pas = parse_u64(value, qkey);
            else if (key == "batch") cfg.train.batch_size = parse_u64(value, qkey);
            else if (key == "seed") cfg.train.seed = parse_u64(value, qkey);
            else if (key == "shuffle") cfg.train.shuffle = parse_bool(value, qkey);
            else if (key == "accuracy_bound") cfg.train.accuracy_bound = parse_real(value, qkey);
            else if (key == "delta_gamma") cfg.train.delta_gamma = parse_real(value, qkey);
            else if (key == "sens_probe") cfg.train.sens_probe = parse_u64(value, qkey);
            else if (key == "sens_source") {
                if (value == "probe") cfg.train.sens_on_probe = true;
                else if (value == "batch") cfg.train.sens_on_probe = false;
                else throw ConfigError("config: train.sens_source must be probe or batch");
            }
            else if (key == "convergence_window") cfg.train.convergence_window = parse_u64(value, qkey);
            else if (key == "convergence_tol") cfg.train.convergence_tol = parse_real(value, qkey);
            else if (key == "hw") cfg.train_hw = value;
            else throw ConfigError("config: unknown key '" + key + "' in section [train]");
        } else if (section == "hw") {
            if (key == "word_bits") cfg.word_bits = static_cast<int>(parse_u64(value, qkey));
            else if (key.rfind("k.", 0) == 0)
                cfg.mode_widths[key.substr(2)] = static_cast<int>(parse_u64(value, qkey));
            else throw ConfigError("config: unknown key '" + key + "' in section [hw]");
        } else if (section == "eval") {
            if (key == "sweep") cfg.sweep = split_list(value);
            else if (key == "runs") cfg.monte_carlo_runs = parse_u64(value, qkey);
            else throw ConfigError("config: unknown key '" + key + "' in section [eval]");
        } else if (section == "cost") {
            if (key.rfind("mult.", 0) == 0) cfg.mult_costs[key.substr(5)] = parse_real(value, qkey);
            else if (key.rfind("sram.", 0) == 0) cfg.sram_costs[key.substr(5)] = parse_real(value, qkey);
            else if (key == "accuracy_floor") cfg.accuracy_floor = parse_real(value, qkey);
            else throw ConfigError("config: unknown key '" + key + "' in section [cost]");
        } else if (section == "output") {
            if (key == "dir") cfg.out_dir = value;
            else throw ConfigError("config: unknown key '" + key + "' in section [output]");
        } else {
            throw ConfigError("config: unknown section [" + section + "]");
        }
    }

    if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
        throw ConfigError("config: dataset.train_fraction must be in (0,1)");
    if (cfg.word_bits < 2 || cfg.word_bits > 24)
        throw ConfigError("config: hw.word_bits must be in [2,24]");
    for (const auto &[label, k] : cfg.mode_widths)
        if (k < 2) throw ConfigError("config: hw.k." + label + " must be >= 2");
    return cfg;
}

void override_seed(ExperimentConfig &cfg, std::uint64_t seed) {
    cfg.train.seed = seed;
    cfg.config_hash = fnv1a64(std::to_string(cfg.config_hash) + "|seed=" + std::to_string(seed));
}

void override_out_dir(ExperimentConfig &cfg, const std::string &dir) { cfg.out_dir = dir; }

std::string csv_meta_line(const ExperimentConfig &cfg) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(cfg.config_hash));
    return std::string("# config_hash=") + buf + " seed=" + std::to_string(cfg.train.seed) +
           " rng=" + Rng::algorithm;
}

} // namespace hwnn
