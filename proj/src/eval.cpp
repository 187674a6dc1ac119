#include "hwnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace hwnn {

HardwareSpec parse_hardware_spec(const std::string &text,
                                 const std::map<std::string, int> &mode_widths) {
    HardwareSpec spec;
    spec.text = text;
    std::stringstream ss(text);
    std::string part;
    bool any = false;
    while (std::getline(ss, part, '+')) {
        if (part.empty()) continue;
        any = true;
        if (part == "exact") {
            spec.ideal = true;
        } else if (part == "quant") {
            // fixed point with the exact multiplier: nothing to set
        } else if (part.rfind("ntv:", 0) == 0) {
            std::string body = part.substr(4);
            std::string label;
            const auto at = body.find('@');
            if (at != std::string::npos) {
                label = body.substr(at + 1);
                body = body.substr(0, at);
            }
            NtvConfig ntv;
            try {
                ntv.flip_prob = std::stod(body);
            } catch (...) {
                throw ConfigError("hardware spec '" + text + "': bad flip probability '" + body + "'");
            }
            ntv.voltage_label = label.empty() ? "p=" + body : label;
            ntv.validate();
            spec.storage = ntv;
        } else if (part.rfind("k=", 0) == 0) {
            ApproxMulConfig mul;
            try {
                mul.k = std::stoi(part.substr(2));
            } catch (...) {
                throw ConfigError("hardware spec '" + text + "': bad width '" + part + "'");
            }
            mul.mode_label = part;
            mul.validate();
            spec.multiplier = mul;
        } else if (mode_widths.count(part)) {
            ApproxMulConfig mul;
            mul.k = mode_widths.at(part);
            mul.mode_label = part;
            mul.validate();
            spec.multiplier = mul;
        } else {
            throw ConfigError("hardware spec '" + text + "': unknown part '" + part + "'");
        }
    }
    if (!any) throw ConfigError("hardware spec is empty");
    if (spec.ideal && (spec.multiplier || spec.storage))
        throw ConfigError("hardware spec '" + text + "': 'exact' cannot be combined");
    return spec;
}

namespace {

struct RunStats {
    double mean = 0.0;
    double stddev = 0.0;
};

RunStats stats_of(const std::vector<double> &xs) {
    RunStats s;
    if (xs.empty()) return s;
    for (double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double acc = 0.0;
        for (double x : xs) acc += (x - s.mean) * (x - s.mean);
        s.stddev = std::sqrt(acc / static_cast<double>(xs.size() - 1));
    }
    return s;
}

} // namespace

RunReport evaluate_sweep(const Mlp &net, const Dataset &data, const Matrix &calib_features,
                         const std::vector<HardwareSpec> &sweep, std::size_t mc_runs,
                         int word_bits, std::uint64_t seed, const std::string &label) {
    if (sweep.empty()) throw ConfigError("evaluate: sweep is empty");
    if (data.size() == 0) throw ConfigError("evaluate: empty dataset");
    const bool binary_single = net.output_width() == 1 && data.class_count == 2;
    if (net.input_width() != data.dims() ||
        (!binary_single && net.output_width() != static_cast<std::size_t>(data.class_count)))
        throw ConfigError("evaluate: checkpoint topology does not match dataset (" +
                          std::to_string(net.input_width()) + "-in/" +
                          std::to_string(net.output_width()) + "-out vs " +
                          std::to_string(data.dims()) + "/" + std::to_string(data.class_count) + ")");

    const Matrix targets = targets_for(data.labels, data.class_count, net.output_width());
    const ForwardTrace exact_trace = forward(net, data.features);
    const double exact_loss = loss(exact_trace.outputs(), targets);
    const double exact_acc = accuracy(exact_trace.outputs(), data.labels);

    const auto [wf, af] = calibrate_formats(net, calib_features, word_bits);

    RunReport report;
    report.label = label;
    report.seed = seed;
    const Rng base(seed);

    for (const HardwareSpec &spec : sweep) {
        EvalRow row;
        row.model = spec.text;
        row.exact_loss = exact_loss;
        row.exact_acc = exact_acc;
        if (spec.ideal) {
            row.runs = 1;
            row.acc_mean = exact_acc;
            row.loss_mean = exact_loss;
            row.normalized_error = 1.0;
            report.rows.push_back(row);
            continue;
        }
        HardwareModel hw;
        hw.multiplier = spec.multiplier;
        hw.storage = spec.storage;
        hw.weight_format = wf;
        hw.activation_format = af;
        hw.validate();

        const std::size_t runs = spec.storage ? std::max<std::size_t>(mc_runs, 1) : 1;
        std::vector<double> accs, losses;
        accs.reserve(runs);
        losses.reserve(runs);
        for (std::size_t r = 0; r < runs; ++r) {
            Rng rng = base.split(kStreamMonteCarlo + r);
            const ForwardTrace tr = forward(net, data.features, hw, rng);
            losses.push_back(loss(tr.outputs(), targets));
            accs.push_back(accuracy(tr.outputs(), data.labels));
        }
        const RunStats la = stats_of(losses);
        const RunStats aa = stats_of(accs);
        row.runs = runs;
        row.acc_mean = aa.mean;
        row.acc_std = aa.stddev;
        row.loss_mean = la.mean;
        row.loss_std = la.stddev;
        row.normalized_error = exact_loss > 0.0 ? la.mean / exact_loss
                                                : std::numeric_limits<double>::quiet_NaN();
        report.rows.push_back(row);
    }
    return report;
}

namespace {

// Aggressiveness rank for the cheapest-model tie break: smaller k first,
// exact-multiplier entries last.
int mult_rank(const std::string &model, const std::map<std::string, int> &mode_widths) {
    HardwareSpec spec = parse_hardware_spec(model, mode_widths);
    return spec.multiplier ? spec.multiplier->k : std::numeric_limits<int>::max();
}

double lookup_cost(const std::map<std::string, double> &table, const std::string &key,
                   const std::string &kind) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("cost table: missing " + kind + " entry '" + key + "'");
    if (!(it->second > 0.0)) throw ConfigError("cost table: " + kind + "." + key + " must be > 0");
    return it->second;
}

} // namespace

std::vector<CostRow> cost_report(const RunReport &report, const CostTable &table,
                                 double floor_points,
                                 const std::map<std::string, int> &mode_widths) {
    const double exact_mult = lookup_cost(table.mult, "exact", "mult");
    const double nominal_sram = lookup_cost(table.sram, "nominal", "sram");
    const double base_cost = exact_mult + nominal_sram;

    std::vector<CostRow> rows;
    double exact_acc = 0.0;
    for (const EvalRow &er : report.rows) exact_acc = er.exact_acc; // identical per net
    const double floor = exact_acc - floor_points / 100.0;

    for (const EvalRow &er : report.rows) {
        const HardwareSpec spec = parse_hardware_spec(er.model, mode_widths);
        CostRow row;
        row.model = er.model;
        row.acc_mean = er.acc_mean;
        row.admissible = er.acc_mean >= floor;
        const double mult_cost = spec.multiplier
                                     ? lookup_cost(table.mult, spec.multiplier->mode_label, "mult")
                                     : exact_mult;
        const double sram_cost = spec.storage
                                     ? lookup_cost(table.sram, spec.storage->voltage_label, "sram")
                                     : nominal_sram;
        row.relative_cost = (mult_cost + sram_cost) / base_cost;
        rows.push_back(row);
    }

    // Cheapest admissible model; ties go to the more aggressive multiplier.
    std::size_t best = rows.size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].admissible) continue;
        if (best == rows.size() || rows[i].relative_cost < rows[best].relative_cost ||
            (rows[i].relative_cost == rows[best].relative_cost &&
             mult_rank(rows[i].model, mode_widths) < mult_rank(rows[best].model, mode_widths)))
            best = i;
    }
    if (best < rows.size()) {
        rows[best].cheapest = true;
    } else {
        CostRow none;
        none.model = "none-admissible";
        rows.push_back(none);
    }
    return rows;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}

std::ofstream open_csv(const std::string &path, const std::string &meta) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << meta << "\n";
    return out;
}

} // namespace

void write_epoch_csv(const std::vector<EpochRecord> &records, const std::string &path,
                     const std::string &meta) {
    auto out = open_csv(path, meta);
    out << "epoch,phase,train_loss,train_acc,test_acc,test_acc_noisy,sensitivity,gamma\n";
    for (const EpochRecord &r : records)
        out << r.epoch << ',' << r.phase << ',' << fmt(r.train_loss) << ',' << fmt(r.train_acc)
            << ',' << fmt(r.test_acc) << ',' << fmt(r.test_acc_noisy) << ','
            << fmt(r.sensitivity) << ',' << fmt(r.gamma) << "\n";
    if (!out) throw IoError("write failed for " + path);
}

void write_report_csv(const RunReport &report, const std::string &path, const std::string &meta) {
    auto out = open_csv(path, meta);
    out << "label,model,runs,acc_mean,acc_std,loss_mean,loss_std,exact_acc,exact_loss,"
           "normalized_error\n";
    for (const EvalRow &r : report.rows)
        out << report.label << ',' << r.model << ',' << r.runs << ',' << fmt(r.acc_mean) << ','
            << fmt(r.acc_std) << ',' << fmt(r.loss_mean) << ',' << fmt(r.loss_std) << ','
            << fmt(r.exact_acc) << ',' << fmt(r.exact_loss) << ',' << fmt(r.normalized_error)
            << "\n";
    if (!out) throw IoError("write failed for " + path);
}

std::vector<std::string> write_sensitivity_maps(const SensitivityMap &map,
                                                const std::string &dir_prefix,
                                                const std::string &meta) {
    std::vector<std::string> paths;
    for (std::size_t l = 0; l < map.per_layer.size(); ++l) {
        const std::string path = dir_prefix + "sensitivity_layer" + std::to_string(l) + ".csv";
        auto out = open_csv(path, meta);
        const Matrix &m = map.per_layer[l];
        for (std::size_t r = 0; r < m.rows(); ++r) {
            for (std::size_t c = 0; c < m.cols(); ++c) out << (c ? "," : "") << fmt(m(r, c));
            out << "\n";
        }
        if (!out) throw IoError("write failed for " + path);
        paths.push_back(path);
    }
    return paths;
}

void write_cost_csv(const std::vector<CostRow> &rows, const std::string &path,
                    const std::string &meta) {
    auto out = open_csv(path, meta);
    out << "model,admissible,acc_mean,relative_cost,cheapest\n";
    for (const CostRow &r : rows)
        out << r.model << ',' << (r.admissible ? 1 : 0) << ',' << fmt(r.acc_mean) << ','
            << fmt(r.relative_cost) << ',' << (r.cheapest ? 1 : 0) << "\n";
    if (!out) throw IoError("write failed for " + path);
}

RunReport read_report_csv(const std::string &path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    RunReport report;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            if (line.rfind("label,model,", 0) != 0)
                throw IoError(path + ": not a report csv");
            continue;
        }
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, ',')) f.push_back(tok);
        if (f.size() != 10) throw IoError(path + ": malformed row '" + line + "'");
        report.label = f[0];
        EvalRow r;
        r.model = f[1];
        r.runs = std::stoul(f[2]);
        r.acc_mean = std::stod(f[3]);
        r.acc_std = std::stod(f[4]);
        r.loss_mean = std::stod(f[5]);
        r.loss_std = std::stod(f[6]);
        r.exact_acc = std::stod(f[7]);
        r.exact_loss = std::stod(f[8]);
        r.normalized_error = std::stod(f[9]);
        report.rows.push_back(r);
    }
    if (report.rows.empty()) throw IoError(path + ": no rows");
    return report;
}

} // namespace hwnn
