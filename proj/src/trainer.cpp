#include "hwnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hwnn {

void TrainConfig::validate() const {
    if (!(eta > 0.0)) throw ConfigError("train: eta must be > 0");
    if (eta_noise < 0.0) throw ConfigError("train: eta_noise must be >= 0");
    if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
    if (accuracy_bound < 0.0) throw ConfigError("train: accuracy_bound must be >= 0");
    if (hw) hw->validate();
}

namespace {

struct BatchView {
    Matrix features;
    Matrix targets;
    std::vector<int> labels;
};

BatchView gather_batch(const Dataset &data, const std::vector<std::size_t> &order,
                       std::size_t begin, std::size_t end, std::size_t output_width) {
    BatchView b;
    b.features = Matrix(end - begin, data.dims());
    b.labels.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const std::size_t r = order[i];
        std::copy(data.features.row_ptr(r), data.features.row_ptr(r) + data.dims(),
                  b.features.row_ptr(i - begin));
        b.labels.push_back(data.labels[r]);
    }
    b.targets = targets_for(b.labels, data.class_count, output_width);
    return b;
}

Matrix probe_features(const Dataset &train, std::size_t probe) {
    const std::size_t n = std::min(probe, train.size());
    Matrix m(n, train.dims());
    for (std::size_t r = 0; r < n; ++r)
        std::copy(train.features.row_ptr(r), train.features.row_ptr(r) + train.dims(),
                  m.row_ptr(r));
    return m;
}

double clean_test_accuracy(const Mlp &net, const Dataset &test) {
    if (test.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    return accuracy(forward(net, test.features).outputs(), test.labels);
}

double noisy_test_accuracy(const Mlp &net, const Dataset &test, const HardwareModel &hw, Rng &rng) {
    if (test.size() == 0) return std::numeric_limits<double>::quiet_NaN();
    return accuracy(forward(net, test.features, hw, rng).outputs(), test.labels);
}

bool series_settled(const std::vector<double> &xs, std::size_t window, double tol) {
    if (xs.size() < window + 1) return false;
    for (std::size_t i = xs.size() - window; i < xs.size(); ++i) {
        const double prev = xs[i - 1];
        const double rel = std::fabs(xs[i] - prev) / std::max(std::fabs(prev), 1e-12);
        if (rel >= tol) return false;
    }
    return true;
}

// One training phase. gamma_state != nullptr selects the sensitivity-
// regularized update and per-epoch gamma adaptation; hw != nullptr routes the
// forward pass through the hardware model with straight-through gradients.
void run_phase(Mlp &net, const Dataset &train, const Dataset &test, const TrainConfig &cfg,
               const std::string &phase, std::size_t max_epochs, double eta,
               SensitivityState *gamma_state, const HardwareModel *hw, Rng &shuffle_rng,
               Rng &noise_rng, Rng &eval_noise_rng, std::size_t &epoch_counter,
               std::vector<EpochRecord> &records) {
    const Matrix probe = probe_features(train, std::max<std::size_t>(cfg.sens_probe, 1));
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<double> phase_losses;
    std::vector<double> phase_sens;

    for (std::size_t e = 0; e < max_epochs; ++e) {
        if (cfg.shuffle) shuffle_rng.shuffle(order);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t begin = 0; begin < train.size(); begin += cfg.batch_size) {
            const std::size_t end = std::min(begin + cfg.batch_size, train.size());
            const BatchView batch = gather_batch(train, order, begin, end, net.output_width());

            ForwardTrace trace = hw ? forward(net, batch.features, *hw, noise_rng)
                                    : forward(net, batch.features);
            const double batch_loss = loss(trace.outputs(), batch.targets);
            if (!std::isfinite(batch_loss))
                throw TrainAbort("training diverged: non-finite loss in phase '" + phase +
                                 "', epoch " + std::to_string(epoch_counter) + ", batch at " +
                                 std::to_string(begin));
            loss_sum += batch_loss * static_cast<double>(end - begin);
            correct += correct_count(trace.outputs(), batch.labels);

            Gradients grads = backward(net, trace, batch.targets);
            if (gamma_state && gamma_state->gamma > 0.0)
                grads.axpy(gamma_state->gamma,
                           sensitivity_gradient(net, cfg.sens_on_probe ? probe : batch.features));
            sgd_step(net, grads, eta);
        }
        if (!net.all_finite())
            throw TrainAbort("training diverged: non-finite parameters in phase '" + phase +
                             "', epoch " + std::to_string(epoch_counter));

        EpochRecord rec;
        rec.epoch = epoch_counter++;
        rec.phase = phase;
        rec.train_loss = loss_sum / static_cast<double>(train.size());
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(train.size());
        rec.test_acc = clean_test_accuracy(net, test);
        rec.test_acc_noisy = hw ? noisy_test_accuracy(net, test, *hw, eval_noise_rng)
                                : std::numeric_limits<double>::quiet_NaN();
        rec.sensitivity = sensitivity_value(net, probe);
        if (gamma_state) {
            update_gamma(*gamma_state, rec.train_loss);
            rec.gamma = gamma_state->gamma;
        } else {
            rec.gamma = 0.0;
        }
        records.push_back(rec);
        if (cfg.on_epoch) cfg.on_epoch(rec);

        if (gamma_state) {
            phase_losses.push_back(rec.train_loss);
            phase_sens.push_back(rec.sensitivity);
            if (series_settled(phase_losses, cfg.convergence_window, cfg.convergence_tol) &&
                series_settled(phase_sens, cfg.convergence_window, cfg.convergence_tol))
                break;
        }
    }
}

void check_data(const Dataset &train) {
    if (train.size() == 0) throw ConfigError("train: empty training set");
}

} // namespace

TrainResult train_bp(Mlp net, const Dataset &train, const Dataset &test, const TrainConfig &cfg) {
    cfg.validate();
    check_data(train);
    TrainResult res;
    Rng shuffle_rng = Rng(cfg.seed).split(kStreamShuffle);
    Rng noise_rng = Rng(cfg.seed).split(kStreamNoise);
    Rng eval_rng = Rng(cfg.seed).split(kStreamEvalNoise);
    std::size_t epoch = 0;
    run_phase(net, train, test, cfg, "bp", cfg.epochs_act, cfg.eta, nullptr, nullptr, shuffle_rng,
              noise_rng, eval_rng, epoch, res.records);
    res.net = std::move(net);
    return res;
}

TrainResult train_sens(Mlp net, const Dataset &train, const Dataset &test, const TrainConfig &cfg) {
    cfg.validate();
    check_data(train);
    TrainResult res;
    Rng shuffle_rng = Rng(cfg.seed).split(kStreamShuffle);
    Rng noise_rng = Rng(cfg.seed).split(kStreamNoise);
    Rng eval_rng = Rng(cfg.seed).split(kStreamEvalNoise);

    SensitivityState state;
    state.accuracy_bound = cfg.accuracy_bound;
    state.delta_gamma = cfg.delta_gamma;
    if (state.delta_gamma < 0.0) {
        const Matrix probe = probe_features(train, std::max<std::size_t>(cfg.sens_probe, 1));
        std::vector<int> labels(train.labels.begin(),
                                train.labels.begin() + static_cast<std::ptrdiff_t>(probe.rows()));
        state.delta_gamma = 1e-4 * loss(forward(net, probe).outputs(),
                                        targets_for(labels, train.class_count, net.output_width()));
    }

    std::size_t epoch = 0;
    run_phase(net, train, test, cfg, "sens", cfg.epochs_act, cfg.eta, &state, nullptr, shuffle_rng,
              noise_rng, eval_rng, epoch, res.records);
    res.net = std::move(net);
    return res;
}

namespace {

HardwareModel noise_phase_hardware(const TrainConfig &cfg, const Mlp &net, const Dataset &train) {
    if (!cfg.hw) throw ConfigError("train: noise phase requires a hardware model (hw)");
    HardwareModel hw = *cfg.hw;
    if (!cfg.hw_formats_fixed) {
        auto [wf, af] = calibrate_formats(net, train.features, hw.weight_format.word_bits);
        hw.weight_format = wf;
        hw.activation_format = af;
    }
    hw.validate();
    return hw;
}

} // namespace

TrainResult train_noise(Mlp net, const Dataset &train, const Dataset &test, const TrainConfig &cfg) {
    cfg.validate();
    check_data(train);
    TrainResult res;
    Rng shuffle_rng = Rng(cfg.seed).split(kStreamShuffle);
    Rng noise_rng = Rng(cfg.seed).split(kStreamNoise);
    Rng eval_rng = Rng(cfg.seed).split(kStreamEvalNoise);

    const HardwareModel hw = noise_phase_hardware(cfg, net, train);
    const double eta = cfg.eta_noise > 0.0 ? cfg.eta_noise : cfg.eta / 10.0;
    std::size_t epoch = 0;
    run_phase(net, train, test, cfg, "noise", cfg.epochs_pas, eta, nullptr, &hw, shuffle_rng,
              noise_rng, eval_rng, epoch, res.records);
    res.net = std::move(net);
    return res;
}

TrainResult train_combined(Mlp net, const Dataset &train, const Dataset &test,
                           const TrainConfig &cfg) {
    cfg.validate();
    check_data(train);
    TrainResult res;
    Rng shuffle_rng = Rng(cfg.seed).split(kStreamShuffle);
    Rng noise_rng = Rng(cfg.seed).split(kStreamNoise);
    Rng eval_rng = Rng(cfg.seed).split(kStreamEvalNoise);

    SensitivityState state;
    state.accuracy_bound = cfg.accuracy_bound;
    state.delta_gamma = cfg.delta_gamma;
    if (state.delta_gamma < 0.0) {
        const Matrix probe = probe_features(train, std::max<std::size_t>(cfg.sens_probe, 1));
        std::vector<int> labels(train.labels.begin(),
                                train.labels.begin() + static_cast<std::ptrdiff_t>(probe.rows()));
        state.delta_gamma = 1e-4 * loss(forward(net, probe).outputs(),
                                        targets_for(labels, train.class_count, net.output_width()));
    }

    std::size_t epoch = 0;
    run_phase(net, train, test, cfg, "sens", cfg.epochs_act, cfg.eta, &state, nullptr, shuffle_rng,
              noise_rng, eval_rng, epoch, res.records);
    res.phase_boundary = net;

    if (cfg.epochs_pas > 0) {
        const HardwareModel hw = noise_phase_hardware(cfg, net, train);
        const double eta = cfg.eta_noise > 0.0 ? cfg.eta_noise : cfg.eta / 10.0;
        // gamma frozen: the sensitivity term is inactive during the noise phase
        run_phase(net, train, test, cfg, "noise", cfg.epochs_pas, eta, nullptr, &hw, shuffle_rng,
                  noise_rng, eval_rng, epoch, res.records);
        for (std::size_t i = res.records.size() - std::min(res.records.size(), cfg.epochs_pas);
             i < res.records.size(); ++i)
            if (res.records[i].phase == "noise") res.records[i].gamma = state.gamma;
    }
    res.net = std::move(net);
    return res;
}

} // namespace hwnn
