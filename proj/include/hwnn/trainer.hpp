#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hwnn/data.hpp"
#include "hwnn/errors.hpp"
#include "hwnn/sensitivity.hpp"

namespace hwnn {

struct EpochRecord {
    std::size_t epoch = 0;
    std::string phase;
    double train_loss = 0.0;
    double train_acc = 0.0;
    double test_acc = 0.0;
    double test_acc_noisy = 0.0; // NaN outside the noise phase
    double sensitivity = 0.0;
    double gamma = 0.0;
};

struct TrainConfig {
    double eta = 0.5;
    double eta_noise = 0.0; // 0 -> eta / 10 during the noise phase
    std::size_t epochs_act = 0;
    std::size_t epochs_pas = 0;
    std::size_t batch_size = 16;
    std::uint64_t seed = 1;
    bool shuffle = true;

    // Sensitivity-regularized phase.
    double accuracy_bound = 0.0;
    double delta_gamma = -1.0;      // negative -> auto: 1e-4 * initial probe loss
    std::size_t sens_probe = 256;   // samples used for the per-epoch S(w) record
    // Where the sensitivity gradient is estimated: the fixed probe window
    // (low-variance, keeps the gamma homeostat stable) or the current loss
    // batch (cheapest, one extra pass per batch).
    bool sens_on_probe = true;
    std::size_t convergence_window = 5;
    double convergence_tol = 1e-4;

    // Noise phase hardware. Formats are recalibrated from the net and train
    // features at phase start unless hw_formats_fixed is set.
    std::optional<HardwareModel> hw;
    bool hw_formats_fixed = false;

    std::function<void(const EpochRecord &)> on_epoch;

    void validate() const;
};

struct TrainResult {
    Mlp net;
    std::vector<EpochRecord> records;
    std::optional<Mlp> phase_boundary; // state at the sens->noise handover
};

// Conventional mini-batch SGD with the exact forward pass.
TrainResult train_bp(Mlp net, const Dataset &train, const Dataset &test, const TrainConfig &cfg);

// Loss plus gamma-weighted sensitivity, gamma adapted per epoch. Stops early
// once both the loss and the sensitivity stop moving.
TrainResult train_sens(Mlp net, const Dataset &train, const Dataset &test, const TrainConfig &cfg);

// Hardware noise models injected into the forward pass, straight-through
// gradients on the way back.
TrainResult train_noise(Mlp net, const Dataset &train, const Dataset &test, const TrainConfig &cfg);

// Sensitivity phase to convergence, then the noise phase.
TrainResult train_combined(Mlp net, const Dataset &train, const Dataset &test,
                           const TrainConfig &cfg);

// Stream ids carved from the run seed.
inline constexpr std::uint64_t kStreamInit = 1;
inline constexpr std::uint64_t kStreamShuffle = 2;
inline constexpr std::uint64_t kStreamNoise = 3;
inline constexpr std::uint64_t kStreamEvalNoise = 4;
inline constexpr std::uint64_t kStreamMonteCarlo = 1000;

} // namespace hwnn
