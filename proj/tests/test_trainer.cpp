#include <doctest.h>

#include <cmath>

#include "hwnn/trainer.hpp"
#include "support/oracles.hpp"

using namespace hwnn;

namespace {

Dataset xor_dataset() {
    Dataset ds;
    ds.name = "xor";
    ds.class_count = 2;
    ds.features = Matrix::from_rows({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
    ds.labels = {0, 1, 1, 0};
    return ds;
}

// Two gaussian-ish blobs, linearly separable.
Dataset blob_dataset(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    Dataset ds;
    ds.name = "blobs";
    ds.class_count = 2;
    ds.features = Matrix(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        const double center = label ? 0.7 : 0.3;
        for (std::size_t c = 0; c < 3; ++c) ds.features(i, c) = center + rng.uniform(-0.15, 0.15);
        ds.labels.push_back(label);
    }
    return ds;
}

bool nets_identical(const Mlp &a, const Mlp &b) {
    if (a.layer_count() != b.layer_count()) return false;
    for (std::size_t l = 0; l < a.layer_count(); ++l) {
        if (a.layer(l).weights.data() != b.layer(l).weights.data()) return false;
        if (a.layer(l).bias != b.layer(l).bias) return false;
    }
    return true;
}

} // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("zero epochs leave the net untouched") {
    const Dataset ds = xor_dataset();
    Rng init(1);
    const Mlp net = Mlp::init_random({2, 4, 2}, init);
    TrainConfig cfg;
    cfg.epochs_act = 0;
    const TrainResult res = train_bp(net, ds, ds, cfg);
    CHECK(nets_identical(res.net, net));
    CHECK(res.records.empty());
}

TEST_CASE("bp solves xor with a 2-4-1 net") {
    const Dataset ds = xor_dataset();
    TrainConfig cfg;
    cfg.eta = 2.0;
    cfg.epochs_act = 2000;
    cfg.batch_size = 4;
    cfg.seed = 7;
    cfg.sens_probe = 4;
    Rng init = Rng(cfg.seed).split(kStreamInit);
    const TrainResult res = train_bp(Mlp::init_random({2, 4, 1}, init), ds, ds, cfg);
    REQUIRE(!res.records.empty());
    CHECK(res.records.back().train_acc == 1.0);
}

TEST_CASE("gamma forced to zero reproduces the bp trajectory exactly") {
    const Dataset full = blob_dataset(60, 5);
    auto [train, test] = split(full, {0.8, 11}, NormMethod::MinMax);
    TrainConfig cfg;
    cfg.eta = 0.8;
    cfg.epochs_act = 12;
    cfg.batch_size = 8;
    cfg.seed = 3;
    cfg.delta_gamma = 0.0; // gamma pinned at zero
    cfg.accuracy_bound = 0.0;
    cfg.convergence_tol = 0.0; // no early stop

    Rng i1 = Rng(cfg.seed).split(kStreamInit);
    Rng i2 = Rng(cfg.seed).split(kStreamInit);
    const TrainResult bp = train_bp(Mlp::init_random({3, 5, 2}, i1), train, test, cfg);
    const TrainResult sens = train_sens(Mlp::init_random({3, 5, 2}, i2), train, test, cfg);

    REQUIRE(bp.records.size() == sens.records.size());
    for (std::size_t i = 0; i < bp.records.size(); ++i) {
        CHECK(bp.records[i].train_loss == sens.records[i].train_loss);
        CHECK(bp.records[i].test_acc == sens.records[i].test_acc);
    }
    CHECK(nets_identical(bp.net, sens.net));
}

TEST_CASE("training reduces sensitivity when gamma is active") {
    const Dataset full = blob_dataset(80, 9);
    auto [train, test] = split(full, {0.8, 13}, NormMethod::MinMax);
    TrainConfig cfg;
    cfg.eta = 0.8;
    cfg.epochs_act = 40;
    cfg.batch_size = 8;
    cfg.seed = 17;
    cfg.delta_gamma = 0.02;
    cfg.accuracy_bound = 0.25; // loose: gamma climbs every epoch
    cfg.sens_probe = 64;

    Rng i1 = Rng(cfg.seed).split(kStreamInit);
    Rng i2 = Rng(cfg.seed).split(kStreamInit);
    const TrainResult bp = train_bp(Mlp::init_random({3, 6, 2}, i1), train, test, cfg);
    const TrainResult sens = train_sens(Mlp::init_random({3, 6, 2}, i2), train, test, cfg);
    CHECK(sens.records.back().sensitivity < bp.records.back().sensitivity);
    CHECK(sens.records.back().gamma > 0.0);
}

TEST_CASE("noise phase requires a hardware model") {
    const Dataset ds = xor_dataset();
    Rng init(1);
    TrainConfig cfg;
    cfg.epochs_pas = 2;
    CHECK_THROWS_AS(train_noise(Mlp::init_random({2, 4, 2}, init), ds, ds, cfg), ConfigError);
}

TEST_CASE("quantization-only noise phase tracks bp closely") {
    const Dataset full = blob_dataset(60, 21);
    auto [train, test] = split(full, {0.8, 23}, NormMethod::MinMax);
    TrainConfig cfg;
    cfg.eta = 0.5;
    cfg.eta_noise = 0.5; // align the learning rates for comparison
    cfg.epochs_act = 5;  // past ~5 epochs a ReLU boundary flip amplifies the
    cfg.epochs_pas = 5;  // rounding noise chaotically
    cfg.batch_size = 8;
    cfg.seed = 29;

    Rng i1 = Rng(cfg.seed).split(kStreamInit);
    Rng i2 = Rng(cfg.seed).split(kStreamInit);
    const TrainResult bp = train_bp(Mlp::init_random({3, 5, 2}, i1), train, test, cfg);

    TrainConfig ncfg = cfg;
    ncfg.hw = HardwareModel{}; // exact multiplier, reliable storage, quantized
    ncfg.hw->weight_format = {22, 21}; // wide words keep the rounding noise tiny
    ncfg.hw->activation_format = {22, 21};
    const TrainResult noisy = train_noise(Mlp::init_random({3, 5, 2}, i2), train, test, ncfg);

    REQUIRE(bp.records.size() == noisy.records.size());
    for (std::size_t i = 0; i < bp.records.size(); ++i)
        CHECK(std::fabs(bp.records[i].train_loss - noisy.records[i].train_loss) < 1e-3);
    for (const EpochRecord &r : noisy.records) CHECK(r.phase == "noise");
}

TEST_CASE("combined regime stitches phases and freezes gamma in the noise phase") {
    const Dataset full = blob_dataset(60, 31);
    auto [train, test] = split(full, {0.8, 37}, NormMethod::MinMax);
    TrainConfig cfg;
    cfg.eta = 0.8;
    cfg.epochs_act = 5;
    cfg.epochs_pas = 4;
    cfg.batch_size = 8;
    cfg.seed = 41;
    cfg.delta_gamma = 0.01;
    cfg.accuracy_bound = 0.25;
    cfg.hw = HardwareModel{};
    cfg.hw->multiplier = ApproxMulConfig{5, "K3"};

    Rng init = Rng(cfg.seed).split(kStreamInit);
    const TrainResult res = train_combined(Mlp::init_random({3, 5, 2}, init), train, test, cfg);
    REQUIRE(res.records.size() == 9);
    REQUIRE(res.phase_boundary.has_value());
    const double frozen = res.records[4].gamma;
    for (std::size_t i = 0; i < 5; ++i) CHECK(res.records[i].phase == "sens");
    for (std::size_t i = 5; i < 9; ++i) {
        CHECK(res.records[i].phase == "noise");
        CHECK(res.records[i].gamma == frozen);
        CHECK(std::isfinite(res.records[i].test_acc_noisy));
    }
    for (std::size_t i = 0; i < 9; ++i) CHECK(res.records[i].epoch == i);

    // epochs_pas = 0 degenerates to the sens regime
    TrainConfig sens_only = cfg;
    sens_only.epochs_pas = 0;
    Rng i2 = Rng(cfg.seed).split(kStreamInit);
    Rng i3 = Rng(cfg.seed).split(kStreamInit);
    const TrainResult a = train_combined(Mlp::init_random({3, 5, 2}, i2), train, test, sens_only);
    const TrainResult b = train_sens(Mlp::init_random({3, 5, 2}, i3), train, test, sens_only);
    CHECK(nets_identical(a.net, b.net));
}

TEST_CASE("same seed and config reproduce identical nets") {
    const Dataset full = blob_dataset(40, 43);
    auto [train, test] = split(full, {0.8, 47}, NormMethod::MinMax);
    TrainConfig cfg;
    cfg.eta = 0.5;
    cfg.epochs_act = 4;
    cfg.epochs_pas = 3;
    cfg.batch_size = 8;
    cfg.seed = 53;
    cfg.hw = HardwareModel{};
    cfg.hw->storage = NtvConfig{0.01, "agg"};

    Rng i1 = Rng(cfg.seed).split(kStreamInit);
    Rng i2 = Rng(cfg.seed).split(kStreamInit);
    const TrainResult a = train_combined(Mlp::init_random({3, 5, 2}, i1), train, test, cfg);
    const TrainResult b = train_combined(Mlp::init_random({3, 5, 2}, i2), train, test, cfg);
    CHECK(nets_identical(a.net, b.net));
}

TEST_CASE("divergence aborts instead of writing garbage") {
    const Dataset ds = blob_dataset(20, 57);
    // identity output lets the loss blow up under an absurd learning rate
    Rng init(1);
    Mlp unbounded = Mlp::init_random({3, 4, 2}, {Activation::ReLU, Activation::Identity}, init);
    TrainConfig cfg;
    cfg.eta = 1e12;
    cfg.epochs_act = 100;
    cfg.batch_size = 4;
    CHECK_THROWS_AS(train_bp(std::move(unbounded), ds, ds, cfg), TrainAbort);
}

TEST_CASE("sens phase stops once loss and sensitivity settle") {
    // constant features and targets: converges almost immediately
    Dataset flat;
    flat.name = "flat";
    flat.class_count = 2;
    flat.features = Matrix(16, 2, 0.5);
    for (std::size_t i = 0; i < 16; ++i) flat.labels.push_back(0);
    Rng init(3);
    TrainConfig cfg;
    cfg.eta = 1e-6; // nothing moves
    cfg.epochs_act = 500;
    cfg.batch_size = 16;
    cfg.shuffle = false;
    cfg.delta_gamma = 1e-12;
    const TrainResult res = train_sens(Mlp::init_random({2, 3, 2}, init), flat, flat, cfg);
    CHECK(res.records.size() < 500);
    CHECK(res.records.size() >= cfg.convergence_window + 1);
}

TEST_SUITE_END();
