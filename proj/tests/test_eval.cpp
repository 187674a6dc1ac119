#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "hwnn/eval.hpp"
#include "support/oracles.hpp"

using namespace hwnn;

namespace {

const std::map<std::string, int> kWidths = {{"K1", 3}, {"K2", 4}, {"K3", 5}, {"K4", 6}};

Dataset tiny_dataset(std::uint64_t seed) {
    Rng rng(seed);
    Dataset ds;
    ds.name = "tiny";
    ds.class_count = 2;
    ds.features = oracle::random_matrix(20, 4, rng, 0.0, 1.0);
    for (std::size_t i = 0; i < 20; ++i) ds.labels.push_back(static_cast<int>(i % 2));
    return ds;
}

} // namespace

TEST_SUITE_BEGIN("eval");

TEST_CASE("exact row is the baseline; deterministic rows have zero spread") {
    const Dataset ds = tiny_dataset(5);
    Rng init(2);
    const Mlp net = Mlp::init_random({4, 5, 2}, init);
    const std::vector<HardwareSpec> sweep = {
        parse_hardware_spec("exact", kWidths),
        parse_hardware_spec("quant", kWidths),
        parse_hardware_spec("K1", kWidths),
        parse_hardware_spec("quant+ntv:0", kWidths),
    };
    const RunReport report = evaluate_sweep(net, ds, ds.features, sweep, 5, 16, 11, "tiny");
    REQUIRE(report.rows.size() == 4);
    CHECK(report.rows[0].normalized_error == 1.0);
    CHECK(report.rows[0].acc_std == 0.0);
    CHECK(report.rows[1].runs == 1);
    CHECK(report.rows[1].loss_std == 0.0);
    // flip probability zero behaves like reliable storage (mean of identical
    // runs, so equality up to summation rounding)
    CHECK(report.rows[3].loss_mean ==
          doctest::Approx(report.rows[1].loss_mean).epsilon(1e-14));
    CHECK(report.rows[3].acc_mean == doctest::Approx(report.rows[1].acc_mean).epsilon(1e-14));
    CHECK(report.rows[3].loss_std == 0.0);

    // evaluation is a pure function of (net, data, sweep, seed)
    const RunReport again = evaluate_sweep(net, ds, ds.features, sweep, 5, 16, 11, "tiny");
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
        CHECK(report.rows[i].loss_mean == again.rows[i].loss_mean);
        CHECK(report.rows[i].acc_mean == again.rows[i].acc_mean);
    }
}

TEST_CASE("evaluate rejects mismatched nets and empty sweeps") {
    const Dataset ds = tiny_dataset(7);
    Rng init(3);
    const Mlp wrong = Mlp::init_random({5, 4, 2}, init);
    const std::vector<HardwareSpec> sweep = {parse_hardware_spec("exact", kWidths)};
    CHECK_THROWS_AS(evaluate_sweep(wrong, ds, ds.features, sweep, 5, 16, 1, "x"), ConfigError);
    Rng init2(3);
    const Mlp ok = Mlp::init_random({4, 4, 2}, init2);
    CHECK_THROWS_AS(evaluate_sweep(ok, ds, ds.features, {}, 5, 16, 1, "x"), ConfigError);
}

TEST_CASE("monte carlo rows carry spread and distinct streams") {
    const Dataset ds = tiny_dataset(9);
    Rng init(4);
    const Mlp net = Mlp::init_random({4, 6, 2}, init);
    const std::vector<HardwareSpec> sweep = {parse_hardware_spec("quant+ntv:0.05", kWidths)};
    const RunReport report = evaluate_sweep(net, ds, ds.features, sweep, 20, 16, 21, "mc");
    CHECK(report.rows[0].runs == 20);
    CHECK(report.rows[0].loss_std > 0.0);
}

TEST_CASE("cost report flags the cheapest admissible model") {
    RunReport report;
    report.label = "net";
    auto mk = [](const std::string &model, double acc) {
        EvalRow r;
        r.model = model;
        r.acc_mean = acc;
        r.exact_acc = 0.95;
        return r;
    };
    report.rows = {mk("exact", 0.95), mk("K1", 0.90), mk("K2", 0.94), mk("K3", 0.945)};
    CostTable table;
    table.mult = {{"exact", 1.0}, {"K1", 0.2}, {"K2", 0.3}, {"K3", 0.4}};
    table.sram = {{"nominal", 1.0}};
    const auto rows = cost_report(report, table, 2.0, kWidths);
    REQUIRE(rows.size() == 4);
    CHECK(!rows[1].admissible); // K1 dropped 5 points
    CHECK(rows[2].admissible);
    CHECK(rows[2].cheapest); // K2 cheaper than K3 and admissible
    CHECK(!rows[3].cheapest);
    CHECK(rows[0].relative_cost == 1.0);

    // all admissible at equal cost: tie-break toward the aggressive mode
    CostTable flat;
    flat.mult = {{"exact", 1.0}, {"K1", 1.0}, {"K2", 1.0}, {"K3", 1.0}};
    flat.sram = {{"nominal", 1.0}};
    report.rows = {mk("exact", 0.95), mk("K1", 0.95), mk("K2", 0.95), mk("K3", 0.95)};
    const auto tied = cost_report(report, flat, 2.0, kWidths);
    CHECK(tied[1].cheapest); // K1

    // unreachable floor -> explicit none-admissible row
    report.rows = {mk("K1", 0.10)};
    const auto none = cost_report(report, flat, 2.0, kWidths);
    REQUIRE(none.size() == 2);
    CHECK(none.back().model == "none-admissible");

    CostTable missing;
    missing.mult = {{"exact", 1.0}};
    missing.sram = {{"nominal", 1.0}};
    report.rows = {mk("K1", 0.95)};
    CHECK_THROWS_AS(cost_report(report, missing, 2.0, kWidths), ConfigError);
}

TEST_CASE("csv writers lead with metadata and reports read back") {
    RunReport report;
    report.label = "roundtrip";
    EvalRow r;
    r.model = "K1+ntv:0.1@400mV";
    r.runs = 50;
    r.acc_mean = 0.91;
    r.acc_std = 0.01;
    r.loss_mean = 0.034;
    r.loss_std = 0.002;
    r.exact_acc = 0.96;
    r.exact_loss = 0.02;
    r.normalized_error = 1.7;
    report.rows = {r};
    write_report_csv(report, "t_report.csv", "# config_hash=dead seed=1 rng=test");

    std::ifstream in("t_report.csv");
    std::string first;
    std::getline(in, first);
    CHECK(first.rfind("# config_hash=", 0) == 0);

    const RunReport back = read_report_csv("t_report.csv");
    CHECK(back.label == "roundtrip");
    REQUIRE(back.rows.size() == 1);
    CHECK(back.rows[0].model == r.model);
    CHECK(back.rows[0].runs == 50);
    CHECK(back.rows[0].acc_mean == doctest::Approx(r.acc_mean));
    CHECK(back.rows[0].normalized_error == doctest::Approx(r.normalized_error));
    std::remove("t_report.csv");

    std::vector<EpochRecord> recs(2);
    recs[0].epoch = 0;
    recs[0].phase = "bp";
    recs[1].epoch = 1;
    recs[1].phase = "bp";
    write_epoch_csv(recs, "t_epochs.csv", "# config_hash=beef seed=2 rng=test");
    std::ifstream in2("t_epochs.csv");
    std::getline(in2, first);
    CHECK(first[0] == '#');
    std::getline(in2, first);
    CHECK(first.rfind("epoch,phase,", 0) == 0);
    std::remove("t_epochs.csv");
}

TEST_SUITE_END();
