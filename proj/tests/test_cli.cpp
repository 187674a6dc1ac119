#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "hwnn/cli.hpp"

using namespace hwnn;

namespace {

int cli(const std::vector<std::string> &args) {
    std::vector<const char *> argv = {"hwnn"};
    for (const auto &a : args) argv.push_back(a.c_str());
    return run_cli(static_cast<int>(argv.size()), argv.data());
}

struct TempTree {
    std::filesystem::path root;
    TempTree() : root(std::filesystem::temp_directory_path() / "hwnn_cli_test") {
        std::filesystem::remove_all(root);
        std::filesystem::create_directories(root);
    }
    ~TempTree() { std::filesystem::remove_all(root); }
    std::string file(const std::string &name, const std::string &content) const {
        const auto p = root / name;
        std::ofstream out(p);
        out << content;
        return p.string();
    }
    std::string path(const std::string &name) const { return (root / name).string(); }
};

std::string toy_csv() {
    // two well separated blobs, 24 rows
    std::string rows;
    for (int i = 0; i < 12; ++i) {
        rows += std::to_string(0.2 + 0.01 * i) + "," + std::to_string(0.1 + 0.005 * i) + ",a\n";
        rows += std::to_string(0.8 - 0.01 * i) + "," + std::to_string(0.9 - 0.005 * i) + ",b\n";
    }
    return rows;
}

std::string toy_config(const TempTree &t, const std::string &csv_path, const std::string &extra) {
    return t.file("exp.cfg",
                  "[dataset]\n"
                  "kind = csv\n"
                  "path = " + csv_path + "\n"
                  "train_fraction = 0.75\n"
                  "split_seed = 5\n"
                  "[net]\n"
                  "topology = 2,4,2\n"
                  "[train]\n"
                  "regime = bp\n"
                  "eta = 1.0\n"
                  "epochs = 8\n"
                  "batch = 6\n"
                  "seed = 2\n"
                  "[eval]\n"
                  "sweep = exact, quant, K1\n"
                  "runs = 5\n"
                  "[output]\n"
                  "dir = " + t.path("out") + "\n" + extra);
}

} // namespace

TEST_SUITE_BEGIN("cli");

TEST_CASE("train then evaluate end to end") {
    TempTree t;
    const std::string csv = t.file("toy.csv", toy_csv());
    const std::string cfg = toy_config(t, csv, "");

    CHECK(cli({"train", "--config", cfg, "--quiet"}) == 0);
    CHECK(std::filesystem::exists(t.path("out/checkpoint.txt")));
    CHECK(std::filesystem::exists(t.path("out/epochs.csv")));

    CHECK(cli({"evaluate", "--config", cfg}) == 0);
    CHECK(std::filesystem::exists(t.path("out/report.csv")));

    CHECK(cli({"sensitivity-map", "--config", cfg}) == 0);
    CHECK(std::filesystem::exists(t.path("out/sensitivity_layer0.csv")));
    CHECK(std::filesystem::exists(t.path("out/sensitivity_layer1.csv")));

    const std::string cost_cfg = toy_config(t, csv,
                                            "[cost]\n"
                                            "mult.exact = 1.0\n"
                                            "mult.K1 = 0.2\n"
                                            "sram.nominal = 1.0\n");
    CHECK(cli({"cost-report", "--config", cost_cfg}) == 0);
    CHECK(std::filesystem::exists(t.path("out/cost_report.csv")));
}

TEST_CASE("config problems exit with code 2") {
    TempTree t;
    CHECK(cli({"train", "--config", t.path("nope.cfg")}) == 2);

    const std::string csv = t.file("toy.csv", toy_csv());
    const std::string bad_topo = t.file("bad.cfg",
                                        "[dataset]\nkind = csv\npath = " + csv + "\n"
                                        "[net]\ntopology = 30,64\n"
                                        "[train]\nregime = bp\nepochs = 1\n"
                                        "[output]\ndir = " + t.path("out2") + "\n");
    CHECK(cli({"train", "--config", bad_topo, "--quiet"}) == 2);

    const std::string bad_regime = t.file("bad2.cfg",
                                          "[dataset]\nkind = csv\npath = " + csv + "\n"
                                          "[net]\ntopology = 2,4,2\n"
                                          "[train]\nregime = warp\nepochs = 1\n"
                                          "[output]\ndir = " + t.path("out3") + "\n");
    CHECK(cli({"train", "--config", bad_regime, "--quiet"}) == 2);
}

TEST_CASE("missing data files exit with code 4") {
    TempTree t;
    const std::string cfg = toy_config(t, t.path("ghost.csv"), "");
    CHECK(cli({"train", "--config", cfg, "--quiet"}) == 4);
    const std::string csv = t.file("toy.csv", toy_csv());
    const std::string cfg2 = toy_config(t, csv, "");
    CHECK(cli({"evaluate", "--config", cfg2, "--checkpoint", t.path("ghost.ckpt")}) == 4);
}

TEST_CASE("seed override changes the run, same seed reproduces it") {
    TempTree t;
    const std::string csv = t.file("toy.csv", toy_csv());
    const std::string cfg = toy_config(t, csv, "");

    REQUIRE(cli({"train", "--config", cfg, "--quiet", "--out", t.path("o1")}) == 0);
    REQUIRE(cli({"train", "--config", cfg, "--quiet", "--out", t.path("o2")}) == 0);
    REQUIRE(cli({"train", "--config", cfg, "--quiet", "--seed", "99", "--out", t.path("o3")}) == 0);

    auto slurp = [](const std::string &p) {
        std::ifstream in(p);
        return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    };
    const std::string c1 = slurp(t.path("o1/checkpoint.txt"));
    const std::string c2 = slurp(t.path("o2/checkpoint.txt"));
    const std::string c3 = slurp(t.path("o3/checkpoint.txt"));
    CHECK(c1 == c2);
    CHECK(c1 != c3);
}

TEST_SUITE_END();
