#include <doctest.h>

#include <cmath>

#include "hwnn/fixedpoint.hpp"
#include "support/oracles.hpp"

using namespace hwnn;

TEST_SUITE_BEGIN("fixedpoint");

TEST_CASE("choose_format picks the largest safe fraction width") {
    CHECK(choose_format(Matrix::from_rows({{0.09, -0.03}}), 16).frac_bits == 15);
    CHECK(choose_format(Matrix(2, 2, 0.0), 16).frac_bits == 15);
    CHECK(choose_format(Matrix::from_rows({{3.2, -1.0}}), 16).frac_bits == 13);
    // boundary: 1.0 does not fit Q0.15, needs one integer bit
    CHECK(choose_format(Matrix::from_rows({{1.0}}), 16).frac_bits == 14);
    CHECK_THROWS_AS(choose_format(std::vector<double>{}, 16), std::invalid_argument);

    // never saturates by construction
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> vals;
        for (int i = 0; i < 20; ++i) vals.push_back(rng.uniform(-50.0, 50.0));
        const FixedPointFormat fmt = choose_format(vals, 16);
        for (double v : vals) {
            const FixedWord w = quantize(v, fmt);
            CHECK(w.raw < fmt.max_raw() + 1);
            CHECK(w.raw > fmt.min_raw() - 1);
            CHECK(std::llabs(w.raw) != fmt.max_raw() + 1);
        }
        // one more fraction bit would saturate the largest magnitude
        if (fmt.frac_bits < fmt.word_bits - 1) {
            double maxabs = 0.0;
            for (double v : vals) maxabs = std::max(maxabs, std::fabs(v));
            const FixedPointFormat wider{fmt.word_bits, fmt.frac_bits + 1};
            CHECK(std::nearbyint(maxabs * std::ldexp(1.0, wider.frac_bits)) >
                  static_cast<double>(wider.max_raw()));
        }
    }
}

TEST_CASE("quantize rounds to nearest even and saturates") {
    CHECK(quantize(0.5, {16, 8}).raw == 128);
    CHECK(quantize(200.0, {16, 15}).raw == 32767);
    CHECK(quantize(-200.0, {16, 15}).raw == -32768);
    CHECK_THROWS_AS(quantize(std::nan(""), {16, 8}), std::invalid_argument);
    CHECK_THROWS_AS(quantize(INFINITY, {16, 8}), std::invalid_argument);

    // ties to even
    CHECK(quantize(1.5, {8, 0}).raw == 2);
    CHECK(quantize(2.5, {8, 0}).raw == 2);

    Rng rng(5);
    const FixedPointFormat fmt{16, 12};
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform(-6.0, 6.0);
        const FixedWord w = quantize(x, fmt);
        const double back = dequantize(w);
        const bool saturated = w.raw == fmt.max_raw() || w.raw == fmt.min_raw();
        if (!saturated) CHECK(std::fabs(back - x) <= std::ldexp(1.0, -fmt.frac_bits - 1));
        // projection: quantizing the dequantized value is a fixed point
        CHECK(quantize(back, fmt).raw == w.raw);
    }
}

TEST_CASE("truncated multiplier matches the worked example") {
    const FixedPointFormat f{16, 0};
    const ApproxMulConfig k4{4, "K2"};
    CHECK(approx_multiply({0, f}, {21, f}, k4) == 0.0);
    CHECK(approx_multiply({107, f}, {21, f}, k4) == doctest::Approx(2288.0)); // exact is 2247
    CHECK(truncate_magnitude(107, 4) == 104);
    CHECK(truncate_magnitude(21, 4) == 22);
    // operands that fit in k bits pass through unchanged
    CHECK(approx_multiply({5, f}, {3, f}, k4) == 15.0);
    // sign handling
    CHECK(approx_multiply({-107, f}, {21, f}, k4) == doctest::Approx(-2288.0));
    CHECK(approx_multiply({-107, f}, {-21, f}, k4) == doctest::Approx(2288.0));
}

TEST_CASE("truncated multiplier is commutative and scale-aware") {
    Rng rng(31);
    const FixedPointFormat fa{16, 10}, fb{16, 7};
    const ApproxMulConfig cfg{3, "K1"};
    for (int i = 0; i < 500; ++i) {
        const FixedWord a{static_cast<std::int64_t>(rng.next_below(65536)) - 32768, fa};
        const FixedWord b{static_cast<std::int64_t>(rng.next_below(65536)) - 32768, fb};
        CHECK(approx_multiply(a, b, cfg) == approx_multiply(b, a, cfg));
        CHECK(approx_multiply(a, b, cfg) ==
              doctest::Approx(oracle::approx_product(a.raw, b.raw, cfg.k, 10, 7)));
    }
}

TEST_CASE("truncation error bound holds exhaustively for 8-bit operands") {
    const FixedPointFormat f{8, 0};
    for (int k = 3; k <= 6; ++k) {
        const ApproxMulConfig cfg{k, "k"};
        const double bound = std::ldexp(1.0, 2 - k) + std::ldexp(1.0, 2 - 2 * k);
        for (int a = -128; a <= 127; ++a) {
            for (int b = -128; b <= 127; ++b) {
                const double approx = approx_multiply({a, f}, {b, f}, cfg);
                const double exact = static_cast<double>(a) * b;
                if (exact == 0.0) {
                    CHECK(approx == 0.0);
                    continue;
                }
                CHECK(std::fabs(approx - exact) <= bound * std::fabs(exact));
            }
        }
    }
}

TEST_CASE("k covering all significant bits gives the exact product") {
    const FixedPointFormat f{8, 0};
    for (int a = -127; a <= 127; ++a)
        for (int b = -127; b <= 127; ++b)
            CHECK(approx_multiply({a, f}, {b, f}, {7, "wide"}) == static_cast<double>(a) * b);
    // the 8-significant-bit magnitude of -128 needs k = 8
    CHECK(approx_multiply({-128, f}, {3, f}, {8, "full"}) == -384.0);
}

TEST_CASE("bit flips: degenerate probabilities") {
    Rng rng(77);
    const FixedPointFormat f{16, 15};
    const FixedWord w{12345, f};
    CHECK(inject_bit_flips(w, {0.0, "off"}, rng).raw == 12345);
    // p = 1 complements every bit of the two's-complement word
    CHECK(inject_bit_flips(w, {1.0, "all"}, rng).raw == ~std::int64_t{12345});
    CHECK(inject_bit_flips({0, f}, {1.0, "all"}, rng).raw == -1);
    CHECK(inject_bit_flips({32767, f}, {1.0, "all"}, rng).raw == -32768);
}

TEST_CASE("bit flip rate matches the binomial mean") {
    Rng rng(4242);
    const NtvConfig cfg{0.01, "660mV"};
    const FixedPointFormat f{16, 15};
    std::size_t flipped_bits = 0;
    const std::size_t words = 100000;
    for (std::size_t i = 0; i < words; ++i) {
        const FixedWord w{static_cast<std::int64_t>(rng.next_below(65536)) - 32768, f};
        const FixedWord out = inject_bit_flips(w, cfg, rng);
        std::uint64_t diff = static_cast<std::uint64_t>(w.raw ^ out.raw) & 0xFFFF;
        while (diff) {
            flipped_bits += diff & 1;
            diff >>= 1;
        }
    }
    const double mean = static_cast<double>(flipped_bits) / static_cast<double>(words);
    CHECK(mean > 0.150);
    CHECK(mean < 0.170);
}

TEST_CASE("straight-through estimator clamps at unit magnitude") {
    CHECK(ste_backward(0.3) == 0.3);
    CHECK(ste_backward(7.5) == 1.0);
    CHECK(ste_backward(-2.0) == -1.0);
    CHECK(ste_backward(1.0) == 1.0);

    Rng rng(8);
    const Matrix g = oracle::random_matrix(4, 4, rng, -3.0, 3.0);
    const Matrix once = ste_backward(g);
    const Matrix twice = ste_backward(once);
    for (std::size_t i = 0; i < once.size(); ++i) CHECK(once.data()[i] == twice.data()[i]);
}

TEST_CASE("approximate linear layer approaches the exact product with wide formats") {
    Rng rng(13);
    const Matrix acts = oracle::random_matrix(4, 8, rng, -0.9, 0.9);
    const Matrix weights = oracle::random_matrix(5, 8, rng, -0.9, 0.9);
    HardwareModel hw;
    hw.weight_format = {16, 15};
    hw.activation_format = {16, 15};
    Rng noise(1);
    const Matrix out = approx_forward_linear(acts, weights, hw, noise);
    const Matrix ref = matmul_nt(acts, weights);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(std::fabs(out.data()[i] - ref.data()[i]) < 2e-4);
}

TEST_CASE("wide multiplier mode equals the exact fixed-point path bit for bit") {
    Rng rng(17);
    const Matrix acts = oracle::random_matrix(3, 6, rng, -0.9, 0.9);
    const Matrix weights = oracle::random_matrix(4, 6, rng, -0.9, 0.9);
    HardwareModel exact_hw, wide_hw;
    exact_hw.weight_format = wide_hw.weight_format = {16, 15};
    exact_hw.activation_format = wide_hw.activation_format = {16, 15};
    wide_hw.multiplier = ApproxMulConfig{16, "full"};
    Rng r1(0), r2(0);
    const Matrix a = approx_forward_linear(acts, weights, exact_hw, r1);
    const Matrix b = approx_forward_linear(acts, weights, wide_hw, r2);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
}

TEST_CASE("guaranteed sign flip inverts a one-neuron output") {
    // weight at +max, p=1 flips every bit -> word becomes the most negative
    const Matrix acts = Matrix::from_rows({{0.5}});
    const Matrix weights = Matrix::from_rows({{0.999969482421875}}); // 32767 * 2^-15
    HardwareModel hw;
    hw.weight_format = {16, 15};
    hw.activation_format = {16, 15};
    hw.storage = NtvConfig{1.0, "dead"};
    Rng rng(5);
    const Matrix noisy = approx_forward_linear(acts, weights, hw, rng);
    Rng rng2(5);
    HardwareModel clean = hw;
    clean.storage.reset();
    const Matrix ref = approx_forward_linear(acts, weights, clean, rng2);
    CHECK(ref(0, 0) > 0.0);
    CHECK(noisy(0, 0) < 0.0);
    CHECK(noisy(0, 0) == doctest::Approx(-ref(0, 0) * 32768.0 / 32767.0));
}

TEST_CASE("model validation rejects bad parameters") {
    CHECK_THROWS_AS((FixedPointFormat{16, 16}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((ApproxMulConfig{1, "K0"}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((NtvConfig{1.5, "x"}.validate()), std::invalid_argument);
    CHECK(mode_default_width("K1") == 3);
    CHECK(mode_default_width("K4") == 6);
    CHECK_THROWS_AS(mode_default_width("K9"), std::invalid_argument);
}

TEST_SUITE_END();
