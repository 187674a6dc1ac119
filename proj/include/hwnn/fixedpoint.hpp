#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "hwnn/linalg.hpp"

namespace hwnn {

// Signed two's-complement fixed point. Real value = raw * 2^-frac_bits.
struct FixedPointFormat {
    int word_bits = 16;
    int frac_bits = 15;

    void validate() const;
    std::int64_t max_raw() const { return (std::int64_t{1} << (word_bits - 1)) - 1; }
    std::int64_t min_raw() const { return -(std::int64_t{1} << (word_bits - 1)); }
    double max_value() const;
    double min_value() const;
    bool operator==(const FixedPointFormat &) const = default;
};

struct FixedWord {
    std::int64_t raw = 0;
    FixedPointFormat format;
};

// Multiplier that keeps only the k bits of each operand magnitude starting at
// its leading one, with the last kept bit forced to 1.
struct ApproxMulConfig {
    int k = 4;
    std::string mode_label;

    void validate() const;
};

// Per-bit flip probability of the weight storage at a given supply voltage.
struct NtvConfig {
    double flip_prob = 0.0;
    std::string voltage_label;

    void validate() const;
};

struct HardwareModel {
    std::optional<ApproxMulConfig> multiplier; // nullopt = exact multiplier
    std::optional<NtvConfig> storage;          // nullopt = reliable storage
    FixedPointFormat weight_format;
    FixedPointFormat activation_format;

    void validate() const;
};

// Default effective widths for the four multiplier modes (K1 most aggressive).
int mode_default_width(const std::string &label);

// Format with the largest frac_bits such that max|values| quantizes without
// saturating. All-zero input degenerates to frac_bits = word_bits - 1.
FixedPointFormat choose_format(const Matrix &values, int word_bits);
FixedPointFormat choose_format(const std::vector<double> &values, int word_bits);

// Round-to-nearest-even of x * 2^frac_bits, saturating at the format bounds.
// NaN and +-Inf are errors: they signal an upstream bug, not a hardware event.
FixedWord quantize(double x, const FixedPointFormat &fmt);
double dequantize(const FixedWord &w);

std::uint64_t truncate_magnitude(std::uint64_t magnitude, int k);
double approx_multiply(const FixedWord &a, const FixedWord &b, const ApproxMulConfig &cfg);
double exact_multiply(const FixedWord &a, const FixedWord &b);

// Flips each of the word's bits (sign bit included) independently with
// probability cfg.flip_prob.
FixedWord inject_bit_flips(const FixedWord &w, const NtvConfig &cfg, Rng &rng);

// Straight-through gradient: pass |g| < 1 unchanged, clamp the rest to +-1.
double ste_backward(double grad_out);
Matrix ste_backward(const Matrix &grad_out);

// Pre-activations of one linear layer computed through the hardware model:
// weights quantized (storage flips resampled on every call), activations
// quantized, every product through the configured multiplier, accumulation
// exact. Bias is not handled here; callers add it in real arithmetic.
// activations: batch x fan_in, weights: fan_out x fan_in -> batch x fan_out.
Matrix approx_forward_linear(const Matrix &activations, const Matrix &weights,
                             const HardwareModel &hw, Rng &rng);

} // namespace hwnn
