#include "hwnn/fixedpoint.hpp"

#include <bit>
#include <cmath>
#include <cstdlib>

namespace hwnn {

void FixedPointFormat::validate() const {
    if (word_bits < 2 || word_bits > 31)
        throw std::invalid_argument("FixedPointFormat: word_bits must be in [2,31], got " +
                                    std::to_string(word_bits));
    if (frac_bits < 0 || frac_bits > word_bits - 1)
        throw std::invalid_argument("FixedPointFormat: frac_bits must be in [0,word_bits-1], got " +
                                    std::to_string(frac_bits));
}

double FixedPointFormat::max_value() const { return std::ldexp(static_cast<double>(max_raw()), -frac_bits); }
double FixedPointFormat::min_value() const { return std::ldexp(static_cast<double>(min_raw()), -frac_bits); }

void ApproxMulConfig::validate() const {
    if (k < 2) throw std::invalid_argument("ApproxMulConfig: k must be >= 2, got " + std::to_string(k));
}

void NtvConfig::validate() const {
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0))
        throw std::invalid_argument("NtvConfig: flip_prob must be in [0,1], got " +
                                    std::to_string(flip_prob));
}

void HardwareModel::validate() const {
    if (multiplier) multiplier->validate();
    if (storage) storage->validate();
    weight_format.validate();
    activation_format.validate();
}

int mode_default_width(const std::string &label) {
    if (label == "K1") return 3;
    if (label == "K2") return 4;
    if (label == "K3") return 5;
    if (label == "K4") return 6;
    throw std::invalid_argument("unknown multiplier mode label: " + label);
}

namespace {

bool saturates(double maxabs, int word_bits, int frac_bits) {
    const double max_raw = std::ldexp(1.0, word_bits - 1) - 1.0;
    return std::nearbyint(maxabs * std::ldexp(1.0, frac_bits)) > max_raw;
}

} // namespace

FixedPointFormat choose_format(const Matrix &values, int word_bits) {
    return choose_format(values.data(), word_bits);
}

FixedPointFormat choose_format(const std::vector<double> &values, int word_bits) {
    FixedPointFormat probe{word_bits, 0};
    probe.validate();
    if (values.empty()) throw std::invalid_argument("choose_format: values must be nonempty");
    double maxabs = 0.0;
    for (double v : values) {
        if (!std::isfinite(v)) throw std::invalid_argument("choose_format: values must be finite");
        maxabs = std::max(maxabs, std::fabs(v));
    }
    if (maxabs == 0.0) return {word_bits, word_bits - 1};

    int fb = word_bits - 1 - static_cast<int>(std::ceil(std::log2(maxabs)));
    fb = std::clamp(fb, 0, word_bits - 1);
    while (fb > 0 && saturates(maxabs, word_bits, fb)) --fb;
    while (fb < word_bits - 1 && !saturates(maxabs, word_bits, fb + 1)) ++fb;
    return {word_bits, fb};
}

FixedWord quantize(double x, const FixedPointFormat &fmt) {
    fmt.validate();
    if (std::isnan(x)) throw std::invalid_argument("quantize: NaN input");
    if (std::isinf(x)) throw std::invalid_argument("quantize: infinite input");
    const double scaled = std::nearbyint(x * std::ldexp(1.0, fmt.frac_bits));
    const double max_raw = static_cast<double>(fmt.max_raw());
    const double min_raw = static_cast<double>(fmt.min_raw());
    std::int64_t raw;
    if (scaled > max_raw)
        raw = fmt.max_raw();
    else if (scaled < min_raw)
        raw = fmt.min_raw();
    else
        raw = static_cast<std::int64_t>(scaled);
    return {raw, fmt};
}

double dequantize(const FixedWord &w) {
    return std::ldexp(static_cast<double>(w.raw), -w.format.frac_bits);
}

std::uint64_t truncate_magnitude(std::uint64_t magnitude, int k) {
    if (magnitude == 0) return 0;
    const int sig_bits = std::bit_width(magnitude);
    if (sig_bits <= k) return magnitude; // nothing would be discarded
    const int shift = sig_bits - k;
    const std::uint64_t keep_mask = ((std::uint64_t{1} << k) - 1) << shift;
    return (magnitude & keep_mask) | (std::uint64_t{1} << shift);
}

double approx_multiply(const FixedWord &a, const FixedWord &b, const ApproxMulConfig &cfg) {
    cfg.validate();
    const bool negative = (a.raw < 0) != (b.raw < 0);
    const std::uint64_t ma = truncate_magnitude(static_cast<std::uint64_t>(std::llabs(a.raw)), cfg.k);
    const std::uint64_t mb = truncate_magnitude(static_cast<std::uint64_t>(std::llabs(b.raw)), cfg.k);
    const double product = static_cast<double>(ma) * static_cast<double>(mb) * (negative ? -1.0 : 1.0);
    return std::ldexp(product, -(a.format.frac_bits + b.format.frac_bits));
}

double exact_multiply(const FixedWord &a, const FixedWord &b) {
    return std::ldexp(static_cast<double>(a.raw) * static_cast<double>(b.raw),
                      -(a.format.frac_bits + b.format.frac_bits));
}

FixedWord inject_bit_flips(const FixedWord &w, const NtvConfig &cfg, Rng &rng) {
    cfg.validate();
    const int wb = w.format.word_bits;
    const std::uint64_t mask = (std::uint64_t{1} << wb) - 1;
    std::uint64_t bits = static_cast<std::uint64_t>(w.raw) & mask;
    for (int i = 0; i < wb; ++i)
        if (rng.next_uniform() < cfg.flip_prob) bits ^= std::uint64_t{1} << i;
    if (bits >> (wb - 1)) bits |= ~mask; // sign extend
    return {static_cast<std::int64_t>(bits), w.format};
}

double ste_backward(double g) {
    if (g > 1.0) return 1.0;
    if (g < -1.0) return -1.0;
    return g;
}

Matrix ste_backward(const Matrix &grad_out) {
    return map(grad_out, [](double g) { return ste_backward(g); });
}

Matrix approx_forward_linear(const Matrix &activations, const Matrix &weights,
                             const HardwareModel &hw, Rng &rng) {
    hw.validate();
    if (activations.cols() != weights.cols())
        throw_shape_error("approx_forward_linear", activations, weights);

    const int k = hw.multiplier ? hw.multiplier->k : -1;
    auto prepare = [k](std::int64_t raw) -> std::int64_t {
        if (k < 0) return raw;
        const std::uint64_t mag =
            truncate_magnitude(static_cast<std::uint64_t>(std::llabs(raw)), k);
        return raw < 0 ? -static_cast<std::int64_t>(mag) : static_cast<std::int64_t>(mag);
    };

    // Stored weight image: quantized, bit-flipped when NTV storage is active,
    // then operand-truncated once (the multiplier sees each word many times).
    Matrix wimg(weights.rows(), weights.cols());
    for (std::size_t j = 0; j < weights.rows(); ++j) {
        for (std::size_t i = 0; i < weights.cols(); ++i) {
            FixedWord qw = quantize(weights(j, i), hw.weight_format);
            if (hw.storage) qw = inject_bit_flips(qw, *hw.storage, rng);
            wimg(j, i) = static_cast<double>(prepare(qw.raw));
        }
    }
    Matrix aimg(activations.rows(), activations.cols());
    for (std::size_t b = 0; b < activations.rows(); ++b)
        for (std::size_t i = 0; i < activations.cols(); ++i)
            aimg(b, i) = static_cast<double>(prepare(quantize(activations(b, i), hw.activation_format).raw));

    const int shift = hw.activation_format.frac_bits + hw.weight_format.frac_bits;
    const int product_bits = (hw.activation_format.word_bits - 1) + (hw.weight_format.word_bits - 1);
    const int sum_bits = product_bits + std::bit_width(static_cast<std::uint64_t>(weights.cols()));
    Matrix out;
    if (sum_bits <= 53) {
        // Raw products and their sums stay below 2^53: double MACs are exact.
        out = matmul_nt(aimg, wimg);
    } else {
        if (sum_bits > 62)
            throw std::invalid_argument("approx_forward_linear: word widths too large for exact accumulation");
        out = Matrix(activations.rows(), weights.rows());
        for (std::size_t b = 0; b < activations.rows(); ++b) {
            for (std::size_t j = 0; j < weights.rows(); ++j) {
                std::int64_t acc = 0;
                for (std::size_t i = 0; i < weights.cols(); ++i)
                    acc += static_cast<std::int64_t>(aimg(b, i)) * static_cast<std::int64_t>(wimg(j, i));
                out(b, j) = static_cast<double>(acc);
            }
        }
    }
    for (double &v : out.data()) v = std::ldexp(v, -shift);
    return out;
}

} // namespace hwnn
