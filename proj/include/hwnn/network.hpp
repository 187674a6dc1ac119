#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hwnn/fixedpoint.hpp"
#include "hwnn/linalg.hpp"

namespace hwnn {

enum class Activation { ReLU, Sigmoid, Identity };

const char *activation_name(Activation a);
Activation activation_from_name(const std::string &name);

double act_value(Activation a, double x);
double act_deriv(Activation a, double x);
double act_second_deriv(Activation a, double x);

Matrix act_value(Activation a, const Matrix &x);
Matrix act_deriv(Activation a, const Matrix &x);
Matrix act_second_deriv(Activation a, const Matrix &x);

struct Layer {
    Matrix weights; // fan_out x fan_in
    std::vector<double> bias;
    Activation activation = Activation::Identity;
};

// Fully connected feed-forward net. Hidden layers default to ReLU, the output
// layer to Sigmoid.
class Mlp {
public:
    Mlp() = default;
    Mlp(const std::vector<std::size_t> &topology, const std::vector<Activation> &activations);

    static Mlp init_random(const std::vector<std::size_t> &topology, Rng &rng);
    static Mlp init_random(const std::vector<std::size_t> &topology,
                           const std::vector<Activation> &activations, Rng &rng);

    std::size_t layer_count() const { return layers_.size(); }
    Layer &layer(std::size_t i) { return layers_[i]; }
    const Layer &layer(std::size_t i) const { return layers_[i]; }

    std::size_t input_width() const;
    std::size_t output_width() const;
    std::vector<std::size_t> topology() const;

    bool all_finite() const;

private:
    std::vector<Layer> layers_;
};

struct ForwardTrace {
    Matrix input;             // a^0
    std::vector<Matrix> pre;  // x^l per layer
    std::vector<Matrix> post; // a^l per layer
    bool approximate = false;

    const Matrix &outputs() const & { return post.back(); }
    // rvalue traces hand the matrix out by value so callers can't keep a
    // reference into a destroyed temporary
    Matrix outputs() && { return std::move(post.back()); }
};

struct Gradients {
    std::vector<Matrix> dw;
    std::vector<std::vector<double>> db;

    static Gradients zeros_like(const Mlp &net);
    Gradients &axpy(double alpha, const Gradients &other); // this += alpha * other
    double max_abs() const;
    bool all_finite() const;
};

// Exact forward pass.
ForwardTrace forward(const Mlp &net, const Matrix &batch);
// Forward pass with every weight-activation product routed through the
// hardware model. Bias is added exactly and the trace stores the realized
// real-valued pre-activations and activations.
ForwardTrace forward(const Mlp &net, const Matrix &batch, const HardwareModel &hw, Rng &rng);

// Mean squared error over batch and output units.
double loss(const Matrix &outputs, const Matrix &targets);

// Backpropagation of the loss gradient. Approximate traces route gradients
// through the straight-through estimator at each approximate linear block.
Gradients backward(const Mlp &net, const ForwardTrace &trace, const Matrix &targets);

// Derivatives of output k (batch mean, not the loss) with respect to every
// parameter. Requires an exact trace.
Gradients output_jacobian_row(const Mlp &net, const ForwardTrace &trace, std::size_t k);

void sgd_step(Mlp &net, const Gradients &grads, double eta);

// Fraction of rows whose argmax matches the label. A single output unit is
// thresholded at 0.5 instead.
double accuracy(const Matrix &outputs, const std::vector<int> &labels);
std::size_t correct_count(const Matrix &outputs, const std::vector<int> &labels);

// Plain-text checkpoint, bit-exact round trip.
void save_checkpoint(const Mlp &net, const std::string &path, std::uint64_t seed);
Mlp load_checkpoint(const std::string &path, std::uint64_t *seed_out = nullptr);

// Dynamic fixed point: one format per tensor class. The weight format covers
// all layers' weights, the activation format covers the inputs and every
// layer's activations observed on an exact pass over the given features.
std::pair<FixedPointFormat, FixedPointFormat> calibrate_formats(const Mlp &net,
                                                                const Matrix &features,
                                                                int word_bits);

} // namespace hwnn
