#pragma once

#include <vector>

#include "hwnn/network.hpp"

namespace hwnn {

// Direction in weight space, one matrix per layer mirroring the weight shapes.
// Biases carry no direction component.
struct DirectionV {
    std::vector<Matrix> v;

    static DirectionV zeros_like(const Mlp &net);
    bool is_zero() const;
};

// R{x^l} and R{a^l} per layer for a given direction. R{a^0} = 0.
struct RTrace {
    std::vector<Matrix> rx;
    std::vector<Matrix> ra;
};

struct SensitivityState {
    double gamma = 0.0;
    double delta_gamma = 0.0;
    double accuracy_bound = 0.0;
    std::vector<double> error_history;
};

// Network sensitivity: sum over outputs k and weights of |w| * |dO_k/dw|,
// with the output derivatives averaged over the batch.
double sensitivity_value(const Mlp &net, const Matrix &batch);

// Per-layer per-weight map sum_k |w| * |dO_k/dw| plus its total.
struct SensitivityMap {
    std::vector<Matrix> per_layer;
    double total = 0.0;
};
SensitivityMap sensitivity_map(const Mlp &net, const Matrix &batch);

// Directional forward pass: R{x}, R{a} for direction v around the given
// exact trace.
RTrace rop_forward(const Mlp &net, const ForwardTrace &trace, const DirectionV &v);

// Directional backward pass for output k: returns R_v{dO_k/dw}, the
// Hessian-vector product of output k's parameter Hessian with v (and the
// matching bias entries R_v{dO_k/db}).
Gradients rop_backward(const Mlp &net, const ForwardTrace &trace, const RTrace &rtrace,
                       const DirectionV &v, std::size_t k);

// Exact gradient of sensitivity_value with respect to the weights (bias
// entries are zero). sign(0) = 0.
Gradients sensitivity_gradient(const Mlp &net, const Matrix &batch);

// Per-epoch preference-factor controller: gamma grows by delta_gamma while
// the epoch error beats the 1/2, 1/4, ... weighted history (weights
// renormalized over short histories) or stays under accuracy_bound, and
// shrinks (clamped at zero) otherwise. The error is appended to the history.
void update_gamma(SensitivityState &state, double epoch_error);

} // namespace hwnn
