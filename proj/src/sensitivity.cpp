#include "hwnn/sensitivity.hpp"

#include <cmath>

namespace hwnn {

DirectionV DirectionV::zeros_like(const Mlp &net) {
    DirectionV d;
    for (std::size_t l = 0; l < net.layer_count(); ++l)
        d.v.emplace_back(net.layer(l).weights.rows(), net.layer(l).weights.cols());
    return d;
}

bool DirectionV::is_zero() const {
    for (const Matrix &m : v)
        for (double x : m.data())
            if (x != 0.0) return false;
    return true;
}

namespace {

double sign_of(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

void check_trace(const Mlp &net, const ForwardTrace &trace) {
    if (trace.pre.size() != net.layer_count() || trace.post.size() != net.layer_count())
        throw std::invalid_argument("sensitivity: trace does not match net");
    if (trace.approximate)
        throw std::invalid_argument("sensitivity: requires an exact trace");
}

void check_direction(const Mlp &net, const DirectionV &v) {
    if (v.v.size() != net.layer_count())
        throw std::invalid_argument("sensitivity: direction layer count mismatch");
    for (std::size_t l = 0; l < net.layer_count(); ++l)
        if (!v.v[l].same_shape(net.layer(l).weights))
            throw_shape_error("direction", v.v[l], net.layer(l).weights);
}

// dO_k/dx^l per layer, batch rows kept separate (Eq.1 seeded with output k).
std::vector<Matrix> jacobian_states(const Mlp &net, const ForwardTrace &trace, std::size_t k) {
    const std::size_t L = net.layer_count();
    const std::size_t batch = trace.input.rows();
    std::vector<Matrix> g(L);
    g[L - 1] = Matrix(batch, net.output_width());
    for (std::size_t b = 0; b < batch; ++b)
        g[L - 1](b, k) = act_deriv(net.layer(L - 1).activation, trace.pre[L - 1](b, k));
    for (std::size_t l = L - 1; l-- > 0;)
        g[l] = hadamard(matmul(g[l + 1], net.layer(l + 1).weights),
                        act_deriv(net.layer(l).activation, trace.pre[l]));
    return g;
}

Matrix abs_of(const Matrix &m) {
    return map(m, [](double x) { return std::fabs(x); });
}
Matrix sign_matrix(const Matrix &m) {
    return map(m, [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

// Per-sample weight Jacobians are rank one, J^b = g(b) a(b)^T, so the batch
// mean of |J^b| is a single product of absolute values.
Matrix layer_jacobian_abs_mean(const std::vector<Matrix> &g, const ForwardTrace &trace,
                               std::size_t l) {
    const Matrix &below = (l == 0) ? trace.input : trace.post[l - 1];
    Matrix j = matmul_tn(abs_of(g[l]), abs_of(below));
    j *= 1.0 / static_cast<double>(trace.input.rows());
    return j;
}

Gradients rop_backward_impl(const Mlp &net, const ForwardTrace &trace, const RTrace &rtrace,
                            const DirectionV &v, std::size_t k, const std::vector<Matrix> &g) {
    const std::size_t L = net.layer_count();
    const std::size_t batch = trace.input.rows();
    const double inv_b = 1.0 / static_cast<double>(batch);
    Gradients out = Gradients::zeros_like(net);

    // Output-layer seed: R{dO_k/dx^L_j} = h''(x^L_j) R{x^L_j} [j = k].
    Matrix rg(batch, net.output_width());
    for (std::size_t b = 0; b < batch; ++b)
        rg(b, k) = act_second_deriv(net.layer(L - 1).activation, trace.pre[L - 1](b, k)) *
                   rtrace.rx[L - 1](b, k);

    for (std::size_t l = L; l-- > 0;) {
        const Matrix &below = (l == 0) ? trace.input : trace.post[l - 1];
        Matrix hvp = matmul_tn(rg, below);
        if (l > 0) hvp += matmul_tn(g[l], rtrace.ra[l - 1]); // R{a^0} = 0
        hvp *= inv_b;
        out.dw[l] = std::move(hvp);
        for (std::size_t b = 0; b < batch; ++b)
            for (std::size_t j = 0; j < out.db[l].size(); ++j) out.db[l][j] += inv_b * rg(b, j);

        if (l > 0) {
            const Matrix back_w = matmul(g[l], net.layer(l).weights);
            const Matrix back_rv = add(matmul(g[l], v.v[l]), matmul(rg, net.layer(l).weights));
            const Matrix h1 = act_deriv(net.layer(l - 1).activation, trace.pre[l - 1]);
            const Matrix h2 = act_second_deriv(net.layer(l - 1).activation, trace.pre[l - 1]);
            rg = add(hadamard(hadamard(h2, rtrace.rx[l - 1]), back_w), hadamard(h1, back_rv));
        }
    }
    return out;
}

} // namespace

double sensitivity_value(const Mlp &net, const Matrix &batch) {
    return sensitivity_map(net, batch).total;
}

SensitivityMap sensitivity_map(const Mlp &net, const Matrix &batch) {
    if (batch.rows() == 0) throw std::invalid_argument("sensitivity: empty batch");
    const ForwardTrace trace = forward(net, batch);
    SensitivityMap map;
    for (std::size_t l = 0; l < net.layer_count(); ++l)
        map.per_layer.emplace_back(net.layer(l).weights.rows(), net.layer(l).weights.cols());
    for (std::size_t k = 0; k < net.output_width(); ++k) {
        const auto g = jacobian_states(net, trace, k);
        for (std::size_t l = 0; l < net.layer_count(); ++l) {
            const Matrix j = layer_jacobian_abs_mean(g, trace, l);
            const auto &w = net.layer(l).weights.data();
            auto &m = map.per_layer[l].data();
            for (std::size_t i = 0; i < w.size(); ++i) m[i] += std::fabs(w[i]) * j.data()[i];
        }
    }
    for (const Matrix &m : map.per_layer)
        for (double v : m.data()) map.total += v;
    return map;
}

RTrace rop_forward(const Mlp &net, const ForwardTrace &trace, const DirectionV &v) {
    check_trace(net, trace);
    check_direction(net, v);
    RTrace rt;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const Matrix &below_a = (l == 0) ? trace.input : trace.post[l - 1];
        Matrix rx = matmul_nt(below_a, v.v[l]);
        if (l > 0) rx += matmul_nt(rt.ra[l - 1], net.layer(l).weights);
        rt.ra.push_back(hadamard(act_deriv(net.layer(l).activation, trace.pre[l]), rx));
        rt.rx.push_back(std::move(rx));
    }
    return rt;
}

Gradients rop_backward(const Mlp &net, const ForwardTrace &trace, const RTrace &rtrace,
                       const DirectionV &v, std::size_t k) {
    check_trace(net, trace);
    check_direction(net, v);
    if (rtrace.rx.size() != net.layer_count())
        throw std::invalid_argument("rop_backward: rtrace does not match net");
    if (k >= net.output_width()) throw std::out_of_range("rop_backward: k out of range");
    return rop_backward_impl(net, trace, rtrace, v, k, jacobian_states(net, trace, k));
}

// Gradient of the per-sample sensitivity, batched. For sample b the direction
// is V^l(b) = |W^l| hadamard (sign g^l(b) outer sign a^{l-1}(b)); products
// against that rank-one structure reduce to matrix products of absolute
// values, so all samples ride through one R-pass with their own directions.
Gradients sensitivity_gradient(const Mlp &net, const Matrix &batch) {
    if (batch.rows() == 0) throw std::invalid_argument("sensitivity_gradient: empty batch");
    const std::size_t L = net.layer_count();
    const std::size_t b_count = batch.rows();
    const double inv_b = 1.0 / static_cast<double>(b_count);
    const ForwardTrace trace = forward(net, batch);
    Gradients total = Gradients::zeros_like(net);

    std::vector<Matrix> wabs(L);
    for (std::size_t l = 0; l < L; ++l) wabs[l] = abs_of(net.layer(l).weights);
    std::vector<Matrix> aabs(L + 1), asign(L + 1);
    aabs[0] = abs_of(trace.input);
    asign[0] = sign_matrix(trace.input);
    for (std::size_t l = 0; l < L; ++l) {
        aabs[l + 1] = abs_of(trace.post[l]);
        asign[l + 1] = sign_matrix(trace.post[l]);
    }

    for (std::size_t k = 0; k < net.output_width(); ++k) {
        const auto g = jacobian_states(net, trace, k);

        // first term: sign(w) * mean_b |J^b|
        for (std::size_t l = 0; l < L; ++l) {
            const Matrix j = layer_jacobian_abs_mean(g, trace, l);
            const auto &w = net.layer(l).weights.data();
            auto &dst = total.dw[l].data();
            for (std::size_t i = 0; i < w.size(); ++i)
                dst[i] += sign_of(w[i]) * j.data()[i];
        }

        // R-forward along the per-sample directions
        std::vector<Matrix> rx(L), ra(L);
        for (std::size_t l = 0; l < L; ++l) {
            Matrix r = hadamard(sign_matrix(g[l]), matmul_nt(aabs[l], wabs[l]));
            if (l > 0) r += matmul_nt(ra[l - 1], net.layer(l).weights);
            ra[l] = hadamard(act_deriv(net.layer(l).activation, trace.pre[l]), r);
            rx[l] = std::move(r);
        }

        // R-backward, output seed R{dO_k/dx^L_j} = h''(x^L_j) R{x^L_j} [j=k]
        Matrix rg(b_count, net.output_width());
        for (std::size_t b = 0; b < b_count; ++b)
            rg(b, k) = act_second_deriv(net.layer(L - 1).activation, trace.pre[L - 1](b, k)) *
                       rx[L - 1](b, k);
        for (std::size_t l = L; l-- > 0;) {
            const Matrix &below = (l == 0) ? trace.input : trace.post[l - 1];
            Matrix hvp = matmul_tn(rg, below);
            if (l > 0) hvp += matmul_tn(g[l], ra[l - 1]);
            hvp *= inv_b;
            total.dw[l] += hvp;

            if (l > 0) {
                const Matrix back_w = matmul(g[l], net.layer(l).weights);
                const Matrix back_v = hadamard(asign[l], matmul(abs_of(g[l]), wabs[l]));
                const Matrix back_r = matmul(rg, net.layer(l).weights);
                const Matrix h1 = act_deriv(net.layer(l - 1).activation, trace.pre[l - 1]);
                const Matrix h2 = act_second_deriv(net.layer(l - 1).activation, trace.pre[l - 1]);
                rg = add(hadamard(hadamard(h2, rx[l - 1]), back_w),
                         hadamard(h1, add(back_v, back_r)));
            }
        }
    }
    return total;
}

void update_gamma(SensitivityState &state, double epoch_error) {
    if (!(epoch_error >= 0.0) || !std::isfinite(epoch_error))
        throw std::invalid_argument("update_gamma: epoch error must be finite and >= 0");
    bool increase = epoch_error < state.accuracy_bound;
    if (!increase && !state.error_history.empty()) {
        double ref = 0.0, wsum = 0.0, w = 0.5;
        for (auto it = state.error_history.rbegin(); it != state.error_history.rend(); ++it) {
            ref += w * *it;
            wsum += w;
            w *= 0.5;
        }
        increase = epoch_error < ref / wsum;
    }
    state.gamma = increase ? state.gamma + state.delta_gamma
                           : std::max(0.0, state.gamma - state.delta_gamma);
    state.error_history.push_back(epoch_error);
}

} // namespace hwnn
