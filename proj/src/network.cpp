#include "hwnn/network.hpp"

#include "hwnn/errors.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace hwnn {

const char *activation_name(Activation a) {
    switch (a) {
    case Activation::ReLU: return "relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
    }
    return "?";
}

Activation activation_from_name(const std::string &name) {
    if (name == "relu") return Activation::ReLU;
    if (name == "sigmoid") return Activation::Sigmoid;
    if (name == "identity") return Activation::Identity;
    throw std::invalid_argument("unknown activation: " + name);
}

namespace {
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
} // namespace

double act_value(Activation a, double x) {
    switch (a) {
    case Activation::ReLU: return x > 0.0 ? x : 0.0;
    case Activation::Sigmoid: return sigmoid(x);
    case Activation::Identity: return x;
    }
    return 0.0;
}

// ReLU derivative at exactly 0 is 0.
double act_deriv(Activation a, double x) {
    switch (a) {
    case Activation::ReLU: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Sigmoid: {
        const double s = sigmoid(x);
        return s * (1.0 - s);
    }
    case Activation::Identity: return 1.0;
    }
    return 0.0;
}

double act_second_deriv(Activation a, double x) {
    switch (a) {
    case Activation::ReLU: return 0.0;
    case Activation::Sigmoid: {
        const double s = sigmoid(x);
        return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
    case Activation::Identity: return 0.0;
    }
    return 0.0;
}

Matrix act_value(Activation a, const Matrix &x) {
    return map(x, [a](double v) { return act_value(a, v); });
}
Matrix act_deriv(Activation a, const Matrix &x) {
    return map(x, [a](double v) { return act_deriv(a, v); });
}
Matrix act_second_deriv(Activation a, const Matrix &x) {
    return map(x, [a](double v) { return act_second_deriv(a, v); });
}

Mlp::Mlp(const std::vector<std::size_t> &topology, const std::vector<Activation> &activations) {
    if (topology.size() < 2) throw std::invalid_argument("Mlp: topology needs >= 2 widths");
    if (activations.size() != topology.size() - 1)
        throw std::invalid_argument("Mlp: need one activation per layer");
    for (std::size_t w : topology)
        if (w == 0) throw std::invalid_argument("Mlp: zero-width layer");
    layers_.resize(topology.size() - 1);
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        layers_[l].weights = Matrix(topology[l + 1], topology[l]);
        layers_[l].bias.assign(topology[l + 1], 0.0);
        layers_[l].activation = activations[l];
    }
}

Mlp Mlp::init_random(const std::vector<std::size_t> &topology, Rng &rng) {
    std::vector<Activation> acts(topology.size() - 1, Activation::ReLU);
    acts.back() = Activation::Sigmoid;
    return init_random(topology, acts, rng);
}

Mlp Mlp::init_random(const std::vector<std::size_t> &topology,
                     const std::vector<Activation> &activations, Rng &rng) {
    Mlp net(topology, activations);
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        Layer &layer = net.layers_[l];
        const double fan_in = static_cast<double>(layer.weights.cols());
        const double fan_out = static_cast<double>(layer.weights.rows());
        const double bound = std::sqrt(6.0 / (fan_in + fan_out));
        for (double &w : layer.weights.data()) w = rng.uniform(-bound, bound);
    }
    return net;
}

std::size_t Mlp::input_width() const { return layers_.front().weights.cols(); }
std::size_t Mlp::output_width() const { return layers_.back().weights.rows(); }

std::vector<std::size_t> Mlp::topology() const {
    std::vector<std::size_t> t;
    t.push_back(input_width());
    for (const Layer &layer : layers_) t.push_back(layer.weights.rows());
    return t;
}

bool Mlp::all_finite() const {
    for (const Layer &layer : layers_) {
        if (!layer.weights.all_finite()) return false;
        for (double b : layer.bias)
            if (!std::isfinite(b)) return false;
    }
    return true;
}

Gradients Gradients::zeros_like(const Mlp &net) {
    Gradients g;
    g.dw.reserve(net.layer_count());
    g.db.reserve(net.layer_count());
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        g.dw.emplace_back(net.layer(l).weights.rows(), net.layer(l).weights.cols());
        g.db.emplace_back(net.layer(l).bias.size(), 0.0);
    }
    return g;
}

Gradients &Gradients::axpy(double alpha, const Gradients &other) {
    for (std::size_t l = 0; l < dw.size(); ++l) {
        if (!dw[l].same_shape(other.dw[l])) throw_shape_error("Gradients::axpy", dw[l], other.dw[l]);
        auto &d = dw[l].data();
        const auto &s = other.dw[l].data();
        for (std::size_t i = 0; i < d.size(); ++i) d[i] += alpha * s[i];
        for (std::size_t i = 0; i < db[l].size(); ++i) db[l][i] += alpha * other.db[l][i];
    }
    return *this;
}

double Gradients::max_abs() const {
    double m = 0.0;
    for (const Matrix &g : dw)
        for (double v : g.data()) m = std::max(m, std::fabs(v));
    for (const auto &b : db)
        for (double v : b) m = std::max(m, std::fabs(v));
    return m;
}

bool Gradients::all_finite() const {
    for (const Matrix &g : dw)
        if (!g.all_finite()) return false;
    for (const auto &b : db)
        for (double v : b)
            if (!std::isfinite(v)) return false;
    return true;
}

namespace {

void add_bias_rows(Matrix &x, const std::vector<double> &bias) {
    for (std::size_t r = 0; r < x.rows(); ++r) {
        double *row = x.row_ptr(r);
        for (std::size_t c = 0; c < x.cols(); ++c) row[c] += bias[c];
    }
}

std::vector<double> column_sums(const Matrix &m) {
    std::vector<double> s(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const double *row = m.row_ptr(r);
        for (std::size_t c = 0; c < m.cols(); ++c) s[c] += row[c];
    }
    return s;
}

void check_batch(const Mlp &net, const Matrix &batch) {
    if (batch.cols() != net.input_width())
        throw std::invalid_argument("forward: batch width " + std::to_string(batch.cols()) +
                                    " != input width " + std::to_string(net.input_width()));
}

} // namespace

ForwardTrace forward(const Mlp &net, const Matrix &batch) {
    check_batch(net, batch);
    ForwardTrace tr;
    tr.input = batch;
    const Matrix *a = &tr.input;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const Layer &layer = net.layer(l);
        Matrix x = matmul_nt(*a, layer.weights);
        add_bias_rows(x, layer.bias);
        tr.post.push_back(act_value(layer.activation, x));
        tr.pre.push_back(std::move(x));
        a = &tr.post.back();
    }
    return tr;
}

ForwardTrace forward(const Mlp &net, const Matrix &batch, const HardwareModel &hw, Rng &rng) {
    check_batch(net, batch);
    ForwardTrace tr;
    tr.approximate = true;
    tr.input = batch;
    const Matrix *a = &tr.input;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const Layer &layer = net.layer(l);
        Matrix x = approx_forward_linear(*a, layer.weights, hw, rng);
        add_bias_rows(x, layer.bias); // bias stays exact
        tr.post.push_back(act_value(layer.activation, x));
        tr.pre.push_back(std::move(x));
        a = &tr.post.back();
    }
    return tr;
}

double loss(const Matrix &outputs, const Matrix &targets) {
    if (!outputs.same_shape(targets)) throw_shape_error("loss", outputs, targets);
    if (outputs.empty()) throw std::invalid_argument("loss: empty batch");
    double sum = 0.0;
    const auto &o = outputs.data();
    const auto &t = targets.data();
    for (std::size_t i = 0; i < o.size(); ++i) {
        const double d = o[i] - t[i];
        sum += d * d;
    }
    return sum / static_cast<double>(o.size());
}

Gradients backward(const Mlp &net, const ForwardTrace &trace, const Matrix &targets) {
    const std::size_t L = net.layer_count();
    if (trace.pre.size() != L || trace.post.size() != L)
        throw std::invalid_argument("backward: trace does not match net");
    const Matrix &outputs = trace.outputs();
    if (!outputs.same_shape(targets)) throw_shape_error("backward", outputs, targets);

    Gradients grads = Gradients::zeros_like(net);
    // dE/dA^L for E = mean over batch and units of (o - t)^2.
    const double scl = 2.0 / static_cast<double>(outputs.size());
    Matrix grad_a = zip(outputs, targets, [scl](double o, double t) { return scl * (o - t); });

    for (std::size_t l = L; l-- > 0;) {
        const Layer &layer = net.layer(l);
        Matrix delta = hadamard(grad_a, act_deriv(layer.activation, trace.pre[l]));
        grads.db[l] = column_sums(delta); // bias is added exactly, no STE
        const Matrix &below = (l == 0) ? trace.input : trace.post[l - 1];
        if (trace.approximate) {
            Matrix clamped = ste_backward(delta);
            grads.dw[l] = matmul_tn(clamped, below);
            if (l > 0) grad_a = matmul(clamped, layer.weights);
        } else {
            grads.dw[l] = matmul_tn(delta, below);
            if (l > 0) grad_a = matmul(delta, layer.weights);
        }
    }
    return grads;
}

Gradients output_jacobian_row(const Mlp &net, const ForwardTrace &trace, std::size_t k) {
    const std::size_t L = net.layer_count();
    if (trace.pre.size() != L) throw std::invalid_argument("output_jacobian_row: stale trace");
    if (trace.approximate)
        throw std::invalid_argument("output_jacobian_row: requires an exact trace");
    if (k >= net.output_width())
        throw std::out_of_range("output_jacobian_row: k out of range");

    const std::size_t batch = trace.input.rows();
    const double inv_b = 1.0 / static_cast<double>(batch);
    Gradients grads = Gradients::zeros_like(net);

    // dO_k/dx^L is zero except in column k.
    Matrix g(batch, net.output_width());
    for (std::size_t b = 0; b < batch; ++b)
        g(b, k) = act_deriv(net.layer(L - 1).activation, trace.pre[L - 1](b, k));

    for (std::size_t l = L; l-- > 0;) {
        const Matrix &below = (l == 0) ? trace.input : trace.post[l - 1];
        grads.dw[l] = matmul_tn(g, below);
        grads.dw[l] *= inv_b;
        grads.db[l] = column_sums(g);
        for (double &v : grads.db[l]) v *= inv_b;
        if (l > 0)
            g = hadamard(matmul(g, net.layer(l).weights),
                         act_deriv(net.layer(l - 1).activation, trace.pre[l - 1]));
    }
    return grads;
}

void sgd_step(Mlp &net, const Gradients &grads, double eta) {
    if (grads.dw.size() != net.layer_count())
        throw std::invalid_argument("sgd_step: gradient/net layer count mismatch");
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        Layer &layer = net.layer(l);
        if (!layer.weights.same_shape(grads.dw[l]))
            throw_shape_error("sgd_step", layer.weights, grads.dw[l]);
        auto &w = layer.weights.data();
        const auto &g = grads.dw[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= eta * g[i];
        for (std::size_t i = 0; i < layer.bias.size(); ++i) layer.bias[i] -= eta * grads.db[l][i];
    }
}

std::size_t correct_count(const Matrix &outputs, const std::vector<int> &labels) {
    if (outputs.rows() != labels.size())
        throw std::invalid_argument("accuracy: row/label count mismatch");
    std::size_t hits = 0;
    for (std::size_t r = 0; r < outputs.rows(); ++r) {
        const double *row = outputs.row_ptr(r);
        std::size_t best = 0;
        if (outputs.cols() == 1) {
            best = row[0] > 0.5 ? 1 : 0; // single sigmoid unit encodes class 1
        } else {
            for (std::size_t c = 1; c < outputs.cols(); ++c)
                if (row[c] > row[best]) best = c;
        }
        if (static_cast<int>(best) == labels[r]) ++hits;
    }
    return hits;
}

double accuracy(const Matrix &outputs, const std::vector<int> &labels) {
    if (outputs.rows() == 0) return 0.0;
    return static_cast<double>(correct_count(outputs, labels)) /
           static_cast<double>(outputs.rows());
}

namespace {

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void save_checkpoint(const Mlp &net, const std::string &path, std::uint64_t seed) {
    if (!net.all_finite())
        throw std::runtime_error("save_checkpoint: refusing to write non-finite parameters");
    std::ofstream out(path);
    if (!out) throw IoError("save_checkpoint: cannot open " + path);

    out << "hwnn-checkpoint v1 topology=";
    const auto topo = net.topology();
    for (std::size_t i = 0; i < topo.size(); ++i) out << (i ? "," : "") << topo[i];
    out << " activations=";
    for (std::size_t l = 0; l < net.layer_count(); ++l)
        out << (l ? "," : "") << activation_name(net.layer(l).activation);
    out << " rng=" << Rng::algorithm << " seed=" << seed << "\n";

    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const auto &w = net.layer(l).weights.data();
        for (std::size_t i = 0; i < w.size(); ++i) out << (i ? " " : "") << format_double(w[i]);
        out << "\n";
    }
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const auto &b = net.layer(l).bias;
        for (std::size_t i = 0; i < b.size(); ++i) out << (i ? " " : "") << format_double(b[i]);
        out << "\n";
    }
    if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

namespace {

std::vector<std::string> split_string(const std::string &s, char delim) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, delim)) parts.push_back(item);
    return parts;
}

std::string header_field(const std::string &header, const std::string &key) {
    const std::string needle = key + "=";
    const auto pos = header.find(needle);
    if (pos == std::string::npos)
        throw IoError("checkpoint: missing header field " + key);
    const auto end = header.find(' ', pos);
    return header.substr(pos + needle.size(), end == std::string::npos ? end : end - pos - needle.size());
}

} // namespace

std::pair<FixedPointFormat, FixedPointFormat> calibrate_formats(const Mlp &net,
                                                                const Matrix &features,
                                                                int word_bits) {
    std::vector<double> weight_vals;
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        const auto &w = net.layer(l).weights.data();
        weight_vals.insert(weight_vals.end(), w.begin(), w.end());
    }
    const ForwardTrace tr = forward(net, features);
    std::vector<double> act_vals(features.data());
    for (const Matrix &a : tr.post) act_vals.insert(act_vals.end(), a.data().begin(), a.data().end());
    return {choose_format(weight_vals, word_bits), choose_format(act_vals, word_bits)};
}

Mlp load_checkpoint(const std::string &path, std::uint64_t *seed_out) {
    std::ifstream in(path);
    if (!in) throw IoError("load_checkpoint: cannot open " + path);
    std::string header;
    if (!std::getline(in, header) || header.rfind("hwnn-checkpoint v1 ", 0) != 0)
        throw IoError("load_checkpoint: bad header in " + path);

    std::vector<std::size_t> topo;
    for (const auto &tok : split_string(header_field(header, "topology"), ','))
        topo.push_back(std::stoul(tok));
    std::vector<Activation> acts;
    for (const auto &tok : split_string(header_field(header, "activations"), ','))
        acts.push_back(activation_from_name(tok));
    if (seed_out) *seed_out = std::stoull(header_field(header, "seed"));

    Mlp net(topo, acts);
    auto read_values = [&in, &path](std::size_t n, double *dst) {
        for (std::size_t i = 0; i < n; ++i)
            if (!(in >> dst[i])) throw IoError("load_checkpoint: truncated " + path);
    };
    for (std::size_t l = 0; l < net.layer_count(); ++l)
        read_values(net.layer(l).weights.size(), net.layer(l).weights.data().data());
    for (std::size_t l = 0; l < net.layer_count(); ++l)
        read_values(net.layer(l).bias.size(), net.layer(l).bias.data());
    return net;
}

} // namespace hwnn
