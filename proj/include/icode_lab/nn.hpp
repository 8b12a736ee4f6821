#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "icode_lab/mat.hpp"
#include "icode_lab/rng.hpp"

namespace icode_lab {

// Overflow-safe softplus: max(x,0) + log1p(exp(-|x|)).
inline double softplus(double x) { return std::fmax(x, 0.0) + std::log1p(std::exp(-std::fabs(x))); }

// d softplus / dx
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

struct DenseLayer {
    Matrix w;
    Vec b;  // empty when the layer has no bias

    std::size_t in_dim() const { return w.cols; }
    std::size_t out_dim() const { return w.rows; }
    bool has_bias() const { return !b.empty(); }
};

// Stack of dense layers, softplus after every layer except the last.
struct Mlp {
    std::vector<DenseLayer> layers;

    std::size_t in_dim() const { return layers.front().in_dim(); }
    std::size_t out_dim() const { return layers.back().out_dim(); }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.w.data.size() + l.b.size();
        return n;
    }

    void validate() const {
        if (layers.empty()) throw std::invalid_argument("Mlp: needs at least one layer");
        for (std::size_t l = 0; l + 1 < layers.size(); ++l)
            if (layers[l].out_dim() != layers[l + 1].in_dim())
                throw std::invalid_argument("Mlp: layer dimension chain broken at layer " +
                                            std::to_string(l));
        for (const auto& l : layers) {
            if (!all_finite(l.w.data) || !all_finite(l.b))
                throw std::invalid_argument("Mlp: non-finite parameter");
            if (!l.b.empty() && l.b.size() != l.out_dim())
                throw std::invalid_argument("Mlp: bias length mismatch");
        }
    }
};

// Gradient of a scalar w.r.t. every Mlp parameter; shape-congruent by construction.
struct MlpGrad {
    std::vector<DenseLayer> layers;

    static MlpGrad zeros_like(const Mlp& net) {
        MlpGrad g;
        g.layers.reserve(net.layers.size());
        for (const auto& l : net.layers) {
            DenseLayer gl;
            gl.w = Matrix(l.w.rows, l.w.cols);
            gl.b = Vec(l.b.size(), 0.0);
            g.layers.push_back(std::move(gl));
        }
        return g;
    }

    void set_zero() {
        for (auto& l : layers) {
            std::fill(l.w.data.begin(), l.w.data.end(), 0.0);
            std::fill(l.b.begin(), l.b.end(), 0.0);
        }
    }

    void add_scaled(const MlpGrad& other, double s) {
        for (std::size_t l = 0; l < layers.size(); ++l) {
            axpy(s, other.layers[l].w.data, layers[l].w.data);
            axpy(s, other.layers[l].b, layers[l].b);
        }
    }

    void scale(double s) {
        for (auto& l : layers) {
            for (double& x : l.w.data) x *= s;
            for (double& x : l.b) x *= s;
        }
    }
};

// Reusable buffers for forward/backward passes; sized on first use.
struct MlpWorkspace {
    std::vector<Vec> act;  // act[0] = input, act[l+1] = output of layer l
    std::vector<Vec> pre;  // pre[l]  = pre-activation of layer l
    Vec delta, delta_next;

    void resize_for(const Mlp& net) {
        const std::size_t L = net.layers.size();
        act.resize(L + 1);
        pre.resize(L);
        act[0].resize(net.in_dim());
        for (std::size_t l = 0; l < L; ++l) {
            pre[l].resize(net.layers[l].out_dim());
            act[l + 1].resize(net.layers[l].out_dim());
        }
        delta.resize(net.out_dim());
    }
};

namespace detail {

inline void forward_into_ws(const Mlp& net, const double* x, MlpWorkspace& ws) {
    ws.resize_for(net);
    std::copy(x, x + net.in_dim(), ws.act[0].begin());
    const std::size_t L = net.layers.size();
    for (std::size_t l = 0; l < L; ++l) {
        const DenseLayer& layer = net.layers[l];
        matvec(layer.w, ws.act[l].data(), ws.pre[l].data());
        if (layer.has_bias())
            for (std::size_t i = 0; i < layer.out_dim(); ++i) ws.pre[l][i] += layer.b[i];
        if (l + 1 < L) {
            for (std::size_t i = 0; i < layer.out_dim(); ++i) ws.act[l + 1][i] = softplus(ws.pre[l][i]);
        } else {
            ws.act[l + 1] = ws.pre[l];  // final layer stays affine
        }
    }
}

// Backward sweep from a finished forward pass. `grads` may be null when only
// the input gradient is wanted (jacobian rows take that path, so rows match
// mlp_vjp bitwise).
inline void backward_from_ws(const Mlp& net, MlpWorkspace& ws, const double* cotangent,
                             MlpGrad* grads, double* x_cot) {
    const std::size_t L = net.layers.size();
    ws.delta.assign(cotangent, cotangent + net.out_dim());
    for (std::size_t li = L; li-- > 0;) {
        const DenseLayer& layer = net.layers[li];
        if (grads) {
            DenseLayer& g = grads->layers[li];
            outer_acc(g.w, ws.delta.data(), ws.act[li].data());
            if (layer.has_bias())
                for (std::size_t i = 0; i < layer.out_dim(); ++i) g.b[i] += ws.delta[i];
        }
        ws.delta_next.assign(layer.in_dim(), 0.0);
        matvec_transpose_acc(layer.w, ws.delta.data(), ws.delta_next.data());
        if (li > 0) {
            for (std::size_t i = 0; i < layer.in_dim(); ++i)
                ws.delta_next[i] *= sigmoid(ws.pre[li - 1][i]);
        }
        ws.delta.swap(ws.delta_next);
    }
    for (std::size_t i = 0; i < net.in_dim(); ++i) x_cot[i] = ws.delta[i];
}

}  // namespace detail

inline Vec mlp_forward(const Mlp& net, const Vec& x, MlpWorkspace& ws) {
    if (x.size() != net.in_dim()) throw std::invalid_argument("mlp_forward: input dim mismatch");
    detail::forward_into_ws(net, x.data(), ws);
    return ws.act.back();
}

inline Vec mlp_forward(const Mlp& net, const Vec& x) {
    MlpWorkspace ws;
    return mlp_forward(net, x, ws);
}

// (d<cot, f(x)>/dparams accumulated into `grads`, d<cot, f(x)>/dx written to x_cot)
inline void mlp_vjp_acc(const Mlp& net, const Vec& x, const Vec& cotangent, MlpGrad& grads,
                        Vec& x_cot, MlpWorkspace& ws) {
    if (x.size() != net.in_dim()) throw std::invalid_argument("mlp_vjp: input dim mismatch");
    if (cotangent.size() != net.out_dim())
        throw std::invalid_argument("mlp_vjp: cotangent dim mismatch");
    detail::forward_into_ws(net, x.data(), ws);
    x_cot.resize(net.in_dim());
    detail::backward_from_ws(net, ws, cotangent.data(), &grads, x_cot.data());
}

inline std::pair<MlpGrad, Vec> mlp_vjp(const Mlp& net, const Vec& x, const Vec& cotangent) {
    MlpGrad g = MlpGrad::zeros_like(net);
    Vec x_cot;
    MlpWorkspace ws;
    mlp_vjp_acc(net, x, cotangent, g, x_cot, ws);
    return {std::move(g), std::move(x_cot)};
}

// Row i = input gradient of output coordinate i (basis-cotangent VJPs).
inline Matrix mlp_input_jacobian(const Mlp& net, const Vec& x, MlpWorkspace& ws) {
    if (x.size() != net.in_dim())
        throw std::invalid_argument("mlp_input_jacobian: input dim mismatch");
    detail::forward_into_ws(net, x.data(), ws);
    Matrix jac(net.out_dim(), net.in_dim());
    Vec basis(net.out_dim(), 0.0);
    for (std::size_t i = 0; i < net.out_dim(); ++i) {
        basis[i] = 1.0;
        detail::backward_from_ws(net, ws, basis.data(), nullptr, &jac(i, 0));
        basis[i] = 0.0;
    }
    return jac;
}

inline Matrix mlp_input_jacobian(const Mlp& net, const Vec& x) {
    MlpWorkspace ws;
    return mlp_input_jacobian(net, x, ws);
}

// Uniform [-a, a] with a = sqrt(1/fan_in). hidden_layers = 0 gives a single
// affine map.
inline Mlp make_mlp(std::size_t in, std::size_t out, std::size_t width, std::size_t hidden_layers,
                    bool bias, Rng& rng) {
    std::vector<std::size_t> dims;
    dims.push_back(in);
    for (std::size_t l = 0; l < hidden_layers; ++l) dims.push_back(width);
    dims.push_back(out);
    Mlp net;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        DenseLayer layer;
        layer.w = Matrix(dims[l + 1], dims[l]);
        const double a = std::sqrt(1.0 / static_cast<double>(dims[l]));
        for (double& v : layer.w.data) v = rng.uniform(-a, a);
        if (bias) layer.b.assign(dims[l + 1], 0.0);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

struct AdamParams {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    AdamParams hp;
    long step = 0;
    MlpGrad m, v;

    static AdamState init(const Mlp& net, AdamParams hp) {
        AdamState s;
        s.hp = hp;
        s.m = MlpGrad::zeros_like(net);
        s.v = MlpGrad::zeros_like(net);
        return s;
    }
};

namespace detail {
inline void adam_update_span(double* p, double* m, double* v, const double* g, std::size_t n,
                             const AdamParams& hp, double c1, double c2) {
    for (std::size_t i = 0; i < n; ++i) {
        m[i] = hp.beta1 * m[i] + (1.0 - hp.beta1) * g[i];
        v[i] = hp.beta2 * v[i] + (1.0 - hp.beta2) * g[i] * g[i];
        const double mhat = m[i] / c1;
        const double vhat = v[i] / c2;
        p[i] -= hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
    }
}
}  // namespace detail

// Standard bias-corrected Adam, in place.
inline void adam_step(AdamState& state, Mlp& net, const MlpGrad& grads) {
    if (grads.layers.size() != net.layers.size())
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    state.step += 1;
    const double c1 = 1.0 - std::pow(state.hp.beta1, static_cast<double>(state.step));
    const double c2 = 1.0 - std::pow(state.hp.beta2, static_cast<double>(state.step));
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& layer = net.layers[l];
        if (grads.layers[l].w.data.size() != layer.w.data.size() ||
            grads.layers[l].b.size() != layer.b.size())
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        detail::adam_update_span(layer.w.data.data(), state.m.layers[l].w.data.data(),
                                 state.v.layers[l].w.data.data(), grads.layers[l].w.data.data(),
                                 layer.w.data.size(), state.hp, c1, c2);
        detail::adam_update_span(layer.b.data(), state.m.layers[l].b.data(),
                                 state.v.layers[l].b.data(), grads.layers[l].b.data(),
                                 layer.b.size(), state.hp, c1, c2);
    }
}

// JSON layout: {"layers":[{"w":[[...]],"b":[...]}], "activation":"softplus"}.
// nlohmann emits shortest round-trip decimals, so the round trip is value-exact.
inline nlohmann::json mlp_to_json(const Mlp& net) {
    nlohmann::json j;
    j["activation"] = "softplus";
    j["layers"] = nlohmann::json::array();
    for (const auto& layer : net.layers) {
        nlohmann::json jl;
        auto& w = jl["w"] = nlohmann::json::array();
        for (std::size_t i = 0; i < layer.w.rows; ++i) {
            nlohmann::json row = nlohmann::json::array();
            for (std::size_t k = 0; k < layer.w.cols; ++k) row.push_back(layer.w(i, k));
            w.push_back(std::move(row));
        }
        jl["b"] = layer.b;
        j["layers"].push_back(std::move(jl));
    }
    return j;
}

inline Mlp mlp_from_json(const nlohmann::json& j) {
    if (j.at("activation").get<std::string>() != "softplus")
        throw std::runtime_error("mlp_from_json: unsupported activation");
    Mlp net;
    for (const auto& jl : j.at("layers")) {
        DenseLayer layer;
        const auto& w = jl.at("w");
        layer.w = Matrix(w.size(), w.empty() ? 0 : w[0].size());
        for (std::size_t i = 0; i < layer.w.rows; ++i) {
            if (w[i].size() != layer.w.cols) throw std::runtime_error("mlp_from_json: ragged weight rows");
            for (std::size_t k = 0; k < layer.w.cols; ++k) layer.w(i, k) = w[i][k].get<double>();
        }
        layer.b = jl.value("b", Vec{});
        net.layers.push_back(std::move(layer));
    }
    net.validate();
    return net;
}

}  // namespace icode_lab
