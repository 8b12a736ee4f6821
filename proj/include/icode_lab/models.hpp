#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "icode_lab/mat.hpp"
#include "icode_lab/nn.hpp"

namespace icode_lab {

// dx = sum_i f_i(x) + sum_j k_j(x) * u_j
struct IcodeModel {
    std::size_t n = 0, m = 0;
    std::vector<Mlp> f_nets;  // each n -> n
    std::vector<Mlp> k_nets;  // one per input channel, each n -> n
};

// dx = net(concat(t, x)); the input signal is left for the net to infer.
struct NodeModel {
    std::size_t n = 0, m = 0;
    Mlp net;  // n+1 -> n
};

// Augmented state h = (x, a) in R^{n+d_a}; dh = net(concat(t, h)); the
// augmentation head is produced by a one-hidden-layer init net.
struct AnodeModel {
    std::size_t n = 0, m = 0, d_a = 0;
    Mlp net;       // n+d_a+1 -> n+d_a
    Mlp init_net;  // n -> d_a (absent when d_a == 0)
};

// dx = drift(x) + reshape(control(x), n x m) * du/dt. The drift term is the
// column of the control path that multiplies the time channel (dt/dt = 1).
struct CdeModel {
    std::size_t n = 0, m = 0;
    Mlp drift_net;    // n -> n
    Mlp control_net;  // n -> n*m
};

using VectorFieldModel = std::variant<IcodeModel, NodeModel, AnodeModel, CdeModel>;

inline const char* model_kind(const VectorFieldModel& model) {
    struct V {
        const char* operator()(const IcodeModel&) const { return "icode"; }
        const char* operator()(const NodeModel&) const { return "node"; }
        const char* operator()(const AnodeModel&) const { return "anode"; }
        const char* operator()(const CdeModel&) const { return "cde"; }
    };
    return std::visit(V{}, model);
}

inline std::size_t state_dim(const VectorFieldModel& model) {
    struct V {
        std::size_t operator()(const IcodeModel& m) const { return m.n; }
        std::size_t operator()(const NodeModel& m) const { return m.n; }
        std::size_t operator()(const AnodeModel& m) const { return m.n; }
        std::size_t operator()(const CdeModel& m) const { return m.n; }
    };
    return std::visit(V{}, model);
}

inline std::size_t input_dim(const VectorFieldModel& model) {
    struct V {
        std::size_t operator()(const IcodeModel& m) const { return m.m; }
        std::size_t operator()(const NodeModel& m) const { return m.m; }
        std::size_t operator()(const AnodeModel& m) const { return m.m; }
        std::size_t operator()(const CdeModel& m) const { return m.m; }
    };
    return std::visit(V{}, model);
}

// Dimension the ODE actually integrates (n + d_a for the augmented model).
inline std::size_t ode_dim(const VectorFieldModel& model) {
    if (const auto* a = std::get_if<AnodeModel>(&model)) return a->n + a->d_a;
    return state_dim(model);
}

// Canonical net order: icode f_0..f_{M-1}, k_0..k_{m-1}; node [net];
// anode [net, init_net]; cde [drift, control]. Gradients use the same order.
inline std::vector<const Mlp*> model_nets(const VectorFieldModel& model) {
    std::vector<const Mlp*> out;
    if (const auto* ic = std::get_if<IcodeModel>(&model)) {
        for (const auto& f : ic->f_nets) out.push_back(&f);
        for (const auto& k : ic->k_nets) out.push_back(&k);
    } else if (const auto* nd = std::get_if<NodeModel>(&model)) {
        out.push_back(&nd->net);
    } else if (const auto* an = std::get_if<AnodeModel>(&model)) {
        out.push_back(&an->net);
        if (an->d_a > 0) out.push_back(&an->init_net);
    } else if (const auto* cd = std::get_if<CdeModel>(&model)) {
        out.push_back(&cd->drift_net);
        out.push_back(&cd->control_net);
    }
    return out;
}

inline std::vector<Mlp*> model_nets(VectorFieldModel& model) {
    std::vector<Mlp*> out;
    for (const Mlp* p : model_nets(static_cast<const VectorFieldModel&>(model)))
        out.push_back(const_cast<Mlp*>(p));
    return out;
}

inline std::size_t model_param_count(const VectorFieldModel& model) {
    std::size_t total = 0;
    for (const Mlp* net : model_nets(model)) total += net->param_count();
    return total;
}

struct ModelGrad {
    std::vector<MlpGrad> nets;

    static ModelGrad zeros_like(const VectorFieldModel& model) {
        ModelGrad g;
        for (const Mlp* net : model_nets(model)) g.nets.push_back(MlpGrad::zeros_like(*net));
        return g;
    }

    void set_zero() {
        for (auto& g : nets) g.set_zero();
    }
    void add_scaled(const ModelGrad& other, double s) {
        for (std::size_t i = 0; i < nets.size(); ++i) nets[i].add_scaled(other.nets[i], s);
    }
    void scale(double s) {
        for (auto& g : nets) g.scale(s);
    }
};

struct ModelWorkspace {
    MlpWorkspace mlp;
    Vec in, out, cot, in_cot;
};

// ---- forward evaluations ----

inline void icode_rhs(const IcodeModel& model, const double* x, const double* u, double* dx,
                      ModelWorkspace& ws) {
    const std::size_t n = model.n;
    ws.in.assign(x, x + n);
    for (std::size_t i = 0; i < n; ++i) dx[i] = 0.0;
    for (const auto& f : model.f_nets) {
        detail::forward_into_ws(f, ws.in.data(), ws.mlp);
        for (std::size_t i = 0; i < n; ++i) dx[i] += ws.mlp.act.back()[i];
    }
    for (std::size_t j = 0; j < model.m; ++j) {
        detail::forward_into_ws(model.k_nets[j], ws.in.data(), ws.mlp);
        for (std::size_t i = 0; i < n; ++i) dx[i] += ws.mlp.act.back()[i] * u[j];
    }
}

inline void node_rhs(const NodeModel& model, double t, const double* x, double* dx,
                     ModelWorkspace& ws) {
    ws.in.resize(model.n + 1);
    ws.in[0] = t;
    std::copy(x, x + model.n, ws.in.begin() + 1);
    detail::forward_into_ws(model.net, ws.in.data(), ws.mlp);
    std::copy(ws.mlp.act.back().begin(), ws.mlp.act.back().end(), dx);
}

inline void anode_rhs(const AnodeModel& model, double t, const double* h, double* dh,
                      ModelWorkspace& ws) {
    const std::size_t dim = model.n + model.d_a;
    ws.in.resize(dim + 1);
    ws.in[0] = t;
    std::copy(h, h + dim, ws.in.begin() + 1);
    detail::forward_into_ws(model.net, ws.in.data(), ws.mlp);
    std::copy(ws.mlp.act.back().begin(), ws.mlp.act.back().end(), dh);
}

inline Vec anode_init(const AnodeModel& model, const Vec& x0) {
    if (x0.size() != model.n) throw std::invalid_argument("anode_init: dim mismatch");
    Vec h0 = x0;
    if (model.d_a > 0) {
        Vec tail = mlp_forward(model.init_net, x0);
        h0.insert(h0.end(), tail.begin(), tail.end());
    }
    return h0;
}

inline void cde_rhs(const CdeModel& model, const double* x, const double* du_dt, double* dx,
                    ModelWorkspace& ws) {
    const std::size_t n = model.n, m = model.m;
    ws.in.assign(x, x + n);
    detail::forward_into_ws(model.drift_net, ws.in.data(), ws.mlp);
    std::copy(ws.mlp.act.back().begin(), ws.mlp.act.back().end(), dx);
    detail::forward_into_ws(model.control_net, ws.in.data(), ws.mlp);
    const Vec& flat = ws.mlp.act.back();
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < m; ++j) acc += flat[i * m + j] * du_dt[j];
        dx[i] += acc;
    }
}

// Unified rhs on the ODE state h (augmented for anode). `u` and `du_dt` are
// both supplied; each family consumes what its equations use.
inline void model_rhs(const VectorFieldModel& model, double t, const double* h, const double* u,
                      const double* du_dt, double* dh, ModelWorkspace& ws) {
    if (const auto* ic = std::get_if<IcodeModel>(&model)) {
        icode_rhs(*ic, h, u, dh, ws);
    } else if (const auto* nd = std::get_if<NodeModel>(&model)) {
        node_rhs(*nd, t, h, dh, ws);
    } else if (const auto* an = std::get_if<AnodeModel>(&model)) {
        anode_rhs(*an, t, h, dh, ws);
    } else {
        cde_rhs(*std::get_if<CdeModel>(&model), h, du_dt, dh, ws);
    }
}

// Reverse-mode step for one rhs evaluation: accumulates parameter cotangents
// into `grads` (canonical net order; the anode init net entry is untouched
// here) and adds the state cotangent into h_cot.
inline void model_rhs_vjp(const VectorFieldModel& model, double t, const double* h,
                          const double* u, const double* du_dt, const double* r, ModelGrad& grads,
                          double* h_cot, ModelWorkspace& ws) {
    if (const auto* ic = std::get_if<IcodeModel>(&model)) {
        const std::size_t n = ic->n;
        ws.in.assign(h, h + n);
        for (std::size_t i = 0; i < ic->f_nets.size(); ++i) {
            ws.cot.assign(r, r + n);
            mlp_vjp_acc(ic->f_nets[i], ws.in, ws.cot, grads.nets[i], ws.in_cot, ws.mlp);
            for (std::size_t q = 0; q < n; ++q) h_cot[q] += ws.in_cot[q];
        }
        for (std::size_t j = 0; j < ic->m; ++j) {
            ws.cot.resize(n);
            for (std::size_t q = 0; q < n; ++q) ws.cot[q] = r[q] * u[j];
            mlp_vjp_acc(ic->k_nets[j], ws.in, ws.cot, grads.nets[ic->f_nets.size() + j], ws.in_cot,
                        ws.mlp);
            for (std::size_t q = 0; q < n; ++q) h_cot[q] += ws.in_cot[q];
        }
    } else if (const auto* nd = std::get_if<NodeModel>(&model)) {
        const std::size_t n = nd->n;
        ws.in.resize(n + 1);
        ws.in[0] = t;
        std::copy(h, h + n, ws.in.begin() + 1);
        ws.cot.assign(r, r + n);
        mlp_vjp_acc(nd->net, ws.in, ws.cot, grads.nets[0], ws.in_cot, ws.mlp);
        for (std::size_t q = 0; q < n; ++q) h_cot[q] += ws.in_cot[q + 1];
    } else if (const auto* an = std::get_if<AnodeModel>(&model)) {
        const std::size_t dim = an->n + an->d_a;
        ws.in.resize(dim + 1);
        ws.in[0] = t;
        std::copy(h, h + dim, ws.in.begin() + 1);
        ws.cot.assign(r, r + dim);
        mlp_vjp_acc(an->net, ws.in, ws.cot, grads.nets[0], ws.in_cot, ws.mlp);
        for (std::size_t q = 0; q < dim; ++q) h_cot[q] += ws.in_cot[q + 1];
    } else {
        const auto* cd = std::get_if<CdeModel>(&model);
        const std::size_t n = cd->n, m = cd->m;
        ws.in.assign(h, h + n);
        ws.cot.assign(r, r + n);
        mlp_vjp_acc(cd->drift_net, ws.in, ws.cot, grads.nets[0], ws.in_cot, ws.mlp);
        for (std::size_t q = 0; q < n; ++q) h_cot[q] += ws.in_cot[q];
        ws.cot.resize(n * m);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < m; ++j) ws.cot[i * m + j] = r[i] * du_dt[j];
        mlp_vjp_acc(cd->control_net, ws.in, ws.cot, grads.nets[1], ws.in_cot, ws.mlp);
        for (std::size_t q = 0; q < n; ++q) h_cot[q] += ws.in_cot[q];
    }
}

// ---- construction ----

struct ModelConfig {
    std::string kind = "icode";
    std::size_t n = 0, m = 0;
    std::size_t M = 1;    // icode subnetwork count
    std::size_t d_a = 0;  // anode augmentation
    std::size_t width = 60;
    std::size_t hidden_layers = 3;
    bool bias = true;
};

inline VectorFieldModel make_model(const ModelConfig& cfg, Rng& rng) {
    if (cfg.n == 0) throw std::invalid_argument("make_model: n must be positive");
    if (cfg.kind == "icode") {
        if (cfg.M == 0) throw std::invalid_argument("make_model: icode needs M >= 1");
        IcodeModel m;
        m.n = cfg.n;
        m.m = cfg.m;
        for (std::size_t i = 0; i < cfg.M; ++i)
            m.f_nets.push_back(make_mlp(cfg.n, cfg.n, cfg.width, cfg.hidden_layers, cfg.bias, rng));
        for (std::size_t j = 0; j < cfg.m; ++j)
            m.k_nets.push_back(make_mlp(cfg.n, cfg.n, cfg.width, cfg.hidden_layers, cfg.bias, rng));
        return m;
    }
    if (cfg.kind == "node") {
        NodeModel m;
        m.n = cfg.n;
        m.m = cfg.m;
        m.net = make_mlp(cfg.n + 1, cfg.n, cfg.width, cfg.hidden_layers, cfg.bias, rng);
        return m;
    }
    if (cfg.kind == "anode") {
        AnodeModel m;
        m.n = cfg.n;
        m.m = cfg.m;
        m.d_a = cfg.d_a;
        const std::size_t dim = cfg.n + cfg.d_a;
        m.net = make_mlp(dim + 1, dim, cfg.width, cfg.hidden_layers, cfg.bias, rng);
        if (cfg.d_a > 0) m.init_net = make_mlp(cfg.n, cfg.d_a, cfg.width, 1, cfg.bias, rng);
        return m;
    }
    if (cfg.kind == "cde") {
        CdeModel m;
        m.n = cfg.n;
        m.m = cfg.m;
        m.drift_net = make_mlp(cfg.n, cfg.n, cfg.width, cfg.hidden_layers, cfg.bias, rng);
        m.control_net = make_mlp(cfg.n, cfg.n * cfg.m, cfg.width, cfg.hidden_layers, cfg.bias, rng);
        return m;
    }
    throw std::invalid_argument("make_model: unknown kind '" + cfg.kind + "'");
}

// ---- bundle serialization ----

inline nlohmann::json model_to_json(const VectorFieldModel& model) {
    nlohmann::json j;
    j["kind"] = model_kind(model);
    j["n"] = state_dim(model);
    j["m"] = input_dim(model);
    j["d_a"] = 0;
    nlohmann::json nets;
    if (const auto* ic = std::get_if<IcodeModel>(&model)) {
        nets["f"] = nlohmann::json::array();
        for (const auto& f : ic->f_nets) nets["f"].push_back(mlp_to_json(f));
        nets["k"] = nlohmann::json::array();
        for (const auto& k : ic->k_nets) nets["k"].push_back(mlp_to_json(k));
    } else if (const auto* nd = std::get_if<NodeModel>(&model)) {
        nets["net"] = mlp_to_json(nd->net);
    } else if (const auto* an = std::get_if<AnodeModel>(&model)) {
        j["d_a"] = an->d_a;
        nets["net"] = mlp_to_json(an->net);
        if (an->d_a > 0) nets["init"] = mlp_to_json(an->init_net);
    } else if (const auto* cd = std::get_if<CdeModel>(&model)) {
        nets["drift"] = mlp_to_json(cd->drift_net);
        nets["control"] = mlp_to_json(cd->control_net);
    }
    j["nets"] = std::move(nets);
    return j;
}

inline VectorFieldModel model_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    const std::size_t n = j.at("n").get<std::size_t>();
    const std::size_t m = j.at("m").get<std::size_t>();
    const auto& nets = j.at("nets");
    if (kind == "icode") {
        IcodeModel mo;
        mo.n = n;
        mo.m = m;
        for (const auto& f : nets.at("f")) mo.f_nets.push_back(mlp_from_json(f));
        for (const auto& k : nets.at("k")) mo.k_nets.push_back(mlp_from_json(k));
        if (mo.f_nets.empty() || mo.k_nets.size() != m)
            throw std::runtime_error("model_from_json: icode net counts inconsistent");
        return mo;
    }
    if (kind == "node") {
        NodeModel mo;
        mo.n = n;
        mo.m = m;
        mo.net = mlp_from_json(nets.at("net"));
        return mo;
    }
    if (kind == "anode") {
        AnodeModel mo;
        mo.n = n;
        mo.m = m;
        mo.d_a = j.at("d_a").get<std::size_t>();
        mo.net = mlp_from_json(nets.at("net"));
        if (mo.d_a > 0) mo.init_net = mlp_from_json(nets.at("init"));
        return mo;
    }
    if (kind == "cde") {
        CdeModel mo;
        mo.n = n;
        mo.m = m;
        mo.drift_net = mlp_from_json(nets.at("drift"));
        mo.control_net = mlp_from_json(nets.at("control"));
        if (mo.control_net.out_dim() != n * m)
            throw std::runtime_error("model_from_json: control net output must be n*m");
        return mo;
    }
    throw std::runtime_error("model_from_json: unknown kind '" + kind + "'");
}

// Per-net Adam, canonical net order.
struct ModelAdam {
    std::vector<AdamState> states;

    static ModelAdam init(const VectorFieldModel& model, AdamParams hp) {
        ModelAdam a;
        for (const Mlp* net : model_nets(model)) a.states.push_back(AdamState::init(*net, hp));
        return a;
    }
};

inline void model_adam_step(ModelAdam& adam, VectorFieldModel& model, const ModelGrad& grads) {
    auto nets = model_nets(model);
    if (adam.states.size() != nets.size() || grads.nets.size() != nets.size())
        throw std::invalid_argument("model_adam_step: shape mismatch");
    for (std::size_t i = 0; i < nets.size(); ++i)
        adam_step(adam.states[i], *nets[i], grads.nets[i]);
}

}  // namespace icode_lab
