#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "icode_lab/models.hpp"
#include "icode_lab/rng.hpp"

using namespace icode_lab;

namespace {

VectorFieldModel build(const std::string& kind, std::size_t n, std::size_t m, std::uint64_t seed,
                       std::size_t d_a = 2, std::size_t M = 1) {
    ModelConfig cfg;
    cfg.kind = kind;
    cfg.n = n;
    cfg.m = m;
    cfg.M = M;
    cfg.d_a = d_a;
    cfg.width = 6;
    cfg.hidden_layers = 2;
    Rng rng(seed, stream::weights);
    return make_model(cfg, rng);
}

Vec eval_rhs(const VectorFieldModel& model, double t, const Vec& h, const Vec& u,
             const Vec& du_dt) {
    ModelWorkspace ws;
    Vec dh(ode_dim(model));
    model_rhs(model, t, h.data(), u.data(), du_dt.data(), dh.data(), ws);
    return dh;
}

}  // namespace

TEST_CASE("parameter counts follow the layer shapes") {
    const std::size_t w = 6, n = 3, m = 2;
    const std::size_t body = (w * n + w) + (w * w + w);  // two hidden layers
    const std::size_t head = n * w + n;
    const std::size_t per_net = body + head;
    CHECK(model_param_count(build("icode", n, m, 1)) == (1 + m) * per_net);
    // node consumes (t, x)
    const std::size_t node_body = (w * (n + 1) + w) + (w * w + w);
    CHECK(model_param_count(build("node", n, m, 1)) == node_body + head);
    // cde: drift n->n plus control n -> n*m
    const std::size_t control_head = (n * m) * w + n * m;
    CHECK(model_param_count(build("cde", n, m, 1)) == 2 * body + head + control_head);
}

TEST_CASE("icode rhs is affine in the input channels") {
    const std::size_t n = 3, m = 2;
    const VectorFieldModel model = build("icode", n, m, 21);
    Rng rng(3, stream::scan);
    Vec x(n), u1(m), u2(m), du(m, 0.0);
    for (auto& v : x) v = rng.uniform(-1, 1);
    for (auto& v : u1) v = rng.uniform(-1, 1);
    for (auto& v : u2) v = rng.uniform(-1, 1);

    const Vec f0 = eval_rhs(model, 0.0, x, Vec(m, 0.0), du);
    const Vec a = eval_rhs(model, 0.0, x, u1, du);
    const Vec b = eval_rhs(model, 0.0, x, u2, du);
    Vec u12(m);
    for (std::size_t j = 0; j < m; ++j) u12[j] = u1[j] + u2[j];
    const Vec ab = eval_rhs(model, 0.0, x, u12, du);
    for (std::size_t i = 0; i < n; ++i)
        CHECK(ab[i] - f0[i] == Catch::Approx((a[i] - f0[i]) + (b[i] - f0[i])).margin(1e-13));

    // doubling one channel doubles its contribution
    Vec u2x = u1;
    u2x[0] *= 2.0;
    const Vec c = eval_rhs(model, 0.0, x, u2x, du);
    Vec only0 = Vec(m, 0.0);
    only0[0] = u1[0];
    const Vec d = eval_rhs(model, 0.0, x, only0, du);
    CHECK(c[0] - a[0] == Catch::Approx(d[0] - f0[0]).margin(1e-13));
}

TEST_CASE("node and anode put time first in the net input") {
    const std::size_t n = 2, m = 1;
    const VectorFieldModel model = build("node", n, m, 5);
    const auto& nd = std::get<NodeModel>(model);
    const double t = 0.37;
    Vec x{0.4, -0.9};
    const Vec direct = mlp_forward(nd.net, Vec{t, x[0], x[1]});
    const Vec via = eval_rhs(model, t, x, Vec{0.0}, Vec{0.0});
    CHECK(via == direct);

    const VectorFieldModel am = build("anode", n, m, 6, 3);
    const auto& an = std::get<AnodeModel>(am);
    CHECK(ode_dim(am) == n + 3);
    const Vec h0 = anode_init(an, x);
    REQUIRE(h0.size() == n + 3);
    CHECK(h0[0] == x[0]);
    CHECK(h0[1] == x[1]);
    const Vec aug = mlp_forward(an.init_net, x);
    for (std::size_t i = 0; i < 3; ++i) CHECK(h0[n + i] == aug[i]);
    // init net has exactly one hidden layer
    CHECK(an.init_net.layers.size() == 2);
}

TEST_CASE("cde rhs equals drift plus control matrix times input rate") {
    const std::size_t n = 3, m = 2;
    const VectorFieldModel model = build("cde", n, m, 8);
    const auto& cd = std::get<CdeModel>(model);
    Rng rng(4, stream::scan);
    Vec x(n), du(m);
    for (auto& v : x) v = rng.uniform(-1, 1);
    for (auto& v : du) v = rng.uniform(-2, 2);
    const Vec drift = mlp_forward(cd.drift_net, x);
    const Vec flat = mlp_forward(cd.control_net, x);
    Vec expect(n);
    for (std::size_t i = 0; i < n; ++i) {
        expect[i] = drift[i];
        for (std::size_t j = 0; j < m; ++j) expect[i] += flat[i * m + j] * du[j];
    }
    const Vec got = eval_rhs(model, 0.0, x, Vec(m, 0.0), du);
    for (std::size_t i = 0; i < n; ++i) CHECK(got[i] == Catch::Approx(expect[i]).epsilon(1e-14));
}

TEST_CASE("rhs vjp matches finite differences for every kind") {
    Rng data_rng(17, stream::scan);
    for (const std::string kind : {"icode", "node", "anode", "cde"}) {
        VectorFieldModel model = build(kind, 2, 2, 31, 2);
        const std::size_t dim = ode_dim(model);
        const double t = 0.3;
        Vec h(dim), u{0.7, -0.4}, du{1.5, 0.25}, r(dim);
        for (auto& v : h) v = data_rng.uniform(-1, 1);
        for (auto& v : r) v = data_rng.uniform(-1, 1);

        ModelGrad grads = ModelGrad::zeros_like(model);
        Vec h_cot(dim, 0.0);
        ModelWorkspace ws;
        model_rhs_vjp(model, t, h.data(), u.data(), du.data(), r.data(), grads, h_cot.data(), ws);

        auto scalar = [&](const VectorFieldModel& mm) {
            Vec dh(dim);
            ModelWorkspace w2;
            model_rhs(mm, t, h.data(), u.data(), du.data(), dh.data(), w2);
            double s = 0.0;
            for (std::size_t i = 0; i < dim; ++i) s += r[i] * dh[i];
            return s;
        };

        const double step = 1e-6;
        std::vector<Mlp*> nets = model_nets(model);
        // anode's trailing init net is not part of a single rhs evaluation
        const std::size_t active = kind == "anode" ? 1 : nets.size();
        for (std::size_t ni = 0; ni < active; ++ni) {
            auto& w = nets[ni]->layers[0].w;
            for (std::size_t k = 0; k < w.data.size(); k += 5) {
                const double keep = w.data[k];
                w.data[k] = keep + step;
                const double up = scalar(model);
                w.data[k] = keep - step;
                const double dn = scalar(model);
                w.data[k] = keep;
                const double fd = (up - dn) / (2 * step);
                CHECK_THAT(grads.nets[ni].layers[0].w.data[k],
                           Catch::Matchers::WithinRel(fd, 1e-4) ||
                               Catch::Matchers::WithinAbs(fd, 1e-9));
            }
        }
        for (std::size_t k = 0; k < dim; ++k) {
            const double keep = h[k];
            h[k] = keep + step;
            const double up = scalar(model);
            h[k] = keep - step;
            const double dn = scalar(model);
            h[k] = keep;
            const double fd = (up - dn) / (2 * step);
            CHECK_THAT(h_cot[k], Catch::Matchers::WithinRel(fd, 1e-4) ||
                                     Catch::Matchers::WithinAbs(fd, 1e-9));
        }
    }
}

TEST_CASE("bundle json round trip") {
    for (const std::string kind : {"icode", "node", "anode", "cde"}) {
        const VectorFieldModel model = build(kind, 3, 2, 77, 4, kind == "icode" ? 2 : 1);
        const nlohmann::json j = model_to_json(model);
        CHECK(j.at("kind").get<std::string>() == kind);
        CHECK(j.at("n").get<std::size_t>() == 3);
        CHECK(j.at("m").get<std::size_t>() == 2);
        const VectorFieldModel back = model_from_json(nlohmann::json::parse(j.dump()));
        CHECK(model_kind(back) == std::string(kind));
        const auto orig_nets = model_nets(model);
        const auto back_nets = model_nets(back);
        REQUIRE(orig_nets.size() == back_nets.size());
        for (std::size_t i = 0; i < orig_nets.size(); ++i)
            for (std::size_t l = 0; l < orig_nets[i]->layers.size(); ++l) {
                CHECK(back_nets[i]->layers[l].w.data == orig_nets[i]->layers[l].w.data);
                CHECK(back_nets[i]->layers[l].b == orig_nets[i]->layers[l].b);
            }
    }
    CHECK_THROWS(model_from_json(nlohmann::json{{"kind", "mystery"}}));
}

TEST_CASE("model adam moves parameters and is deterministic") {
    VectorFieldModel m1 = build("icode", 2, 1, 3);
    VectorFieldModel m2 = build("icode", 2, 1, 3);
    ModelAdam a1 = ModelAdam::init(m1, AdamParams{1e-2, 0.9, 0.999, 1e-8});
    ModelAdam a2 = ModelAdam::init(m2, AdamParams{1e-2, 0.9, 0.999, 1e-8});
    ModelGrad g = ModelGrad::zeros_like(m1);
    for (auto& net : g.nets)
        for (auto& layer : net.layers) layer.w.data.assign(layer.w.data.size(), 0.5);
    const double before = model_nets(m1)[0]->layers[0].w.data[0];
    model_adam_step(a1, m1, g);
    model_adam_step(a2, m2, g);
    CHECK(model_nets(m1)[0]->layers[0].w.data[0] != before);
    CHECK(model_nets(m1)[0]->layers[0].w.data == model_nets(m2)[0]->layers[0].w.data);
}
