#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "icode_lab/bptt.hpp"
#include "icode_lab/integrate.hpp"
#include "icode_lab/models.hpp"
#include "icode_lab/rng.hpp"

using namespace icode_lab;

namespace {

struct ConstInput {
    Vec u;
    void value(double, double* out) const {
        for (std::size_t j = 0; j < u.size(); ++j) out[j] = u[j];
    }
    void slope(double, double* out) const {
        for (std::size_t j = 0; j < u.size(); ++j) out[j] = 0.0;
    }
    void operator()(double t, double* out) const { value(t, out); }
};

double exp_decay_error(double dt) {
    const auto rhs = [](double, const double* x, const double*, double* dx) { dx[0] = -x[0]; };
    const auto u_of_t = [](double, double*) {};
    const std::size_t steps = static_cast<std::size_t>(std::llround(1.0 / dt));
    const Trajectory traj = rollout(rhs, Vec{1.0}, u_of_t, 0, TimeGrid{0.0, 1.0, steps});
    return std::abs(traj.states.back()[0] - std::exp(-1.0));
}

}  // namespace

TEST_CASE("time grid basics") {
    TimeGrid g{0.0, 1.0, 100};
    g.validate();
    CHECK(g.dt() == Catch::Approx(0.01).epsilon(1e-15));
    CHECK(g.points() == 101);
    CHECK(g.time(0) == 0.0);
    CHECK(g.time(100) == Catch::Approx(1.0).margin(1e-12));
    CHECK_THROWS(TimeGrid{0.0, 1.0, 0}.validate());
    CHECK_THROWS(TimeGrid{1.0, 0.0, 10}.validate());
}

TEST_CASE("rk4 single step on exponential decay") {
    const auto rhs = [](double, const double* x, const double*, double* dx) { dx[0] = -x[0]; };
    const auto u_of_t = [](double, double*) {};
    Vec out(1);
    Rk4Workspace ws;
    ws.resize(1, 0);
    rk4_step(rhs, 0.0, 0.1, Vec{1.0}, u_of_t, out, ws);
    CHECK(out[0] == Catch::Approx(0.9048375).epsilon(1e-12));
    CHECK(std::abs(out[0] - std::exp(-0.1)) < 1e-7);
}

TEST_CASE("hundred step rollout accuracy and endpoint record") {
    const auto rhs = [](double, const double* x, const double*, double* dx) { dx[0] = -x[0]; };
    const auto u_of_t = [](double, double*) {};
    const Trajectory traj = rollout(rhs, Vec{1.0}, u_of_t, 0, TimeGrid{0.0, 1.0, 100});
    REQUIRE(traj.states.size() == 101);
    CHECK(std::abs(traj.states.back()[0] - std::exp(-1.0)) < 1e-9);
    CHECK_THROWS_AS(rollout(rhs, Vec{1.0}, u_of_t, 0, TimeGrid{0.0, 1.0, 0}),
                    std::invalid_argument);
}

TEST_CASE("fourth order convergence") {
    const double e1 = exp_decay_error(0.1);
    const double e2 = exp_decay_error(0.05);
    const double e3 = exp_decay_error(0.025);
    CHECK(e1 / e2 > 16.0 * 0.8);
    CHECK(e1 / e2 < 16.0 * 1.2);
    CHECK(e2 / e3 > 16.0 * 0.8);
    CHECK(e2 / e3 < 16.0 * 1.2);
}

TEST_CASE("stage inputs are sampled inside the step") {
    std::vector<double> times;
    const auto rhs = [](double, const double* x, const double* u, double* dx) {
        dx[0] = -x[0] + u[0];
    };
    const auto u_of_t = [&times](double t, double* out) {
        times.push_back(t);
        out[0] = 0.0;
    };
    Vec out(1);
    Rk4Workspace ws;
    ws.resize(1, 1);
    rk4_step(rhs, 0.2, 0.1, Vec{1.0}, u_of_t, out, ws);
    for (double t : times) {
        CHECK(t >= 0.2);
        CHECK(t <= 0.3 + 1e-15);
    }
    // stage times are t, t + dt/2, t + dt as computed in double arithmetic
    CHECK(times == std::vector<double>{0.2, 0.2 + 0.05, 0.2 + 0.1});
}

TEST_CASE("divergence raises an integration error with the step index") {
    const auto rhs = [](double, const double* x, const double*, double* dx) {
        dx[0] = x[0] * x[0] * 1e6;
    };
    const auto u_of_t = [](double, double*) {};
    try {
        rollout(rhs, Vec{1.0}, u_of_t, 0, TimeGrid{0.0, 10.0, 100});
        FAIL("expected IntegrationError");
    } catch (const IntegrationError& e) {
        CHECK(e.step < 100);
    }
}

TEST_CASE("csv round trip") {
    const auto rhs = [](double, const double* x, const double* u, double* dx) {
        dx[0] = -x[0] + u[0];
        dx[1] = x[0] * 0.3;
    };
    const auto u_of_t = [](double t, double* out) { out[0] = std::sin(3.0 * t); };
    const Trajectory traj = rollout(rhs, Vec{0.9, -0.2}, u_of_t, 1, TimeGrid{0.0, 1.0, 17});
    const std::string csv = trajectory_to_csv(traj);
    CHECK(csv.rfind("t,x1,x2,u1\n", 0) == 0);
    const Trajectory back = trajectory_from_csv(csv);
    REQUIRE(back.states.size() == traj.states.size());
    CHECK(back.n() == 2);
    CHECK(back.m() == 1);
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        CHECK(back.states[k] == traj.states[k]);
        CHECK(back.inputs[k] == traj.inputs[k]);
    }
}

TEST_CASE("model rollout segments share the master grid times") {
    const VectorFieldModel model = [] {
        ModelConfig cfg;
        cfg.kind = "icode";
        cfg.n = 2;
        cfg.m = 1;
        cfg.width = 6;
        cfg.hidden_layers = 2;
        Rng rng(2, stream::weights);
        return make_model(cfg, rng);
    }();
    const TimeGrid grid{0.0, 1.0, 10};
    const ConstInput u{{0.3}};
    BpttWorkspace ws;
    const Trajectory full = model_rollout(model, Vec{0.5, -0.1}, u, grid, 0, 10, ws);
    // restart from the recorded state at index 4: the tail must reproduce
    // the full rollout bitwise because stage times come from the same grid
    const Trajectory tail = model_rollout(model, full.states[4], u, grid, 4, 6, ws);
    CHECK(tail.grid.t0 == grid.time(4));
    for (std::size_t k = 0; k <= 6; ++k) CHECK(tail.states[k] == full.states[4 + k]);
    CHECK_THROWS(model_rollout(model, Vec{0.5, -0.1}, u, grid, 8, 5, ws));
}

TEST_CASE("anode rollout records head coordinates only") {
    ModelConfig cfg;
    cfg.kind = "anode";
    cfg.n = 2;
    cfg.m = 1;
    cfg.d_a = 3;
    cfg.width = 5;
    cfg.hidden_layers = 2;
    Rng rng(9, stream::weights);
    const VectorFieldModel model = make_model(cfg, rng);
    const ConstInput u{{0.0}};
    const Trajectory traj = model_rollout(model, Vec{0.1, 0.2}, u, TimeGrid{0.0, 0.5, 5});
    for (const Vec& x : traj.states) CHECK(x.size() == 2);
}

TEST_CASE("rollout gradients match central finite differences") {
    Rng data_rng(100, stream::scan);
    for (const std::string kind : {"icode", "node", "anode", "cde"}) {
        ModelConfig cfg;
        cfg.kind = kind;
        cfg.n = 2;
        cfg.m = 1;
        cfg.d_a = 2;
        cfg.width = 5;
        cfg.hidden_layers = 2;
        Rng rng(1234, stream::weights);
        VectorFieldModel model = make_model(cfg, rng);

        const TimeGrid grid{0.0, 0.6, 6};
        SignalInstance sig;
        sig.kind = SignalInstance::Kind::PwConstant;
        sig.channels = 1;
        sig.switch_times = {0.25};
        sig.seg_values = {{0.4}, {-0.6}};
        TrajectorySampler sampler{&sig, &grid, nullptr};

        std::vector<Vec> target;
        for (std::size_t k = 0; k <= 6; ++k)
            target.push_back({0.3 * std::sin(1.0 + k), -0.2 + 0.05 * k});
        const Vec x0{0.4, -0.3};

        ModelGrad grads = ModelGrad::zeros_like(model);
        BpttWorkspace ws;
        const double loss = rollout_loss_grad(model, x0, sampler, grid, target, grads, ws);
        CHECK(loss > 0.0);

        auto loss_only = [&]() {
            ModelGrad g2 = ModelGrad::zeros_like(model);
            BpttWorkspace w2;
            return rollout_loss_grad(model, x0, sampler, grid, target, g2, w2);
        };
        std::vector<Mlp*> nets = model_nets(model);
        const double step = 1e-5;
        for (std::size_t ni = 0; ni < nets.size(); ++ni) {
            for (std::size_t l = 0; l < nets[ni]->layers.size(); ++l) {
                auto& w = nets[ni]->layers[l].w;
                const std::size_t stride = std::max<std::size_t>(1, w.data.size() / 4);
                for (std::size_t p = 0; p < w.data.size(); p += stride) {
                    const double keep = w.data[p];
                    w.data[p] = keep + step;
                    const double up = loss_only();
                    w.data[p] = keep - step;
                    const double dn = loss_only();
                    w.data[p] = keep;
                    const double fd = (up - dn) / (2 * step);
                    CHECK_THAT(grads.nets[ni].layers[l].w.data[p],
                               Catch::Matchers::WithinRel(fd, 1e-3) ||
                                   Catch::Matchers::WithinAbs(fd, 1e-10));
                }
            }
        }
    }
}

TEST_CASE("loss and gradients are bitwise deterministic") {
    ModelConfig cfg;
    cfg.kind = "icode";
    cfg.n = 2;
    cfg.m = 1;
    cfg.width = 8;
    cfg.hidden_layers = 2;
    Rng rng(55, stream::weights);
    const VectorFieldModel model = make_model(cfg, rng);
    const TimeGrid grid{0.0, 1.0, 8};
    const ConstInput u{{0.2}};
    std::vector<Vec> target(9, Vec{0.1, -0.1});
    const Vec x0{0.5, 0.5};

    ModelGrad g1 = ModelGrad::zeros_like(model);
    ModelGrad g2 = ModelGrad::zeros_like(model);
    BpttWorkspace w1, w2;
    const double l1 = rollout_loss_grad(model, x0, u, grid, target, g1, w1);
    const double l2 = rollout_loss_grad(model, x0, u, grid, target, g2, w2);
    CHECK(l1 == l2);
    for (std::size_t ni = 0; ni < g1.nets.size(); ++ni)
        for (std::size_t l = 0; l < g1.nets[ni].layers.size(); ++l)
            CHECK(g1.nets[ni].layers[l].w.data == g2.nets[ni].layers[l].w.data);
}
