#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "icode_lab/integrate.hpp"
#include "icode_lab/mat.hpp"
#include "icode_lab/models.hpp"
#include "icode_lab/signals.hpp"

namespace icode_lab {

// Continuous input source for model integration: value plus the grid-slope
// derivative that feeds the cde control term. If `samples` is set (noisy
// measured inputs), both come from the piecewise-linear interpolant of the
// samples instead of the analytic signal.
struct TrajectorySampler {
    const SignalInstance* sig = nullptr;
    const TimeGrid* grid = nullptr;
    const std::vector<Vec>* samples = nullptr;

    std::size_t cell(double t) const {
        const double kf = std::floor((t - grid->t0) / grid->dt());
        if (kf < 0.0) return 0;
        std::size_t k = static_cast<std::size_t>(kf);
        return k >= grid->steps ? grid->steps - 1 : k;
    }

    void value(double t, double* out) const {
        if (!samples) {
            sig->value(t, out);
            return;
        }
        const std::size_t k = cell(t);
        const double a = (t - grid->time(k)) / grid->dt();
        const Vec& lo = (*samples)[k];
        const Vec& hi = (*samples)[k + 1];
        for (std::size_t c = 0; c < lo.size(); ++c) out[c] = lo[c] + a * (hi[c] - lo[c]);
    }

    void slope(double t, double* out) const {
        if (!samples) {
            signal_grid_slope(*sig, t, *grid, out);
            return;
        }
        const std::size_t k = cell(t);
        const Vec& lo = (*samples)[k];
        const Vec& hi = (*samples)[k + 1];
        for (std::size_t c = 0; c < lo.size(); ++c) out[c] = (hi[c] - lo[c]) / grid->dt();
    }
};

struct BpttWorkspace {
    ModelWorkspace mws;
    std::vector<Vec> x;           // grid states, ode dim
    std::vector<Vec> s2, s3, s4;  // cached RK4 stage states per step
    Vec k1, k2, k3, k4;
    Vec u, dudt;
    Vec a, xb, sb;
    Vec kb1, kb2, kb3, kb4;
};

namespace detail {

template <class Sampler>
void sample_input(const Sampler& s, double t, Vec& u, Vec& dudt) {
    if (!u.empty()) s.value(t, u.data());
    if (!dudt.empty()) s.slope(t, dudt.data());
}

}  // namespace detail

// Integrates the model for n_steps starting at grid point `start`, so every
// stage time is computed from the same master grid that produced the data.
// x0 is the data state; anode augments it internally. Records head states
// plus grid-point input samples.
template <class Sampler>
Trajectory model_rollout(const VectorFieldModel& model, const Vec& x0, const Sampler& u_of_t,
                         const TimeGrid& grid, std::size_t start, std::size_t n_steps,
                         BpttWorkspace& ws) {
    grid.validate();
    if (start + n_steps > grid.steps)
        throw std::invalid_argument("model_rollout: segment exceeds grid");
    if (n_steps == 0) throw std::invalid_argument("model_rollout: steps must be > 0");
    const std::size_t n = state_dim(model);
    const std::size_t dim = ode_dim(model);
    const std::size_t m = input_dim(model);
    if (x0.size() != n) throw std::invalid_argument("model_rollout: x0 dim mismatch");

    Vec h = x0;
    if (const auto* an = std::get_if<AnodeModel>(&model)) h = anode_init(*an, x0);

    ws.k1.resize(dim); ws.k2.resize(dim); ws.k3.resize(dim); ws.k4.resize(dim);
    ws.u.resize(m); ws.dudt.resize(m);
    Vec s(dim);

    Trajectory traj;
    traj.grid = TimeGrid{grid.time(start), grid.time(start + n_steps), n_steps};
    traj.states.reserve(n_steps + 1);
    traj.inputs.reserve(n_steps + 1);
    const double dt = grid.dt(), h2 = 0.5 * dt;

    for (std::size_t k = 0; k <= n_steps; ++k) {
        const double t = grid.time(start + k);
        u_of_t.value(t, ws.u.data());
        traj.states.emplace_back(h.begin(), h.begin() + n);
        traj.inputs.push_back(ws.u);
        if (k == n_steps) break;

        detail::sample_input(u_of_t, t, ws.u, ws.dudt);
        model_rhs(model, t, h.data(), ws.u.data(), ws.dudt.data(), ws.k1.data(), ws.mws);
        detail::sample_input(u_of_t, t + h2, ws.u, ws.dudt);
        for (std::size_t i = 0; i < dim; ++i) s[i] = h[i] + h2 * ws.k1[i];
        model_rhs(model, t + h2, s.data(), ws.u.data(), ws.dudt.data(), ws.k2.data(), ws.mws);
        for (std::size_t i = 0; i < dim; ++i) s[i] = h[i] + h2 * ws.k2[i];
        model_rhs(model, t + h2, s.data(), ws.u.data(), ws.dudt.data(), ws.k3.data(), ws.mws);
        detail::sample_input(u_of_t, t + dt, ws.u, ws.dudt);
        for (std::size_t i = 0; i < dim; ++i) s[i] = h[i] + dt * ws.k3[i];
        model_rhs(model, t + dt, s.data(), ws.u.data(), ws.dudt.data(), ws.k4.data(), ws.mws);

        for (std::size_t i = 0; i < dim; ++i)
            h[i] += dt / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
        if (!all_finite(h)) throw IntegrationError(start + k);
    }
    return traj;
}

template <class Sampler>
Trajectory model_rollout(const VectorFieldModel& model, const Vec& x0, const Sampler& u_of_t,
                         const TimeGrid& grid) {
    BpttWorkspace ws;
    return model_rollout(model, x0, u_of_t, grid, 0, grid.steps, ws);
}

// MSE between the rolled-out head states and `target` (its length sets the
// number of steps taken, which may be a prefix of the grid), with exact
// gradients from unrolling the discrete RK4 recursion in reverse (stage
// states cached on the way forward). Gradients accumulate into `grads`.
template <class Sampler>
double rollout_loss_grad(const VectorFieldModel& model, const Vec& x0, const Sampler& u_of_t,
                         const TimeGrid& grid, const std::vector<Vec>& target, ModelGrad& grads,
                         BpttWorkspace& ws) {
    grid.validate();
    if (target.size() < 2) throw std::invalid_argument("rollout_loss_grad: target too short");
    if (target.size() > grid.points())
        throw std::invalid_argument("rollout_loss_grad: target longer than grid");
    const std::size_t n = state_dim(model);
    const std::size_t dim = ode_dim(model);
    const std::size_t m = input_dim(model);
    const std::size_t K = target.size() - 1;
    if (x0.size() != n) throw std::invalid_argument("rollout_loss_grad: x0 dim mismatch");
    const double wpt = 1.0 / (static_cast<double>(K + 1) * static_cast<double>(n));
    const double dt = grid.dt(), h2 = 0.5 * dt;

    ws.x.resize(K + 1);
    ws.s2.resize(K); ws.s3.resize(K); ws.s4.resize(K);
    ws.k1.resize(dim); ws.k2.resize(dim); ws.k3.resize(dim); ws.k4.resize(dim);
    ws.u.resize(m); ws.dudt.resize(m);

    ws.x[0] = x0;
    if (const auto* an = std::get_if<AnodeModel>(&model)) ws.x[0] = anode_init(*an, x0);

    // forward, caching stages
    for (std::size_t k = 0; k < K; ++k) {
        const double t = grid.time(k);
        const Vec& xk = ws.x[k];
        ws.s2[k].resize(dim); ws.s3[k].resize(dim); ws.s4[k].resize(dim);

        detail::sample_input(u_of_t, t, ws.u, ws.dudt);
        model_rhs(model, t, xk.data(), ws.u.data(), ws.dudt.data(), ws.k1.data(), ws.mws);
        detail::sample_input(u_of_t, t + h2, ws.u, ws.dudt);
        for (std::size_t i = 0; i < dim; ++i) ws.s2[k][i] = xk[i] + h2 * ws.k1[i];
        model_rhs(model, t + h2, ws.s2[k].data(), ws.u.data(), ws.dudt.data(), ws.k2.data(),
                  ws.mws);
        for (std::size_t i = 0; i < dim; ++i) ws.s3[k][i] = xk[i] + h2 * ws.k2[i];
        model_rhs(model, t + h2, ws.s3[k].data(), ws.u.data(), ws.dudt.data(), ws.k3.data(),
                  ws.mws);
        detail::sample_input(u_of_t, t + dt, ws.u, ws.dudt);
        for (std::size_t i = 0; i < dim; ++i) ws.s4[k][i] = xk[i] + dt * ws.k3[i];
        model_rhs(model, t + dt, ws.s4[k].data(), ws.u.data(), ws.dudt.data(), ws.k4.data(),
                  ws.mws);

        ws.x[k + 1].resize(dim);
        for (std::size_t i = 0; i < dim; ++i)
            ws.x[k + 1][i] =
                xk[i] + dt / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
        if (!all_finite(ws.x[k + 1])) throw IntegrationError(k);
    }

    double loss = 0.0;
    for (std::size_t k = 0; k <= K; ++k) {
        if (target[k].size() != n)
            throw std::invalid_argument("rollout_loss_grad: target dim mismatch");
        for (std::size_t i = 0; i < n; ++i) {
            const double d = ws.x[k][i] - target[k][i];
            loss += wpt * d * d;
        }
    }

    // adjoint sweep
    auto loss_cot = [&](std::size_t k, Vec& out) {
        out.assign(dim, 0.0);
        for (std::size_t i = 0; i < n; ++i) out[i] = 2.0 * wpt * (ws.x[k][i] - target[k][i]);
    };

    Vec& a = ws.a;
    loss_cot(K, a);
    ws.kb1.resize(dim); ws.kb2.resize(dim); ws.kb3.resize(dim); ws.kb4.resize(dim);

    for (std::size_t k = K; k-- > 0;) {
        const double t = grid.time(k);
        for (std::size_t i = 0; i < dim; ++i) {
            ws.kb1[i] = dt / 6.0 * a[i];
            ws.kb2[i] = dt / 3.0 * a[i];
            ws.kb3[i] = dt / 3.0 * a[i];
            ws.kb4[i] = dt / 6.0 * a[i];
        }
        ws.xb = a;

        ws.sb.assign(dim, 0.0);
        detail::sample_input(u_of_t, t + dt, ws.u, ws.dudt);
        model_rhs_vjp(model, t + dt, ws.s4[k].data(), ws.u.data(), ws.dudt.data(), ws.kb4.data(),
                      grads, ws.sb.data(), ws.mws);
        for (std::size_t i = 0; i < dim; ++i) {
            ws.xb[i] += ws.sb[i];
            ws.kb3[i] += dt * ws.sb[i];
        }

        ws.sb.assign(dim, 0.0);
        detail::sample_input(u_of_t, t + h2, ws.u, ws.dudt);
        model_rhs_vjp(model, t + h2, ws.s3[k].data(), ws.u.data(), ws.dudt.data(), ws.kb3.data(),
                      grads, ws.sb.data(), ws.mws);
        for (std::size_t i = 0; i < dim; ++i) {
            ws.xb[i] += ws.sb[i];
            ws.kb2[i] += h2 * ws.sb[i];
        }

        ws.sb.assign(dim, 0.0);
        model_rhs_vjp(model, t + h2, ws.s2[k].data(), ws.u.data(), ws.dudt.data(), ws.kb2.data(),
                      grads, ws.sb.data(), ws.mws);
        for (std::size_t i = 0; i < dim; ++i) {
            ws.xb[i] += ws.sb[i];
            ws.kb1[i] += h2 * ws.sb[i];
        }

        ws.sb.assign(dim, 0.0);
        detail::sample_input(u_of_t, t, ws.u, ws.dudt);
        model_rhs_vjp(model, t, ws.x[k].data(), ws.u.data(), ws.dudt.data(), ws.kb1.data(), grads,
                      ws.sb.data(), ws.mws);
        for (std::size_t i = 0; i < dim; ++i) ws.xb[i] += ws.sb[i];

        loss_cot(k, a);
        for (std::size_t i = 0; i < dim; ++i) a[i] += ws.xb[i];
    }

    // route the augmentation-tail cotangent through the init net
    if (const auto* an = std::get_if<AnodeModel>(&model); an && an->d_a > 0) {
        Vec tail_cot(a.begin() + an->n, a.end());
        Vec x0_cot;
        mlp_vjp_acc(an->init_net, x0, tail_cot, grads.nets[1], x0_cot, ws.mws.mlp);
    }
    return loss;
}

}  // namespace icode_lab
