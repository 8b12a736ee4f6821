#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "icode_lab/integrate.hpp"
#include "icode_lab/mat.hpp"
#include "icode_lab/rng.hpp"
#include "icode_lab/signals.hpp"

namespace icode_lab {

// Ground-truth dynamics plus everything needed to draw rollouts from it.
// `params` holds the fully resolved parameter record (randomized entries
// included), so a dataset manifest can reconstruct the identical system.
struct TruthSystem {
    std::string name;
    std::size_t n = 0;
    std::size_t m = 0;
    nlohmann::json params;
    std::function<void(double t, const double* x, const double* u, double* dx)> rhs;
    std::function<Vec(Rng&)> sample_x0;
};

namespace detail {

inline Vec uniform_vec(Rng& rng, std::size_t n, double lo, double hi) {
    Vec v(n);
    for (double& x : v) x = rng.uniform(lo, hi);
    return v;
}

// callers may hand over `{}`, which json deserializes as null
inline const nlohmann::json& params_or_empty(const nlohmann::json& o) {
    static const nlohmann::json empty = nlohmann::json::object();
    return o.is_null() ? empty : o;
}

}  // namespace detail

inline TruthSystem make_robot(const nlohmann::json& o_in = nlohmann::json::object()) {
    const nlohmann::json& o = detail::params_or_empty(o_in);
    TruthSystem s;
    s.name = "robot";
    s.n = 2;
    s.m = 1;
    const double M = o.value("M", 1.0), mass = o.value("m", 2.0);
    const double L = o.value("L", 0.5), g = o.value("g", 9.8);
    s.params = {{"M", M}, {"m", mass}, {"L", L}, {"g", g}};
    const double grav = 0.5 * mass * g * L / M;
    s.rhs = [M, grav](double, const double* x, const double* u, double* dx) {
        dx[0] = x[1];
        dx[1] = u[0] / M - grav * std::sin(x[0]);
    };
    s.sample_x0 = [](Rng& rng) { return detail::uniform_vec(rng, 2, -1.0, 1.0); };
    return s;
}

// Lossless averaged converter model; stored energy is exact for every duty u.
inline TruthSystem make_dcdc(const nlohmann::json& o_in = nlohmann::json::object()) {
    const nlohmann::json& o = detail::params_or_empty(o_in);
    TruthSystem s;
    s.name = "dcdc";
    s.n = 3;
    s.m = 1;
    const double C1 = o.value("C1", 0.1), C2 = o.value("C2", 0.2), Le = o.value("Le", 0.5);
    s.params = {{"C1", C1}, {"C2", C2}, {"Le", Le}};
    s.rhs = [C1, C2, Le](double, const double* x, const double* u, double* dx) {
        const double d = u[0];
        dx[0] = (1.0 - d) * x[2] / C1;
        dx[1] = d * x[2] / C2;
        dx[2] = (-(1.0 - d) * x[0] - d * x[1]) / Le;
    };
    s.sample_x0 = [](Rng& rng) { return detail::uniform_vec(rng, 3, -1.0, 1.0); };
    return s;
}

inline TruthSystem make_rigid_body(const nlohmann::json& o_in = nlohmann::json::object()) {
    const nlohmann::json& o = detail::params_or_empty(o_in);
    TruthSystem s;
    s.name = "rigid";
    s.n = 3;
    s.m = 3;
    Vec I = o.value("I", Vec{1.0, 2.0, 3.0});
    if (I.size() != 3) throw std::invalid_argument("rigid: I must have 3 entries");
    s.params = {{"I", I}};
    s.rhs = [I](double, const double* x, const double* u, double* dx) {
        const double w0 = x[0] / I[0], w1 = x[1] / I[1], w2 = x[2] / I[2];
        dx[0] = x[1] * w2 - x[2] * w1 + u[0];
        dx[1] = x[2] * w0 - x[0] * w2 + u[1];
        dx[2] = x[0] * w1 - x[1] * w0 + u[2];
    };
    // spin axis tilted in the 1-3 plane, unit angular momentum
    s.sample_x0 = [](Rng& rng) {
        const double phi = rng.uniform(0.5, 1.5);
        return Vec{std::cos(phi), 0.0, std::sin(phi)};
    };
    return s;
}

// Rabinovich-Fabrikant; the drift parameter gamma is the input channel.
inline TruthSystem make_rf(const nlohmann::json& o_in = nlohmann::json::object()) {
    const nlohmann::json& o = detail::params_or_empty(o_in);
    TruthSystem s;
    s.name = "rf";
    s.n = 3;
    s.m = 1;
    const double alpha = o.value("alpha", 1.1);
    s.params = {{"alpha", alpha}};
    s.rhs = [alpha](double, const double* x, const double* u, double* dx) {
        const double g = u[0];
        dx[0] = x[1] * (x[2] - 1.0 + x[0] * x[0]) + g * x[0];
        dx[1] = x[0] * (3.0 * x[2] + 1.0 - x[0] * x[0]) + g * x[1];
        dx[2] = -2.0 * x[2] * (alpha + x[0] * x[1]);
    };
    // cubic terms give finite-time escape from parts of [-1,1]^3 once the
    // gamma ramp nears 1; this box keeps every rollout bounded
    const double r = o.value("x0_range", 0.5);
    s.sample_x0 = [r](Rng& rng) { return detail::uniform_vec(rng, 3, -r, r); };
    return s;
}

// Glycolytic-glycogenolytic pathway as an S-system: three metabolite power
// laws, three integrator channels fed by u, four constant enzyme levels.
inline TruthSystem make_glyco(const nlohmann::json& o_in = nlohmann::json::object()) {
    const nlohmann::json& o = detail::params_or_empty(o_in);
    TruthSystem s;
    s.name = "glyco";
    s.n = 10;
    s.m = 3;
    const double enzyme_init = o.value("enzyme_init", 1.0);
    s.params = {{"enzyme_init", enzyme_init}};
    s.rhs = [](double, const double* x, const double* u, double* dx) {
        for (std::size_t i = 0; i < 10; ++i)
            if (!(x[i] > 0.0)) throw std::domain_error("glyco: state must stay positive");
        const double a1 = 0.077884314, b1 = 1.06270825;
        const double a2 = 0.585012402, b2 = 0.0007934561;
        const double a3 = 0.0007934561, b3 = 1.05880847;
        dx[0] = a1 * std::pow(x[3], 0.66) * x[5] -
                b1 * std::pow(x[0], 1.53) * std::pow(x[1], -0.59) * x[6];
        dx[1] = a2 * std::pow(x[0], 0.95) * std::pow(x[1], -0.41) * std::pow(x[4], 0.32) *
                    std::pow(x[6], 0.62) * std::pow(x[9], 0.38) -
                b2 * std::pow(x[1], 3.97) * std::pow(x[2], -3.06) * x[7];
        dx[2] = a3 * std::pow(x[1], 3.97) * std::pow(x[2], -3.06) * x[7] -
                b3 * std::pow(x[2], 0.3) * x[8];
        dx[3] = u[0];
        dx[4] = u[1];
        dx[5] = u[2];
        dx[6] = dx[7] = dx[8] = dx[9] = 0.0;
    };
    s.sample_x0 = [enzyme_init](Rng& rng) {
        Vec x0(10, enzyme_init);
        for (std::size_t i = 0; i < 6; ++i) x0[i] = rng.uniform(0.8, 1.2);
        return x0;
    };
    return s;
}

// Swing dynamics on a small grid graph. State layout (theta_1..N, omega_1..N);
// power injections are the N input channels. M_i, D_i are drawn once at
// construction unless supplied, and land in `params` for reproducibility.
inline TruthSystem make_swing(const nlohmann::json& o_in = nlohmann::json::object(), Rng* param_rng = nullptr) {
    const nlohmann::json& o = detail::params_or_empty(o_in);
    TruthSystem s;
    s.name = "swing";
    std::size_t N = o.value("N", std::size_t{10});
    std::vector<std::vector<std::size_t>> edges;
    if (o.contains("edges")) {
        for (const auto& e : o.at("edges"))
            edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>()});
    } else {
        for (std::size_t i = 0; i < N; ++i) edges.push_back({i, (i + 1) % N});  // ring
        if (N == 10) { edges.push_back({0, 5}); edges.push_back({2, 7}); }      // chords
    }
    const double K = o.value("K", 1.0);
    Vec M, D;
    if (o.contains("M")) {
        M = o.at("M").get<Vec>();
        D = o.at("D").get<Vec>();
    } else {
        if (!param_rng) throw std::invalid_argument("swing: need M,D or an rng to draw them");
        M = detail::uniform_vec(*param_rng, N, 0.3, 0.9);
        D = detail::uniform_vec(*param_rng, N, 0.7, 1.3);
    }
    if (M.size() != N || D.size() != N) throw std::invalid_argument("swing: M,D length mismatch");
    s.n = 2 * N;
    s.m = N;
    s.params = {{"N", N}, {"K", K}, {"M", M}, {"D", D}, {"edges", edges}};
    s.rhs = [N, K, M, D, edges](double, const double* x, const double* u, double* dx) {
        const double* th = x;
        const double* om = x + N;
        for (std::size_t i = 0; i < N; ++i) {
            dx[i] = om[i];
            dx[N + i] = u[i] - D[i] * om[i];
        }
        for (const auto& e : edges) {
            const double flow = K * std::sin(th[e[0]] - th[e[1]]);
            dx[N + e[0]] -= flow;
            dx[N + e[1]] += flow;
        }
        for (std::size_t i = 0; i < N; ++i) dx[N + i] /= M[i];
    };
    s.sample_x0 = [N](Rng& rng) { return detail::uniform_vec(rng, 2 * N, -1.0, 1.0); };
    return s;
}

namespace detail {
// d/dt of amp*sin(2*pi*freq*t)*exp(-decay*t) + offset
inline double damped_sine_rate(double t, double amp, double freq, double decay) {
    const double w = 2.0 * M_PI * freq;
    return amp * std::exp(-decay * t) * (w * std::cos(w * t) - decay * std::sin(w * t));
}
}  // namespace detail

// Method-of-lines heat rod on [0,10]. The two end nodes are part of the state
// and carry the analytic time-derivative of the boundary formula, so rollouts
// track it exactly; learned models see the boundary values as u instead.
inline TruthSystem make_heat1d(const nlohmann::json& o_in = nlohmann::json::object()) {
    const nlohmann::json& o = detail::params_or_empty(o_in);
    TruthSystem s;
    s.name = "heat1d";
    const std::size_t N = o.value("N_grid", std::size_t{50});
    if (N < 3) throw std::invalid_argument("heat1d: N_grid must be >= 3");
    const double k = o.value("k", 1.0);
    const double amp = o.value("amp", 2.0), freq = o.value("freq", 1.0);
    const double decay = o.value("decay", 0.2), offset = o.value("offset", 0.1);
    s.n = N;
    s.m = 2;
    s.params = {{"N_grid", N}, {"k", k},         {"amp", amp},
                {"freq", freq}, {"decay", decay}, {"offset", offset}};
    const double h = 10.0 / static_cast<double>(N - 1);
    const double c = k / (h * h);
    s.rhs = [N, c, amp, freq, decay](double t, const double* x, const double*, double* dx) {
        dx[0] = dx[N - 1] = detail::damped_sine_rate(t, amp, freq, decay);
        for (std::size_t i = 1; i + 1 < N; ++i)
            dx[i] = c * (x[i - 1] - 2.0 * x[i] + x[i + 1]);
    };
    s.sample_x0 = [N, offset](Rng& rng) {
        Vec x0 = detail::uniform_vec(rng, N, -1.0, 1.0);
        x0[0] = x0[N - 1] = offset;  // boundary formula value at t=0
        return x0;
    };
    return s;
}

// Heat plate on [0,10]^2, row-major nx*ny grid, boundary ring frozen at its
// initial values; u is the scalar source applied to every interior node.
inline TruthSystem make_heat2d(const nlohmann::json& o_in = nlohmann::json::object()) {
    const nlohmann::json& o = detail::params_or_empty(o_in);
    TruthSystem s;
    s.name = "heat2d";
    const std::size_t nx = o.value("nx", std::size_t{16});
    const std::size_t ny = o.value("ny", std::size_t{16});
    if (nx < 3 || ny < 3) throw std::invalid_argument("heat2d: grid must be >= 3x3");
    const double k = o.value("k", 1.0);
    s.n = nx * ny;
    s.m = 1;
    s.params = {{"nx", nx}, {"ny", ny}, {"k", k}};
    const double h = 10.0 / static_cast<double>(nx - 1);
    const double c = k / (h * h);
    s.rhs = [nx, ny, c](double, const double* x, const double* u, double* dx) {
        for (std::size_t i = 0; i < nx * ny; ++i) dx[i] = 0.0;
        for (std::size_t ix = 1; ix + 1 < nx; ++ix)
            for (std::size_t iy = 1; iy + 1 < ny; ++iy) {
                const std::size_t id = ix * ny + iy;
                dx[id] = c * (x[id - ny] + x[id + ny] + x[id - 1] + x[id + 1] - 4.0 * x[id]) +
                         u[0];
            }
    };
    s.sample_x0 = [nx, ny](Rng& rng) { return detail::uniform_vec(rng, nx * ny, -1.0, 1.0); };
    return s;
}

inline TruthSystem make_system(const std::string& name,
                               const nlohmann::json& overrides_in = nlohmann::json::object(),
                               Rng* param_rng = nullptr) {
    const nlohmann::json& overrides = detail::params_or_empty(overrides_in);
    if (name == "robot") return make_robot(overrides);
    if (name == "dcdc") return make_dcdc(overrides);
    if (name == "rigid") return make_rigid_body(overrides);
    if (name == "rf") return make_rf(overrides);
    if (name == "glyco") return make_glyco(overrides);
    if (name == "swing") return make_swing(overrides, param_rng);
    if (name == "heat1d") return make_heat1d(overrides);
    if (name == "heat2d") return make_heat2d(overrides);
    throw std::invalid_argument("unknown system '" + name + "'");
}

inline std::vector<std::string> system_names() {
    return {"robot", "dcdc", "rigid", "rf", "glyco", "swing", "heat1d", "heat2d"};
}

// Gaussian state noise, sigma_i = level * per-coordinate RMS of the clean
// trajectory. Deterministic per seed.
inline Trajectory add_state_noise(const Trajectory& traj, double level, std::uint64_t seed) {
    Trajectory out = traj;
    if (level == 0.0) return out;
    const std::size_t n = traj.n();
    Vec rms(n, 0.0);
    for (const auto& x : traj.states)
        for (std::size_t i = 0; i < n; ++i) rms[i] += x[i] * x[i];
    for (std::size_t i = 0; i < n; ++i)
        rms[i] = std::sqrt(rms[i] / static_cast<double>(traj.states.size()));
    Rng rng(seed, stream::state_noise);
    for (auto& x : out.states)
        for (std::size_t i = 0; i < n; ++i) x[i] += level * rms[i] * rng.normal();
    return out;
}

// Same recipe applied to measured input samples only.
inline std::vector<Vec> add_input_noise(const std::vector<Vec>& samples, double level,
                                        std::uint64_t seed) {
    std::vector<Vec> out = samples;
    if (level == 0.0 || samples.empty()) return out;
    const std::size_t m = samples[0].size();
    Vec rms(m, 0.0);
    for (const auto& u : samples)
        for (std::size_t j = 0; j < m; ++j) rms[j] += u[j] * u[j];
    for (std::size_t j = 0; j < m; ++j)
        rms[j] = std::sqrt(rms[j] / static_cast<double>(samples.size()));
    Rng rng(seed, stream::input_noise);
    for (auto& u : out)
        for (std::size_t j = 0; j < m; ++j) u[j] += level * rms[j] * rng.normal();
    return out;
}

}  // namespace icode_lab
