#pragma once

#include <cstddef>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "icode_lab/io.hpp"
#include "icode_lab/mat.hpp"
#include "icode_lab/signals.hpp"

namespace icode_lab {

struct IntegrationError : std::runtime_error {
    std::size_t step;
    explicit IntegrationError(std::size_t k)
        : std::runtime_error("integration diverged at step " + std::to_string(k)), step(k) {}
};

// States and grid-point input samples along one rollout.
struct Trajectory {
    TimeGrid grid;
    std::vector<Vec> states;  // length grid.points()
    std::vector<Vec> inputs;  // length grid.points()

    std::size_t n() const { return states.empty() ? 0 : states[0].size(); }
    std::size_t m() const { return inputs.empty() ? 0 : inputs[0].size(); }
};

// Scratch for one RK4 step; reusable across steps.
struct Rk4Workspace {
    Vec k1, k2, k3, k4, xs, u;

    void resize(std::size_t n, std::size_t m) {
        k1.resize(n); k2.resize(n); k3.resize(n); k4.resize(n); xs.resize(n);
        u.resize(m);
    }
};

// Classical RK4 with the input sampled from the continuous signal at stage
// times t, t+dt/2, t+dt. rhs(t, x, u, dx); sampler(t, u_out).
template <class Rhs, class Sampler>
void rk4_step(Rhs&& rhs, double t, double dt, const Vec& x, const Sampler& u_of_t, Vec& out,
              Rk4Workspace& ws) {
    const std::size_t n = x.size();
    const double h = 0.5 * dt;

    u_of_t(t, ws.u.data());
    rhs(t, x.data(), ws.u.data(), ws.k1.data());

    u_of_t(t + h, ws.u.data());
    for (std::size_t i = 0; i < n; ++i) ws.xs[i] = x[i] + h * ws.k1[i];
    rhs(t + h, ws.xs.data(), ws.u.data(), ws.k2.data());

    for (std::size_t i = 0; i < n; ++i) ws.xs[i] = x[i] + h * ws.k2[i];
    rhs(t + h, ws.xs.data(), ws.u.data(), ws.k3.data());

    u_of_t(t + dt, ws.u.data());
    for (std::size_t i = 0; i < n; ++i) ws.xs[i] = x[i] + dt * ws.k3[i];
    rhs(t + dt, ws.xs.data(), ws.u.data(), ws.k4.data());

    out.resize(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = x[i] + dt / 6.0 * (ws.k1[i] + 2.0 * ws.k2[i] + 2.0 * ws.k3[i] + ws.k4[i]);
}

template <class Rhs, class Sampler>
Trajectory rollout(Rhs&& rhs, const Vec& x0, const Sampler& u_of_t, std::size_t m,
                   const TimeGrid& grid) {
    grid.validate();
    const std::size_t n = x0.size();
    Trajectory traj;
    traj.grid = grid;
    traj.states.reserve(grid.points());
    traj.inputs.reserve(grid.points());

    Rk4Workspace ws;
    ws.resize(n, m);
    Vec x = x0, next(n), u(m);

    for (std::size_t k = 0; k <= grid.steps; ++k) {
        u_of_t(grid.time(k), u.data());
        traj.states.push_back(x);
        traj.inputs.push_back(u);
        if (k == grid.steps) break;
        rk4_step(rhs, grid.time(k), grid.dt(), x, u_of_t, next, ws);
        if (!all_finite(next)) throw IntegrationError(k);
        x.swap(next);
    }
    return traj;
}

// CSV layout: header t,x1..xn,u1..um; shortest round-trip f64 formatting.
inline std::string trajectory_to_csv(const Trajectory& traj) {
    std::string out;
    out += "t";
    for (std::size_t i = 1; i <= traj.n(); ++i) out += ",x" + std::to_string(i);
    for (std::size_t j = 1; j <= traj.m(); ++j) out += ",u" + std::to_string(j);
    out += "\n";
    for (std::size_t k = 0; k < traj.states.size(); ++k) {
        out += format_double(traj.grid.time(k));
        for (double v : traj.states[k]) { out += ","; out += format_double(v); }
        for (double v : traj.inputs[k]) { out += ","; out += format_double(v); }
        out += "\n";
    }
    return out;
}

inline Trajectory trajectory_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("trajectory csv: empty");
    std::size_t n = 0, m = 0;
    {
        std::istringstream hs(line);
        std::string col;
        bool first = true;
        while (std::getline(hs, col, ',')) {
            if (first) {
                if (col != "t") throw std::runtime_error("trajectory csv: header must start with t");
                first = false;
            } else if (col[0] == 'x') {
                ++n;
            } else if (col[0] == 'u') {
                ++m;
            } else {
                throw std::runtime_error("trajectory csv: unexpected column " + col);
            }
        }
    }
    std::vector<double> times;
    Trajectory traj;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ls, cell, ',')) row.push_back(parse_double(cell));
        if (row.size() != 1 + n + m) throw std::runtime_error("trajectory csv: short row");
        times.push_back(row[0]);
        traj.states.emplace_back(row.begin() + 1, row.begin() + 1 + n);
        traj.inputs.emplace_back(row.begin() + 1 + n, row.end());
    }
    if (times.size() < 2) throw std::runtime_error("trajectory csv: needs at least 2 rows");
    traj.grid.t0 = times.front();
    traj.grid.t1 = times.back();
    traj.grid.steps = times.size() - 1;
    return traj;
}

}  // namespace icode_lab
