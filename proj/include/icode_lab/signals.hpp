#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "icode_lab/mat.hpp"
#include "icode_lab/rng.hpp"

namespace icode_lab {

// Uniform grid t_k = t0 + k*dt, k = 0..steps, dt = (t1-t0)/steps.
struct TimeGrid {
    double t0 = 0.0;
    double t1 = 0.0;
    std::size_t steps = 0;

    double dt() const { return (t1 - t0) / static_cast<double>(steps); }
    double time(std::size_t k) const { return t0 + dt() * static_cast<double>(k); }
    std::size_t points() const { return steps + 1; }

    void validate() const {
        if (steps == 0) throw std::invalid_argument("TimeGrid: steps must be > 0");
        if (!(t1 > t0)) throw std::invalid_argument("TimeGrid: t1 must exceed t0");
    }
};

inline TimeGrid grid_from_json(const nlohmann::json& j) {
    TimeGrid g;
    g.t0 = j.at("t0").get<double>();
    g.t1 = j.at("t1").get<double>();
    g.steps = j.at("steps").get<std::size_t>();
    return g;
}

inline nlohmann::json grid_to_json(const TimeGrid& g) {
    return {{"t0", g.t0}, {"t1", g.t1}, {"steps", g.steps}};
}

// A concrete, deterministic input signal u(t) with m channels. Instances are
// drawn from a SignalSpec (which may randomize segment values per rollout).
struct SignalInstance {
    enum class Kind { Constant, PwConstant, Ramp, DampedSine, Windows };

    Kind kind = Kind::Constant;
    std::size_t channels = 0;

    Vec const_value;  // Constant

    std::vector<double> switch_times;  // PwConstant, shared across channels
    std::vector<Vec> seg_values;       // seg_values[segment][channel]

    double ramp_t0 = 0.0, ramp_t1 = 1.0;  // Ramp, shared timing
    Vec ramp_v0, ramp_v1;

    Vec ds_amp, ds_freq, ds_decay, ds_offset;  // DampedSine per channel

    Vec win_value;                                    // Windows: value inside spans, 0 outside
    std::vector<std::pair<double, double>> win_spans;  // half-open [a, b)

    void value(double t, double* out) const {
        switch (kind) {
            case Kind::Constant:
                std::copy(const_value.begin(), const_value.end(), out);
                return;
            case Kind::PwConstant: {
                std::size_t seg = 0;
                while (seg < switch_times.size() && t >= switch_times[seg]) ++seg;
                std::copy(seg_values[seg].begin(), seg_values[seg].end(), out);
                return;
            }
            case Kind::Ramp: {
                double a;
                if (t <= ramp_t0) a = 0.0;
                else if (t >= ramp_t1) a = 1.0;
                else a = (t - ramp_t0) / (ramp_t1 - ramp_t0);
                for (std::size_t c = 0; c < channels; ++c)
                    out[c] = ramp_v0[c] + a * (ramp_v1[c] - ramp_v0[c]);
                return;
            }
            case Kind::DampedSine:
                for (std::size_t c = 0; c < channels; ++c)
                    out[c] = ds_amp[c] * std::sin(2.0 * M_PI * ds_freq[c] * t) *
                                 std::exp(-ds_decay[c] * t) +
                             ds_offset[c];
                return;
            case Kind::Windows: {
                bool inside = false;
                for (const auto& [a, b] : win_spans)
                    if (t >= a && t < b) { inside = true; break; }
                for (std::size_t c = 0; c < channels; ++c) out[c] = inside ? win_value[c] : 0.0;
                return;
            }
        }
    }

    Vec value(double t) const {
        Vec out(channels);
        value(t, out.data());
        return out;
    }
};

// Slope of the piecewise-linear interpolant of the signal sampled on `grid`.
// This is the du/dt a consumer of sampled data can actually see.
inline void signal_grid_slope(const SignalInstance& sig, double t, const TimeGrid& grid,
                              double* out) {
    const double dt = grid.dt();
    double kf = std::floor((t - grid.t0) / dt);
    if (kf < 0.0) kf = 0.0;
    std::size_t k = static_cast<std::size_t>(kf);
    if (k >= grid.steps) k = grid.steps - 1;
    Vec lo = sig.value(grid.time(k));
    Vec hi = sig.value(grid.time(k + 1));
    for (std::size_t c = 0; c < sig.channels; ++c) out[c] = (hi[c] - lo[c]) / dt;
}

// Spec as stored in a dataset manifest. `draw` produces a per-rollout
// instance; randomized fields consume the supplied stream so rollouts are
// reproducible from (seed, rollout index) alone.
inline SignalInstance draw_signal(const nlohmann::json& spec, std::size_t channels, Rng& rng) {
    SignalInstance sig;
    sig.channels = channels;
    const std::string kind = spec.at("kind").get<std::string>();
    if (kind == "constant") {
        sig.kind = SignalInstance::Kind::Constant;
        sig.const_value = spec.at("value").get<Vec>();
        if (sig.const_value.size() == 1 && channels > 1) sig.const_value.assign(channels, sig.const_value[0]);
    } else if (kind == "pw_constant") {
        sig.kind = SignalInstance::Kind::PwConstant;
        sig.switch_times = spec.at("switch_times").get<std::vector<double>>();
        const double lo = spec.at("low").get<double>();
        const double hi = spec.at("high").get<double>();
        const std::size_t segs = sig.switch_times.size() + 1;
        sig.seg_values.resize(segs);
        for (std::size_t s = 0; s < segs; ++s) {
            sig.seg_values[s].resize(channels);
            for (std::size_t c = 0; c < channels; ++c) sig.seg_values[s][c] = rng.uniform(lo, hi);
        }
    } else if (kind == "pw_given") {
        // fixed per-segment values: each entry either a scalar (broadcast to
        // every channel) or an m-long array
        sig.kind = SignalInstance::Kind::PwConstant;
        sig.switch_times = spec.at("switch_times").get<std::vector<double>>();
        const auto& values = spec.at("values");
        if (values.size() != sig.switch_times.size() + 1)
            throw std::runtime_error("pw_given: need one value per segment");
        for (const auto& v : values) {
            if (v.is_number()) sig.seg_values.push_back(Vec(channels, v.get<double>()));
            else sig.seg_values.push_back(v.get<Vec>());
            if (sig.seg_values.back().size() != channels)
                throw std::runtime_error("pw_given: channel count mismatch");
        }
    } else if (kind == "ramp") {
        sig.kind = SignalInstance::Kind::Ramp;
        sig.ramp_t0 = spec.at("t0").get<double>();
        sig.ramp_t1 = spec.at("t1").get<double>();
        sig.ramp_v0.assign(channels, spec.at("v0").get<double>());
        sig.ramp_v1.assign(channels, spec.at("v1").get<double>());
    } else if (kind == "damped_sine") {
        sig.kind = SignalInstance::Kind::DampedSine;
        sig.ds_amp.assign(channels, spec.at("amp").get<double>());
        sig.ds_freq.assign(channels, spec.at("freq").get<double>());
        sig.ds_decay.assign(channels, spec.at("decay").get<double>());
        sig.ds_offset.assign(channels, spec.at("offset").get<double>());
    } else if (kind == "windows") {
        sig.kind = SignalInstance::Kind::Windows;
        sig.win_value.assign(channels, spec.at("value").get<double>());
        for (const auto& span : spec.at("spans"))
            sig.win_spans.emplace_back(span[0].get<double>(), span[1].get<double>());
    } else {
        throw std::runtime_error("draw_signal: unknown kind '" + kind + "'");
    }
    for (std::size_t s = 0; s + 1 < sig.switch_times.size(); ++s)
        if (!(sig.switch_times[s] < sig.switch_times[s + 1]))
            throw std::runtime_error("draw_signal: switch times must be strictly increasing");
    for (const auto& v : sig.seg_values)
        if (!all_finite(v)) throw std::runtime_error("draw_signal: non-finite segment value");
    return sig;
}

}  // namespace icode_lab
