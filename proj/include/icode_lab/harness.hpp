#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "icode_lab/bptt.hpp"
#include "icode_lab/integrate.hpp"
#include "icode_lab/io.hpp"
#include "icode_lab/metrics.hpp"
#include "icode_lab/models.hpp"
#include "icode_lab/parallel.hpp"
#include "icode_lab/rng.hpp"
#include "icode_lab/signals.hpp"
#include "icode_lab/systems.hpp"

namespace icode_lab {

struct TrainConfig {
    double lr = 1e-3;
    std::size_t epochs = 100;
    std::size_t batch_size = 0;  // 0 = full batch
    std::size_t eval_every = 10;
};

struct DataConfig {
    std::size_t trajectories = 10;
    TimeGrid grid;
    std::size_t split = 0;  // index of the first prediction point
    nlohmann::json signal;
    nlohmann::json system_params = nlohmann::json::object();
    double state_noise = 0.0;
    double input_noise = 0.0;
};

struct ExperimentConfig {
    std::string task;
    std::string scenario;
    ModelConfig model;
    TrainConfig train;
    DataConfig data;
    std::uint64_t seed = 1;

    void validate() const {
        data.grid.validate();
        if (data.split < 2 || data.split >= data.grid.points())
            throw std::invalid_argument("config: split must lie inside the grid");
        if (train.epochs == 0) throw std::invalid_argument("config: epochs must be > 0");
        if (cfg_width() == 0 || model.hidden_layers == 0)
            throw std::invalid_argument("config: width and depth must be >= 1");
        if (data.trajectories == 0)
            throw std::invalid_argument("config: need at least one trajectory");
    }

  private:
    std::size_t cfg_width() const { return model.width; }
};

// Hyperparameters and protocols of the seven benchmark tasks.
inline ExperimentConfig task_defaults(const std::string& task) {
    ExperimentConfig c;
    c.task = task;
    c.scenario = task;
    c.model.kind = "icode";
    auto pw_given = [](std::vector<double> times, std::vector<double> values) {
        return nlohmann::json{{"kind", "pw_given"}, {"switch_times", times}, {"values", values}};
    };
    if (task == "robot") {
        c.model.width = 50;
        c.model.hidden_layers = 3;
        c.model.d_a = 2;
        c.train = {5e-3, 100, 0, 10};
        c.data.trajectories = 10;
        c.data.grid = {0.0, 1.0, 100};
        c.data.split = 67;
        c.data.signal = pw_given({0.1, 0.4, 0.8}, {0.0, 0.5, 0.0, 0.5});
    } else if (task == "dcdc") {
        c.model.width = 60;
        c.model.hidden_layers = 3;
        c.model.d_a = 2;
        c.train = {5e-4, 600, 0, 10};
        c.data.trajectories = 10;
        c.data.grid = {0.0, 1.0, 74};
        c.data.split = 50;
        c.data.signal = pw_given({0.1, 0.5, 0.8}, {0.0, 1.0, 0.0, 1.0});
    } else if (task == "rigid") {
        c.model.width = 60;
        c.model.hidden_layers = 2;
        c.model.d_a = 2;
        c.train = {1e-3, 200, 0, 10};
        c.data.trajectories = 10;
        c.data.grid = {0.0, 1.0, 100};
        c.data.split = 67;
        c.data.signal = {{"kind", "pw_constant"},
                         {"switch_times", {0.1, 0.4, 0.8}},
                         {"low", -1.0},
                         {"high", 1.0}};
    } else if (task == "rf") {
        c.model.width = 60;
        c.model.hidden_layers = 3;
        c.model.d_a = 2;
        c.train = {5e-4, 800, 0, 10};
        c.data.trajectories = 40;
        c.data.grid = {0.0, 1.0, 50};
        c.data.split = 34;
        c.data.signal = {{"kind", "ramp"}, {"t0", 0.2}, {"t1", 1.0}, {"v0", 0.1}, {"v1", 1.0}};
    } else if (task == "glyco") {
        c.model.width = 60;
        c.model.hidden_layers = 3;
        c.model.d_a = 10;
        c.train = {5e-4, 500, 0, 10};
        c.data.trajectories = 10;
        c.data.grid = {0.0, 2.0, 100};
        c.data.split = 67;
        c.data.signal = {{"kind", "pw_constant"},
                         {"switch_times", {0.5, 1.0, 1.5}},
                         {"low", 0.0},
                         {"high", 0.5}};
    } else if (task == "swing") {
        c.model.width = 60;
        c.model.hidden_layers = 3;
        c.model.d_a = 50;
        c.train = {5e-4, 200, 16, 10};
        c.data.trajectories = 128;
        c.data.grid = {0.0, 5.0, 500};
        c.data.split = 334;
        c.data.signal = pw_given({0.5, 2.5, 4.5}, {0.0, 1.0, 0.0, 1.0});
    } else if (task == "heat1d") {
        c.model.width = 200;
        c.model.hidden_layers = 3;
        c.model.d_a = 200;
        c.train = {2e-3, 400, 0, 10};
        c.data.trajectories = 5;
        c.data.grid = {0.0, 0.018, 72};
        c.data.split = 48;
        c.data.signal = {
            {"kind", "damped_sine"}, {"amp", 2.0}, {"freq", 1.0}, {"decay", 0.2}, {"offset", 0.1}};
    } else if (task == "heat2d") {
        c.model.width = 200;
        c.model.hidden_layers = 3;
        c.model.d_a = 200;
        c.train = {2e-3, 400, 0, 10};
        c.data.trajectories = 5;
        c.data.grid = {0.0, 0.018, 72};
        c.data.split = 48;
        c.data.signal = {{"kind", "windows"},
                         {"value", 10.0},
                         {"spans", {{0.0018, 0.0072}, {0.0108, 0.0162}}}};
    } else {
        throw std::invalid_argument("unknown task '" + task + "'");
    }
    return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
    return {{"task", c.task},
            {"scenario", c.scenario},
            {"seed", c.seed},
            {"model",
             {{"kind", c.model.kind},
              {"M", c.model.M},
              {"d_a", c.model.d_a},
              {"width", c.model.width},
              {"hidden_layers", c.model.hidden_layers},
              {"bias", c.model.bias}}},
            {"train",
             {{"lr", c.train.lr},
              {"epochs", c.train.epochs},
              {"batch_size", c.train.batch_size},
              {"eval_every", c.train.eval_every}}},
            {"data",
             {{"trajectories", c.data.trajectories},
              {"grid", grid_to_json(c.data.grid)},
              {"split", c.data.split},
              {"signal", c.data.signal},
              {"system_params", c.data.system_params},
              {"state_noise", c.data.state_noise},
              {"input_noise", c.data.input_noise}}}};
}

// Sparse config: {"task": "robot"} picks the task defaults, any present field
// overrides them.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
    ExperimentConfig c = task_defaults(j.at("task").get<std::string>());
    c.scenario = j.value("scenario", c.scenario);
    c.seed = j.value("seed", c.seed);
    if (j.contains("model")) {
        const auto& m = j.at("model");
        c.model.kind = m.value("kind", c.model.kind);
        c.model.M = m.value("M", c.model.M);
        c.model.d_a = m.value("d_a", c.model.d_a);
        c.model.width = m.value("width", c.model.width);
        c.model.hidden_layers = m.value("hidden_layers", c.model.hidden_layers);
        c.model.bias = m.value("bias", c.model.bias);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        c.train.lr = t.value("lr", c.train.lr);
        c.train.epochs = t.value("epochs", c.train.epochs);
        c.train.batch_size = t.value("batch_size", c.train.batch_size);
        c.train.eval_every = t.value("eval_every", c.train.eval_every);
    }
    if (j.contains("data")) {
        const auto& d = j.at("data");
        if (d.contains("grid")) c.data.grid = grid_from_json(d.at("grid"));
        c.data.trajectories = d.value("trajectories", c.data.trajectories);
        c.data.split = d.value("split", c.data.split);
        if (d.contains("signal")) c.data.signal = d.at("signal");
        if (d.contains("system_params")) c.data.system_params = d.at("system_params");
        c.data.state_noise = d.value("state_noise", c.data.state_noise);
        c.data.input_noise = d.value("input_noise", c.data.input_noise);
    }
    return c;
}

// A generated (or reloaded) experiment dataset. `signals` carries the
// continuous-time inputs; when input_noise > 0 consumers fall back to the
// recorded noisy samples instead.
struct Dataset {
    std::string system;
    nlohmann::json system_params;
    TimeGrid grid;
    std::size_t split = 0;
    std::uint64_t seed = 0;
    nlohmann::json signal_spec;
    double state_noise = 0.0;
    double input_noise = 0.0;
    std::vector<Trajectory> trajs;
    std::vector<SignalInstance> signals;
    std::string fingerprint;

    std::size_t n() const { return trajs.empty() ? 0 : trajs[0].n(); }
    std::size_t m() const { return trajs.empty() ? 0 : trajs[0].m(); }

    TrajectorySampler sampler(std::size_t r) const {
        TrajectorySampler s;
        s.sig = &signals[r];
        s.grid = &grid;
        if (input_noise > 0.0) s.samples = &trajs[r].inputs;
        return s;
    }
};

inline void fingerprint_dataset(Dataset& ds) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& traj : ds.trajs) h = fnv1a(trajectory_to_csv(traj), h);
    ds.fingerprint = hex64(h);
}

inline Dataset generate_dataset(const ExperimentConfig& cfg, std::size_t jobs = 1) {
    cfg.validate();
    Rng sys_rng(cfg.seed, stream::system_params);
    const TruthSystem sys = make_system(cfg.task, cfg.data.system_params, &sys_rng);

    Dataset ds;
    ds.system = sys.name;
    ds.system_params = sys.params;
    ds.grid = cfg.data.grid;
    ds.split = cfg.data.split;
    ds.seed = cfg.seed;
    ds.signal_spec = cfg.data.signal;
    ds.state_noise = cfg.data.state_noise;
    ds.input_noise = cfg.data.input_noise;
    ds.trajs.resize(cfg.data.trajectories);
    ds.signals.resize(cfg.data.trajectories);

    parallel_for(cfg.data.trajectories, jobs, [&](std::size_t r) {
        Rng sig_rng(cfg.seed, stream::signal, r);
        ds.signals[r] = draw_signal(cfg.data.signal, sys.m, sig_rng);
        Rng ic_rng(cfg.seed, stream::initial_state, r);
        const Vec x0 = sys.sample_x0(ic_rng);
        const SignalInstance& sig = ds.signals[r];
        auto u_of_t = [&sig](double t, double* out) { sig.value(t, out); };
        Trajectory traj = rollout(sys.rhs, x0, u_of_t, sys.m, cfg.data.grid);
        if (cfg.data.state_noise > 0.0)
            traj = add_state_noise(traj, cfg.data.state_noise, hash_combine(cfg.seed, r));
        if (cfg.data.input_noise > 0.0)
            traj.inputs =
                add_input_noise(traj.inputs, cfg.data.input_noise, hash_combine(cfg.seed, r));
        ds.trajs[r] = std::move(traj);
    });
    fingerprint_dataset(ds);
    return ds;
}

inline void save_dataset(const Dataset& ds, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    char name[32];
    for (std::size_t r = 0; r < ds.trajs.size(); ++r) {
        std::snprintf(name, sizeof name, "traj_%03zu.csv", r);
        atomic_write_file((fs::path(dir) / name).string(), trajectory_to_csv(ds.trajs[r]));
    }
    nlohmann::json manifest = {{"system", ds.system},
                               {"system_params", ds.system_params},
                               {"grid", grid_to_json(ds.grid)},
                               {"split", ds.split},
                               {"seed", ds.seed},
                               {"signal", ds.signal_spec},
                               {"state_noise", ds.state_noise},
                               {"input_noise", ds.input_noise},
                               {"trajectories", ds.trajs.size()},
                               {"fingerprint", ds.fingerprint}};
    atomic_write_file((fs::path(dir) / "manifest.json").string(), manifest.dump(2) + "\n");
}

inline Dataset load_dataset(const std::string& dir) {
    namespace fs = std::filesystem;
    const nlohmann::json manifest =
        nlohmann::json::parse(read_file((fs::path(dir) / "manifest.json").string()));
    Dataset ds;
    ds.system = manifest.at("system").get<std::string>();
    ds.system_params = manifest.at("system_params");
    ds.grid = grid_from_json(manifest.at("grid"));
    ds.split = manifest.at("split").get<std::size_t>();
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.signal_spec = manifest.at("signal");
    ds.state_noise = manifest.value("state_noise", 0.0);
    ds.input_noise = manifest.value("input_noise", 0.0);
    const std::size_t R = manifest.at("trajectories").get<std::size_t>();
    const TruthSystem sys = make_system(ds.system, ds.system_params, nullptr);
    char name[32];
    for (std::size_t r = 0; r < R; ++r) {
        std::snprintf(name, sizeof name, "traj_%03zu.csv", r);
        Trajectory traj = trajectory_from_csv(read_file((fs::path(dir) / name).string()));
        traj.grid = ds.grid;  // authoritative over CSV-derived times
        ds.trajs.push_back(std::move(traj));
        Rng sig_rng(ds.seed, stream::signal, r);
        ds.signals.push_back(draw_signal(ds.signal_spec, sys.m, sig_rng));
    }
    fingerprint_dataset(ds);
    if (manifest.contains("fingerprint") &&
        manifest.at("fingerprint").get<std::string>() != ds.fingerprint)
        throw std::runtime_error("load_dataset: fingerprint mismatch (dataset edited?)");
    return ds;
}

// Prediction protocol: restart from the measured state at the last training
// point, roll with known future inputs, score grid points split..end.
inline Metrics evaluate(const VectorFieldModel& model, const Dataset& ds, std::size_t jobs = 1) {
    const std::size_t R = ds.trajs.size();
    const std::size_t start = ds.split - 1;
    const std::size_t n_steps = ds.grid.steps - start;
    std::vector<MetricsAccumulator> slots(R);
    std::vector<double> traj_mse(R);

    parallel_for(R, jobs, [&](std::size_t r) {
        BpttWorkspace ws;
        const Trajectory pred =
            model_rollout(model, ds.trajs[r].states[start], ds.sampler(r), ds.grid, start, n_steps, ws);
        MetricsAccumulator& acc = slots[r];
        for (std::size_t k = 1; k <= n_steps; ++k) {
            const Vec& truth = ds.trajs[r].states[start + k];
            const Vec& hat = pred.states[k];
            for (std::size_t i = 0; i < truth.size(); ++i) acc.add(truth[i], hat[i]);
        }
        traj_mse[r] = acc.ss_res / static_cast<double>(acc.count);
    });

    // merge in a canonical order so the pooled result is exactly invariant
    // to how trajectories happen to be stored
    std::vector<std::size_t> order(R);
    for (std::size_t r = 0; r < R; ++r) order[r] = r;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const MetricsAccumulator &A = slots[a], &B = slots[b];
        return std::tie(A.ss_res, A.abs_sum, A.truth_sum, A.truth_sq_sum, A.count) <
               std::tie(B.ss_res, B.abs_sum, B.truth_sum, B.truth_sq_sum, B.count);
    });
    MetricsAccumulator total;
    for (std::size_t r : order) total.merge(slots[r]);
    Metrics met = total.finish();
    met.per_traj_mse = traj_mse;
    return met;
}

struct TrainResult {
    VectorFieldModel model;  // best snapshot per the periodic-eval rule
    std::vector<double> loss_curve;
    std::vector<std::pair<std::size_t, double>> eval_history;  // (epoch, prediction mse)
    double best_pred_mse = std::numeric_limits<double>::infinity();
    std::size_t best_epoch = 0;
};

inline TrainResult train(const ExperimentConfig& cfg, const Dataset& ds, std::size_t jobs = 1) {
    cfg.validate();
    const std::size_t R = ds.trajs.size();
    const std::size_t n = ds.n(), m = ds.m();

    ModelConfig mc = cfg.model;
    mc.n = n;
    mc.m = m;
    Rng weight_rng(cfg.seed, stream::weights);
    VectorFieldModel model = make_model(mc, weight_rng);
    ModelAdam adam = ModelAdam::init(model, AdamParams{cfg.train.lr, 0.9, 0.999, 1e-8});

    // training targets: the first `split` grid points of each trajectory
    std::vector<std::vector<Vec>> targets(R);
    for (std::size_t r = 0; r < R; ++r)
        targets[r].assign(ds.trajs[r].states.begin(), ds.trajs[r].states.begin() + ds.split);

    const std::size_t batch = cfg.train.batch_size == 0 ? R : std::min(cfg.train.batch_size, R);
    std::vector<ModelGrad> grad_slots;
    std::vector<double> loss_slots(batch, 0.0);
    std::vector<BpttWorkspace> ws_slots(batch);
    for (std::size_t b = 0; b < batch; ++b) grad_slots.push_back(ModelGrad::zeros_like(model));
    ModelGrad total = ModelGrad::zeros_like(model);

    TrainResult result;
    result.loss_curve.reserve(cfg.train.epochs);

    for (std::size_t epoch = 0; epoch < cfg.train.epochs; ++epoch) {
        double epoch_loss = 0.0;
        for (std::size_t b0 = 0; b0 < R; b0 += batch) {
            const std::size_t bs = std::min(batch, R - b0);
            parallel_for(bs, jobs, [&](std::size_t i) {
                grad_slots[i].set_zero();
                loss_slots[i] = rollout_loss_grad(model, targets[b0 + i][0], ds.sampler(b0 + i),
                                                  ds.grid, targets[b0 + i], grad_slots[i],
                                                  ws_slots[i]);
            });
            total.set_zero();
            for (std::size_t i = 0; i < bs; ++i) {
                total.add_scaled(grad_slots[i], 1.0 / static_cast<double>(bs));
                epoch_loss += loss_slots[i];
            }
            model_adam_step(adam, model, total);
        }
        result.loss_curve.push_back(epoch_loss / static_cast<double>(R));

        const bool last = epoch + 1 == cfg.train.epochs;
        if ((epoch + 1) % cfg.train.eval_every == 0 || last) {
            double pred_mse = std::numeric_limits<double>::infinity();
            try {
                pred_mse = evaluate(model, ds, jobs).mse;
            } catch (const IntegrationError&) {
                // diverged candidate: never the best snapshot
            }
            result.eval_history.emplace_back(epoch + 1, pred_mse);
            if (pred_mse < result.best_pred_mse) {
                result.best_pred_mse = pred_mse;
                result.best_epoch = epoch + 1;
                result.model = model;
            }
        }
    }
    if (!std::isfinite(result.best_pred_mse))
        throw std::runtime_error("train: every evaluated snapshot diverged");
    return result;
}

// ---- comparison and sweeps ----

struct ComparisonRow {
    std::string model_kind;
    std::string scenario;
    Metrics metrics;
    std::vector<double> loss_curve;
    std::size_t best_epoch = 0;
    bool ok = true;
    std::string error;
};

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "model,scenario,mse,mae,rmse,r2\n";
    for (const auto& r : rows) {
        const double bad = std::numeric_limits<double>::quiet_NaN();
        out += r.model_kind + "," + r.scenario + ",";
        out += format_double(r.ok ? r.metrics.mse : bad) + ",";
        out += format_double(r.ok ? r.metrics.mae : bad) + ",";
        out += format_double(r.ok ? r.metrics.rmse : bad) + ",";
        out += format_double(r.ok ? r.metrics.r2 : bad) + "\n";
    }
    return out;
}

struct ComparisonResult {
    std::vector<ComparisonRow> rows;
    std::string dataset_fingerprint;
};

// Trains every model family on one shared dataset.
inline ComparisonResult run_comparison(const ExperimentConfig& base, std::size_t jobs = 1) {
    const Dataset ds = generate_dataset(base, jobs);
    ComparisonResult result;
    result.dataset_fingerprint = ds.fingerprint;
    for (const std::string kind : {"icode", "cde", "node", "anode"}) {
        ExperimentConfig cfg = base;
        cfg.model.kind = kind;
        ComparisonRow row;
        row.model_kind = kind;
        row.scenario = base.scenario;
        try {
            TrainResult tr = train(cfg, ds, jobs);
            row.metrics = evaluate(tr.model, ds, jobs);
            row.loss_curve = std::move(tr.loss_curve);
            row.best_epoch = tr.best_epoch;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        result.rows.push_back(std::move(row));
    }
    return result;
}

// Grid studies over one axis; failed cells are recorded and the sweep
// continues.
inline std::vector<ComparisonRow> run_sweep(const ExperimentConfig& base,
                                            const nlohmann::json& axis, std::size_t jobs = 1) {
    std::vector<std::pair<std::string, ExperimentConfig>> cells;
    const std::string kind = axis.at("axis").get<std::string>();
    if (kind == "width_depth") {
        for (const auto& w : axis.at("widths"))
            for (const auto& d : axis.at("depths")) {
                ExperimentConfig c = base;
                c.model.width = w.get<std::size_t>();
                c.model.hidden_layers = d.get<std::size_t>();
                cells.emplace_back(
                    "w" + std::to_string(c.model.width) + "_d" + std::to_string(c.model.hidden_layers),
                    c);
            }
    } else if (kind == "noise") {
        const std::string target = axis.value("target", "state");
        for (const auto& lv : axis.at("levels")) {
            ExperimentConfig c = base;
            const double level = lv.get<double>();
            (target == "input" ? c.data.input_noise : c.data.state_noise) = level;
            cells.emplace_back("noise_" + target + "_" + format_double(level), c);
        }
    } else if (kind == "input_span") {
        for (const auto& lv : axis.at("levels")) {
            ExperimentConfig c = base;
            const double k_u = lv.get<double>();
            c.data.signal["kind"] = "pw_constant";
            c.data.signal["low"] = -k_u;
            c.data.signal["high"] = k_u;
            if (!c.data.signal.contains("switch_times"))
                c.data.signal["switch_times"] = {0.1, 0.4, 0.8};
            c.data.signal.erase("values");
            cells.emplace_back("k_u_" + format_double(k_u), c);
        }
    } else if (kind == "switch_dt") {
        const double high = axis.value("high", 0.5);
        for (const auto& dv : axis.at("deltas")) {
            ExperimentConfig c = base;
            const double delta = dv.get<double>();
            std::vector<double> times;
            std::vector<double> values{0.0};
            for (double t = delta; t < c.data.grid.t1 - 1e-12; t += delta) {
                times.push_back(t);
                values.push_back(values.size() % 2 == 1 ? high : 0.0);
            }
            c.data.signal = {{"kind", "pw_given"}, {"switch_times", times}, {"values", values}};
            cells.emplace_back("switch_dt_" + format_double(delta), c);
        }
    } else {
        throw std::invalid_argument("run_sweep: unknown axis '" + kind + "'");
    }

    std::vector<ComparisonRow> rows;
    for (auto& [label, cfg] : cells) {
        ComparisonRow row;
        row.model_kind = cfg.model.kind;
        row.scenario = label;
        try {
            const Dataset ds = generate_dataset(cfg, jobs);
            TrainResult tr = train(cfg, ds, jobs);
            row.metrics = evaluate(tr.model, ds, jobs);
            row.loss_curve = std::move(tr.loss_curve);
            row.best_epoch = tr.best_epoch;
        } catch (const std::exception& e) {
            row.ok = false;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

}  // namespace icode_lab
