#pragma once

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "icode_lab/contraction.hpp"
#include "icode_lab/harness.hpp"

namespace icode_lab {

namespace cli_detail {

struct CommonOpts {
    std::string config;
    std::string out = "out";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;
    bool quiet = false;
};

inline nlohmann::json rows_to_json(const std::vector<ComparisonRow>& rows) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json row = {{"model", r.model_kind},
                              {"scenario", r.scenario},
                              {"ok", r.ok},
                              {"best_epoch", r.best_epoch},
                              {"loss_curve", r.loss_curve}};
        if (r.ok)
            row["metrics"] = metrics_to_json(r.metrics);
        else
            row["error"] = r.error;
        arr.push_back(std::move(row));
    }
    return arr;
}

inline ExperimentConfig load_experiment(const nlohmann::json& j, const CommonOpts& o) {
    ExperimentConfig cfg = config_from_json(j);
    if (o.seed_set) cfg.seed = o.seed;
    return cfg;
}

inline Dataset obtain_dataset(const nlohmann::json& j, const ExperimentConfig& cfg,
                              std::size_t jobs) {
    if (j.contains("dataset_dir")) return load_dataset(j.at("dataset_dir").get<std::string>());
    return generate_dataset(cfg, jobs);
}

inline void write_json(const std::string& dir, const std::string& name,
                       const nlohmann::json& j) {
    atomic_write_file((std::filesystem::path(dir) / name).string(), j.dump(2) + "\n");
}

inline int cmd_generate(const nlohmann::json& j, const CommonOpts& o, std::size_t jobs) {
    const ExperimentConfig cfg = load_experiment(j, o);
    const Dataset ds = generate_dataset(cfg, jobs);
    save_dataset(ds, o.out);
    if (!o.quiet)
        std::cout << "generate: task=" << cfg.task << " trajectories=" << ds.trajs.size()
                  << " fingerprint=" << ds.fingerprint << " out=" << o.out << "\n";
    return 0;
}

inline int cmd_train(const nlohmann::json& j, const CommonOpts& o, std::size_t jobs) {
    const ExperimentConfig cfg = load_experiment(j, o);
    const Dataset ds = obtain_dataset(j, cfg, jobs);
    const TrainResult tr = train(cfg, ds, jobs);
    const Metrics met = evaluate(tr.model, ds, jobs);
    write_json(o.out, "model.json", model_to_json(tr.model));
    nlohmann::json eval_hist = nlohmann::json::array();
    for (const auto& [epoch, mse] : tr.eval_history) eval_hist.push_back({epoch, mse});
    write_json(o.out, "result.json",
               {{"config", config_to_json(cfg)},
                {"metrics", metrics_to_json(met)},
                {"loss_curve", tr.loss_curve},
                {"best_epoch", tr.best_epoch},
                {"eval_history", eval_hist},
                {"dataset_fingerprint", ds.fingerprint}});
    if (!o.quiet)
        std::cout << "train: task=" << cfg.task << " model=" << cfg.model.kind
                  << " best_epoch=" << tr.best_epoch << " pred_mse=" << format_double(met.mse)
                  << " out=" << o.out << "\n";
    return 0;
}

inline int cmd_eval(const nlohmann::json& j, const CommonOpts& o, std::size_t jobs) {
    const ExperimentConfig cfg = load_experiment(j, o);
    const VectorFieldModel model =
        model_from_json(nlohmann::json::parse(read_file(j.at("model_bundle").get<std::string>())));
    const Dataset ds = obtain_dataset(j, cfg, jobs);
    const Metrics met = evaluate(model, ds, jobs);
    write_json(o.out, "eval.json",
               {{"config", config_to_json(cfg)},
                {"metrics", metrics_to_json(met)},
                {"dataset_fingerprint", ds.fingerprint}});
    if (!o.quiet)
        std::cout << "eval: task=" << cfg.task << " mse=" << format_double(met.mse)
                  << " r2=" << format_double(met.r2) << " out=" << o.out << "\n";
    return 0;
}

inline int cmd_compare(const nlohmann::json& j, const CommonOpts& o, std::size_t jobs) {
    const ExperimentConfig cfg = load_experiment(j, o);
    const ComparisonResult res = run_comparison(cfg, jobs);
    atomic_write_file((std::filesystem::path(o.out) / "comparison.csv").string(),
                      comparison_csv(res.rows));
    write_json(o.out, "comparison.json",
               {{"config", config_to_json(cfg)},
                {"dataset_fingerprint", res.dataset_fingerprint},
                {"rows", rows_to_json(res.rows)}});
    if (!o.quiet) {
        std::cout << "compare: task=" << cfg.task;
        for (const auto& r : res.rows)
            std::cout << " " << r.model_kind << "="
                      << (r.ok ? format_double(r.metrics.mse) : std::string("failed"));
        std::cout << " out=" << o.out << "\n";
    }
    return 0;
}

inline int cmd_sweep(const nlohmann::json& j, const CommonOpts& o, std::size_t jobs) {
    const ExperimentConfig cfg = load_experiment(j, o);
    const std::vector<ComparisonRow> rows = run_sweep(cfg, j.at("sweep"), jobs);
    atomic_write_file((std::filesystem::path(o.out) / "sweep.csv").string(),
                      comparison_csv(rows));
    write_json(o.out, "sweep.json",
               {{"config", config_to_json(cfg)}, {"rows", rows_to_json(rows)}});
    std::size_t failed = 0;
    for (const auto& r : rows) failed += r.ok ? 0 : 1;
    if (!o.quiet)
        std::cout << "sweep: cells=" << rows.size() << " failed=" << failed << " out=" << o.out
                  << "\n";
    return 0;  // per-cell failures are data, not a run failure
}

inline int cmd_contraction(const nlohmann::json& j, const CommonOpts& o) {
    const VectorFieldModel model =
        model_from_json(nlohmann::json::parse(read_file(j.at("model_bundle").get<std::string>())));
    const IcodeModel* ic = std::get_if<IcodeModel>(&model);
    if (ic == nullptr)
        throw std::runtime_error("contraction-check: bundle must hold an icode model");
    const Box x_box = box_from_json(j.at("x_box"));
    const Box u_box = box_from_json(j.at("u_box"));
    const std::size_t samples = j.value("samples", std::size_t{2048});
    const double c_required = j.value("c_required", 0.0);
    const std::uint64_t seed = o.seed_set ? o.seed : j.value("seed", std::uint64_t{1});
    const ContractionReport report = contraction_scan(*ic, x_box, u_box, samples, c_required, seed);
    write_json(o.out, "contraction.json", report_to_json(report));
    if (!o.quiet)
        std::cout << "contraction-check: verdict=" << report.verdict()
                  << " worst_lambda=" << format_double(report.worst_lambda) << " out=" << o.out
                  << "\n";
    return 0;  // a violated verdict is a finding, not a failure
}

}  // namespace cli_detail

// Entry point shared by the binary and the tests. Exit codes: 0 success,
// 1 run failure, 2 usage error.
inline int run_cli(int argc, const char* const* argv) {
    using cli_detail::CommonOpts;
    CLI::App app{"system identification lab for input-driven neural ODEs", "icode_lab"};
    app.require_subcommand(1);

    const std::vector<std::pair<std::string, std::string>> sub_names = {
        {"generate", "simulate a dataset and write CSVs plus a manifest"},
        {"train", "fit one model and write the bundle plus metrics"},
        {"eval", "score an existing model bundle on a dataset"},
        {"compare", "train every model family on a shared dataset"},
        {"sweep", "grid study over one config axis"},
        {"contraction-check", "sample-based contraction certificate for an icode bundle"},
    };
    std::map<std::string, CommonOpts> opts;
    std::map<std::string, CLI::App*> subs;
    for (const auto& [name, desc] : sub_names) {
        CLI::App* sub = app.add_subcommand(name, desc);
        CommonOpts& o = opts[name];
        sub->add_option("--config", o.config, "JSON config path")->required();
        sub->add_option("--out", o.out, "output directory (default: out)");
        sub->add_option("--seed", o.seed, "override the config seed");
        sub->add_option("--jobs", o.jobs, "worker threads (0 = ICODE_LAB_JOBS or hardware)");
        sub->add_flag("--quiet", o.quiet, "suppress the summary line");
        subs[name] = sub;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        std::cout << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        std::cout << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    }

    const std::string name = app.get_subcommands().at(0)->get_name();
    CommonOpts& o = opts[name];
    o.seed_set = subs[name]->count("--seed") > 0;
    const std::size_t jobs = resolve_jobs(o.jobs);

    try {
        const nlohmann::json j = nlohmann::json::parse(read_file(o.config));
        std::filesystem::create_directories(o.out);
        if (name == "generate") return cli_detail::cmd_generate(j, o, jobs);
        if (name == "train") return cli_detail::cmd_train(j, o, jobs);
        if (name == "eval") return cli_detail::cmd_eval(j, o, jobs);
        if (name == "compare") return cli_detail::cmd_compare(j, o, jobs);
        if (name == "sweep") return cli_detail::cmd_sweep(j, o, jobs);
        if (name == "contraction-check") return cli_detail::cmd_contraction(j, o);
        std::cerr << "usage error: unknown subcommand '" << name << "'\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << name << " failed: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace icode_lab
