#pragma once

#include <filesystem>
#include <algorithm>
#include <fstream>
#include <map>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "set2seq/harness/recipes.hpp"
#include "set2seq/numerics/gradcheck.hpp"

namespace set2seq {

namespace detail {

inline std::string read_text(const std::string& path) {
    if (path.empty()) return "";
    std::ifstream is(path);
    require(static_cast<bool>(is), "cannot read config '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::ofstream os(p);
    require(static_cast<bool>(os), "cannot write '" + p.string() + "'");
    os << text;
}

inline void write_reports(const std::filesystem::path& dir, const std::vector<EvalReport>& reports) {
    std::filesystem::create_directories(dir);
    std::ofstream csv(dir / "report.csv");
    write_report_csv(reports, csv);
    std::ofstream js(dir / "report.jsonl");
    for (const auto& r : reports) js << report_to_json(r).dump() << '\n';
}

inline void print_report(const EvalReport& r, std::ostream& os) {
    os << r.task << " [" << r.config_hash << "]\n";
    for (const auto& [name, s] : r.metrics) os << "  " << name << " = " << pm(s, 4) << " (n=" << s.count << ")\n";
}

}  // namespace detail

/// set2seq command line. Returns the process exit code.
inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Set-to-sequence models with the Set Interdependence Transformer"};
    app.require_subcommand(1);
    std::string config_path, out_dir, checkpoint, data_path, recipe, resume, metrics;
    std::vector<std::string> overrides, inputs;
    std::uint64_t seed = 0;
    std::size_t max_coords = 0;
    double eps = 3e-4;
    bool quiet = false;

    auto common = [&](CLI::App* sub, bool with_out) {
        sub->add_option("--config", config_path, "Config file (INI: [section] key = value)");
        sub->add_option("--seed", seed, "Run seed (same as --override run.seed=N)");
        sub->add_option("--override", overrides, "Dotted key=value, e.g. optim.lr=1e-3")->take_all();
        if (with_out) sub->add_option("--out", out_dir, "Output directory")->required();
    };
    auto* gen = app.add_subcommand("generate", "Generate train/test datasets");
    common(gen, true);
    auto* trn = app.add_subcommand("train", "Train, then evaluate the best checkpoint on the test split");
    common(trn, true);
    trn->add_option("--resume", resume, "Checkpoint to resume from");
    trn->add_flag("--quiet", quiet, "No per-epoch progress");
    auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    evl->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    evl->add_option("--data", data_path, "Dataset (line-delimited JSON)")->required();
    evl->add_option("--metrics", metrics, "Comma-separated subset of metrics to report");
    evl->add_option("--out", out_dir, "Directory for report.csv / report.jsonl");
    auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check of the configured model");
    common(gc, false);
    gc->add_option("--max-coords", max_coords, "Coordinates sampled per parameter (0 = all)");
    gc->add_option("--eps", eps, "Central-difference step");
    auto* rec = app.add_subcommand("recipe", "Run a paper experiment recipe");
    rec->add_option("name", recipe, "tsp_generalization | grammar_suite | ruleset_ladder | ablation")->required();
    common(rec, true);
    rec->add_flag("--quiet", quiet, "No per-epoch progress");
    auto* rep = app.add_subcommand("report", "Aggregate run-level report.jsonl files into mean ± std");
    rep->add_option("inputs", inputs, "report.jsonl files")->required();
    rep->add_option("--out", out_dir, "Output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        auto resolved = [&] {
            auto ov = overrides;
            if (seed) ov.push_back("run.seed=" + std::to_string(seed));
            auto c = resolve_config(detail::read_text(config_path), ov, config_path.empty() ? "<defaults>" : config_path);
            validate_config(c);
            return c;
        };
        namespace fs = std::filesystem;

        if (*gen) {
            auto c = resolved();
            fs::create_directories(out_dir);
            auto pool = generate_train_pool(c);
            save_dataset(pool, (fs::path(out_dir) / "train.jsonl").string());
            std::size_t n_test = 0;
            if (c.data.test_count > 0) {
                auto test = generate_test_set(c);
                n_test = test.size();
                save_dataset(test, (fs::path(out_dir) / "test.jsonl").string());
            }
            detail::write_text(fs::path(out_dir) / "config.ini", to_ini(c));
            out << "wrote " << pool.size() << " training and " << n_test << " test instances to " << out_dir << "\n";
            return 0;
        }
        if (*trn) {
            auto c = resolved();
            fs::create_directories(out_dir);
            detail::write_text(fs::path(out_dir) / "config.ini", to_ini(c));
            auto data = load_splits(c);
            TrainOptions opt;
            opt.out_dir = out_dir;
            opt.progress = quiet ? nullptr : &err;
            return with_precision(c.precision, [&](auto tag) {
                using T = decltype(tag);
                auto state = resume.empty() ? TrainState<T>::fresh(c, data.train.front().dim()) : load_checkpoint<T>(resume);
                if (!resume.empty()) {
                    auto saved = state.config;
                    saved.optim.epochs = c.optim.epochs;
                    require(config_hash(saved) == config_hash(c),
                            "--resume: checkpoint config hash " + config_hash(saved) + " differs from the requested config " + config_hash(c) +
                                " (only optim.epochs may change)");
                    state.config = c;
                }
                auto res = train(std::move(state), data, opt);
                std::vector<EvalReport> reports;
                if (!data.test.empty()) reports.push_back(evaluate(res.best, data.test, c));
                if (!reports.empty()) {
                    detail::write_reports(out_dir, reports);
                    detail::print_report(reports.front(), out);
                }
                out << "best epoch " << res.last.best_epoch << ", checkpoints in " << out_dir << "\n";
                return 0;
            });
        }
        if (*evl) {
            auto meta = read_checkpoint_header(checkpoint).meta;
            const auto ds = load_dataset(data_path);
            require(!ds.empty(), data_path + ": no instances");
            const auto precision = meta.at("precision").get<std::string>() == "double" ? Precision::dbl : Precision::single;
            auto r = with_precision(precision, [&](auto tag) {
                using T = decltype(tag);
                auto s = load_checkpoint<T>(checkpoint);
                return evaluate(s.model, ds, s.config);
            });
            if (!metrics.empty()) {
                std::map<std::string, Summary> keep;
                std::stringstream ss(metrics);
                for (std::string m; std::getline(ss, m, ',');) {
                    require(r.metrics.count(m) != 0, "metric '" + m + "' is not available for task " + r.task);
                    keep[m] = r.metrics[m];
                }
                r.metrics = keep;
            }
            detail::print_report(r, out);
            if (!out_dir.empty()) detail::write_reports(out_dir, {r});
            return 0;
        }
        if (*gc) {
            auto c = resolved();
            c.precision = Precision::dbl;
            c.optim.dropout = 0.0;
            auto cfg = c;
            cfg.data.train_count = 1;
            cfg.data.val_fraction = 0;
            cfg.data.test_count = 0;
            auto inst = cfg.data.train_path.empty() ? generate_train_pool(cfg).front() : load_dataset(cfg.data.train_path).front();
            Model<double> model(c.model_for(inst.dim()), c.seed);
            auto lc = c.loss();
            lc.pair_cap = 0;
            auto report = grad_check<double>(
                model.store(),
                [&](Tape<double>& tape) {
                    Context<double> ctx(tape, model.store());
                    auto r = model.loss(ctx, inst.elements, full_mask(inst.size()), *inst.target, lc);
                    return ad::add(r.nll, ad::scale(r.l_s, lc.paper_sign ? -lc.lambda : lc.lambda));
                },
                eps, 1e-3, max_coords, c.seed);
            for (const auto& e : report.entries)
                out << e.name << " coords=" << e.coords_checked << " max_rel_error=" << e.max_rel_error << " analytic=" << e.analytic_at_worst << " numeric=" << e.numeric_at_worst << "\n";
            out << (report.passed() ? "PASS" : "FAIL") << " worst relative error " << report.worst() << " (n=" << inst.size() << ")\n";
            return report.passed() ? 0 : 1;
        }
        if (*rec) {
            RecipeContext ctx;
            ctx.ini_text = detail::read_text(config_path);
            ctx.overrides = overrides;
            if (seed) ctx.overrides.push_back("run.seed=" + std::to_string(seed));
            ctx.out_dir = out_dir;
            ctx.progress = quiet ? nullptr : &err;
            auto table = run_recipe(recipe, ctx);
            table.write_csv(out);
            return 0;
        }
        if (*rep) {
            std::map<std::string, std::vector<EvalReport>> groups;
            std::vector<std::string> order;
            for (const auto& path : inputs) {
                std::ifstream is(path);
                require(static_cast<bool>(is), "cannot read '" + path + "'");
                std::size_t lineno = 0;
                for (std::string line; std::getline(is, line);) {
                    ++lineno;
                    if (line.empty()) continue;
                    EvalReport r;
                    try {
                        r = report_from_json(nlohmann::json::parse(line));
                    } catch (const std::exception& e) {
                        throw Error(path + ":" + std::to_string(lineno) + ": " + e.what());
                    }
                    if (!groups.count(r.task)) order.push_back(r.task);
                    groups[r.task].push_back(std::move(r));
                }
            }
            std::vector<EvalReport> agg;
            for (const auto& task : order) agg.push_back(aggregate_runs(groups[task]));
            if (out_dir.empty()) {
                write_report_csv(agg, out);
            } else {
                std::ofstream os(out_dir);
                require(static_cast<bool>(os), "cannot write '" + out_dir + "'");
                write_report_csv(agg, os);
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        err << "error: " << msg << "\n";
        return 1;
    }
    return 1;
}

}  // namespace set2seq
