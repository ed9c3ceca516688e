#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "set2seq/harness/trainer.hpp"

namespace set2seq {

/// Paper-shaped result table: one row per method, one mean/std pair per column.
struct RecipeTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::pair<std::string, std::vector<Summary>>> rows;

    void write_csv(std::ostream& os) const {
        os << "method";
        for (const auto& c : columns) os << ',' << c << "_mean," << c << "_std";
        os << '\n';
        for (const auto& [label, cells] : rows) {
            os << label;
            for (const auto& s : cells) os << ',' << format_number(s.mean) << ',' << format_number(s.std);
            os << '\n';
        }
    }
};

inline const std::vector<std::string>& recipe_names() {
    static const std::vector<std::string> n{"tsp_generalization", "grammar_suite", "ruleset_ladder", "ablation"};
    return n;
}

struct RecipeContext {
    std::string ini_text;
    std::vector<std::string> overrides;  // user overrides, applied after the recipe's own
    std::string out_dir;
    std::ostream* progress = nullptr;
    std::vector<EvalReport> reports;  // every run-level report, in order

    RunConfig config(const std::vector<std::string>& preset) const {
        auto all = preset;
        all.insert(all.end(), overrides.begin(), overrides.end());
        return resolve_config(ini_text, all);
    }
};

namespace detail {

struct TrainedRun {
    RunConfig cfg;
    Splits data;
    std::function<EvalReport(const Dataset&)> eval;
};

inline TrainedRun train_run(RecipeContext& ctx, RunConfig cfg, const std::string& label, std::size_t run) {
    cfg.seed += run;
    validate_config(cfg);
    TrainedRun out{cfg, load_splits(cfg), {}};
    TrainOptions opt;
    opt.out_dir = (std::filesystem::path(ctx.out_dir) / "runs" / label / ("seed" + std::to_string(cfg.seed))).string();
    opt.progress = ctx.progress;
    if (ctx.progress) *ctx.progress << "[" << label << " seed " << cfg.seed << "]" << std::endl;
    with_precision(cfg.precision, [&](auto tag) {
        using T = decltype(tag);
        auto trained = std::make_shared<Model<T>>(train(TrainState<T>::fresh(cfg, out.data.train.front().dim()), out.data, opt).best);
        out.eval = [trained, cfg](const Dataset& ds) { return evaluate(*trained, ds, cfg); };
    });
    return out;
}

inline EvalReport labelled(EvalReport r, const std::string& label) {
    r.task = label;
    return r;
}

}  // namespace detail

/// Table 2 layout: rows Held–Karp, Random, SIT; columns n = 10, 15*, 20*.
inline RecipeTable recipe_tsp_generalization(RecipeContext& ctx) {
    auto base = ctx.config({"data.task=tsp", "tsp.n_min=5", "tsp.n_max=10", "data.test_count=100"});
    const std::vector<int> sizes{10, 15, 20};
    RecipeTable t{"tsp_generalization", {"n=10", "n=15*", "n=20*"}, {}};
    std::vector<std::vector<double>> hk(sizes.size()), rnd(sizes.size()), sit(sizes.size());
    for (std::size_t run = 0; run < base.runs; ++run) {
        auto tr = detail::train_run(ctx, base, "tsp", run);
        for (std::size_t j = 0; j < sizes.size(); ++j) {
            auto tc = tr.cfg;
            tc.data.test_n_min = tc.data.test_n_max = sizes[j];
            auto test = generate_test_set(tc);
            auto r = tr.eval(test);
            ctx.reports.push_back(detail::labelled(r, "tsp/n=" + std::to_string(sizes[j])));
            sit[j].push_back(r.mean("tour_length"));
            hk[j].push_back(r.mean("optimal_length"));
            SeededRng rng = SeededRng(tc.seed).derive(6);
            std::vector<Permutation> random;
            for (const auto& inst : test) random.emplace_back(rng.permutation(inst.size()));
            rnd[j].push_back(avg_tour_length(test, random, tc.data.tsp.closed_tour));
        }
    }
    auto row = [&](const std::string& label, const std::vector<std::vector<double>>& v) {
        std::vector<Summary> cells;
        for (const auto& xs : v) cells.push_back(summarize(xs));
        t.rows.emplace_back(label, cells);
    };
    row("Held-Karp", hk);
    row("Random", rnd);
    row("SIT", sit);
    return t;
}

/// Table 3 layout: one validity column per grammar kind.
inline RecipeTable recipe_grammar_suite(RecipeContext& ctx) {
    RecipeTable t{"grammar_suite", {"anbncn", "anbkcnk", "dyck"}, {}};
    std::vector<Summary> cells;
    int layers = 0;
    for (const auto& kind : t.columns) {
        auto cfg = ctx.config({"data.task=grammar", "grammar.kind=" + kind});
        layers = cfg.model.encoder.n_sit_layers;
        std::vector<double> v;
        for (std::size_t run = 0; run < cfg.runs; ++run) {
            auto tr = detail::train_run(ctx, cfg, "grammar_" + kind, run);
            auto r = tr.eval(tr.data.test);
            ctx.reports.push_back(detail::labelled(r, "grammar/" + kind));
            v.push_back(r.mean("validity"));
        }
        cells.push_back(summarize(v));
    }
    t.rows.emplace_back("SIT (" + std::to_string(layers) + " layers)", cells);
    return t;
}

/// Table 4 layout: rows SIT with 2, 3, 4 layers; columns ruleset order 3, 4, 5.
inline RecipeTable recipe_ruleset_ladder(RecipeContext& ctx) {
    RecipeTable t{"ruleset_ladder", {"n=3", "n=4", "n=5"}, {}};
    for (int layers : {2, 3, 4}) {
        std::vector<Summary> cells;
        for (int order : {3, 4, 5}) {
            auto cfg = ctx.config({"data.task=ruleset", "ruleset.order=" + std::to_string(order),
                                   "model.n_sit_layers=" + std::to_string(layers)});
            std::vector<double> v;
            for (std::size_t run = 0; run < cfg.runs; ++run) {
                const auto label = "ruleset_L" + std::to_string(layers) + "_n" + std::to_string(order);
                auto tr = detail::train_run(ctx, cfg, label, run);
                auto r = tr.eval(tr.data.test);
                ctx.reports.push_back(detail::labelled(r, "ruleset/L=" + std::to_string(layers) + "/n=" + std::to_string(order)));
                v.push_back(r.mean("validity"));
            }
            cells.push_back(summarize(v));
        }
        t.rows.emplace_back("SIT (" + std::to_string(layers) + " layers)", cells);
    }
    return t;
}

/// Two rows differing only in the set-vector augmentation.
inline RecipeTable recipe_ablation(RecipeContext& ctx) {
    RecipeTable t{"ablation", {"validity", "pmr", "tau"}, {}};
    for (bool augment : {true, false}) {
        auto cfg = ctx.config({"data.task=ruleset", "ruleset.order=3", std::string("model.augment_set=") + (augment ? "true" : "false")});
        std::vector<std::vector<double>> v(3);
        for (std::size_t run = 0; run < cfg.runs; ++run) {
            auto tr = detail::train_run(ctx, cfg, augment ? "ablation_sit" : "ablation_plain", run);
            auto r = tr.eval(tr.data.test);
            ctx.reports.push_back(detail::labelled(r, augment ? "ablation/augment_on" : "ablation/augment_off"));
            for (std::size_t j = 0; j < 3; ++j) v[j].push_back(r.mean(t.columns[j]));
        }
        std::vector<Summary> cells;
        for (const auto& xs : v) cells.push_back(summarize(xs));
        const auto layers = std::to_string(cfg.model.encoder.n_sit_layers);
        t.rows.emplace_back(augment ? "SIT (" + layers + " layers)" : "augment off (" + layers + " layers)", cells);
    }
    return t;
}

/// Runs a recipe and writes <out>/<name>.csv plus run-level reports.
inline RecipeTable run_recipe(const std::string& name, RecipeContext& ctx) {
    RecipeTable t;
    if (name == "tsp_generalization") t = recipe_tsp_generalization(ctx);
    else if (name == "grammar_suite") t = recipe_grammar_suite(ctx);
    else if (name == "ruleset_ladder") t = recipe_ruleset_ladder(ctx);
    else if (name == "ablation") t = recipe_ablation(ctx);
    else throw Error("unknown recipe '" + name + "' (valid: tsp_generalization, grammar_suite, ruleset_ladder, ablation)");
    if (!ctx.out_dir.empty()) {
        std::filesystem::create_directories(ctx.out_dir);
        std::ofstream csv((std::filesystem::path(ctx.out_dir) / (name + ".csv")).string());
        t.write_csv(csv);
        std::ofstream runs((std::filesystem::path(ctx.out_dir) / (name + "_runs.jsonl")).string());
        for (const auto& r : ctx.reports) runs << report_to_json(r).dump() << '\n';
    }
    return t;
}

}  // namespace set2seq
