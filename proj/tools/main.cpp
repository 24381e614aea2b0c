// shapshift: feature selection for regression under concept shift.
//
// Subcommands: synth (scenario generator), select (backward elimination),
// shap (attribution dump), bench (multi-seed comparison tables).
// Exit codes: 0 success, 1 runtime failure, 2 configuration error.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "shapshift/bench.hpp"
#include "shapshift/common.hpp"
#include "shapshift/config.hpp"
#include "shapshift/dataset.hpp"
#include "shapshift/selector.hpp"
#include "shapshift/shapley.hpp"
#include "shapshift/synth.hpp"

namespace fs = std::filesystem;
using namespace shapshift;

namespace {

struct CliState {
    RunConfig cfg;
    std::string config_path;
    std::string out_dir = ".";
    std::optional<int> synth_case;
    bool per_seed = false;
    bool verify = false;
    bool verify_exact = false;
    // Raw flag overrides keyed by config key; applied after file and env.
    std::map<std::string, std::string> overrides;
};

void add_key_flag(CLI::App* cmd, CliState& st, const std::string& key,
                  const std::string& shorthand, const std::string& help) {
    std::string dotted = "--" + key;
    std::replace(dotted.begin(), dotted.end(), '_', '-');
    std::string names = dotted;
    if (!shorthand.empty()) {
        std::string sh = "--" + shorthand;
        names += "," + sh;
    }
    cmd->add_option_function<std::string>(
           names, [&st, key](const std::string& v) { st.overrides[key] = v; }, help)
        ->expected(1);
}

void add_common_flags(CLI::App* cmd, CliState& st) {
    cmd->add_option("--config", st.config_path, "flat `section.key = value` config file");
    cmd->add_option("--out", st.out_dir, "output directory (default: current)")
        ->capture_default_str();
}

void add_data_split_flags(CLI::App* cmd, CliState& st) {
    add_key_flag(cmd, st, "data.path", "data", "input CSV path");
    add_key_flag(cmd, st, "data.target", "target", "target column name");
    add_key_flag(cmd, st, "split.mode", "split-mode", "chronological or random");
    add_key_flag(cmd, st, "split.n_train", "n-train", "training rows (chronological mode)");
    add_key_flag(cmd, st, "split.n_val", "n-val", "validation rows (chronological mode)");
    add_key_flag(cmd, st, "split.fractions", "fractions", "train,val,test fractions (random mode)");
    add_key_flag(cmd, st, "split.seed", "split-seed", "random split seed");
}

void add_model_flags(CLI::App* cmd, CliState& st) {
    add_key_flag(cmd, st, "model.n_trees", "n-trees", "boosting iterations");
    add_key_flag(cmd, st, "model.learning_rate", "learning-rate", "shrinkage in (0,1]");
    add_key_flag(cmd, st, "model.max_depth", "max-depth", "tree depth limit");
    add_key_flag(cmd, st, "model.min_samples_leaf", "min-samples-leaf", "minimum rows per leaf");
    add_key_flag(cmd, st, "model.subsample", "subsample",
                 "per-tree row fraction (1 = deterministic)");
}

void add_selector_flags(CLI::App* cmd, CliState& st) {
    add_key_flag(cmd, st, "selector.q_low", "q-low", "lower error quantile");
    add_key_flag(cmd, st, "selector.q_high", "q-high", "upper error quantile");
    add_key_flag(cmd, st, "selector.n_iter_prev", "n-iter-prev", "shadow-phase iterations (0 = off)");
    add_key_flag(cmd, st, "selector.metric", "metric", "MAE, MSE, RMSE or R2");
    add_key_flag(cmd, st, "selector.zero_tolerance", "zero-tolerance", "no-effect threshold");
    add_key_flag(cmd, st, "selector.seed", "seed", "selector/model seed");
}

void add_synth_flags(CLI::App* cmd, CliState& st) {
    add_key_flag(cmd, st, "synth.kind", "kind", "sudden or incremental");
    add_key_flag(cmd, st, "synth.lambdas", "lambdas", "l1a,l1b,l2a,l2b coefficients");
    add_key_flag(cmd, st, "synth.n_samples", "n-samples", "sample budget");
    add_key_flag(cmd, st, "synth.seed", "synth-seed", "generator seed");
    add_key_flag(cmd, st, "synth.noise_sd", "noise-sd", "noise standard deviation");
}

// defaults < config file < environment < flags
void finalize_config(CliState& st) {
    if (!st.config_path.empty()) load_config_file(st.cfg, st.config_path);
    apply_env_overrides(st.cfg);
    for (const auto& [key, value] : st.overrides) st.cfg.set(key, value);
    if (st.synth_case) {
        const ShiftScenario c = representative_case(
            shift_kind_from_string(st.cfg.synth_kind), *st.synth_case);
        st.cfg.synth_lambdas = format_double(c.lambda1_a) + "," + format_double(c.lambda1_b) +
                               "," + format_double(c.lambda2_a) + "," +
                               format_double(c.lambda2_b);
    }
}

fs::path out_file(const CliState& st, const std::string& name) {
    fs::create_directories(st.out_dir);
    return fs::path(st.out_dir) / name;
}

Dataset load_input(const CliState& st) {
    if (st.cfg.data_path.empty())
        throw ConfigError("data.path is required (set --data or the config key)");
    return load_csv(st.cfg.data_path, st.cfg.data_target);
}

int cmd_synth(CliState& st) {
    const ShiftScenario scn = st.cfg.scenario();
    const Dataset ds = generate(scn);
    write_csv(ds, out_file(st, "dataset.csv").string());
    write_scenario_meta(scn, out_file(st, "dataset.meta").string());
    std::cout << "wrote " << ds.n_rows() << " rows x " << ds.n_features()
              << " features (+ target) to " << out_file(st, "dataset.csv").string() << "\n";
    return 0;
}

int cmd_select(CliState& st) {
    const SelectorParams params = st.cfg.selector_params();  // validate before I/O
    const Dataset ds = load_input(st);
    const SplitIndices idx = st.cfg.make_split(ds);
    const Dataset train = ds.take_rows(idx.train);
    const Dataset val = ds.take_rows(idx.val);

    const SelectionTrace trace = run_selection(train, val, params);
    write_trace_csv(trace, out_file(st, "trace.csv").string());
    {
        std::ofstream out(out_file(st, "selected_features.txt"));
        for (const auto& name : trace.best_feature_set) out << name << "\n";
    }
    std::cout << "selected " << trace.best_feature_set.size() << " features in "
              << trace.iterations.size() << " iterations (best "
              << metric_to_string(params.metric) << " " << format_double(trace.best_metric)
              << ")\n";
    return 0;
}

int cmd_shap(CliState& st) {
    GbdtParams params = st.cfg.model_params();  // validate before I/O
    const Dataset ds = load_input(st);
    const SplitIndices idx = st.cfg.make_split(ds);
    const Dataset train = ds.take_rows(idx.train);
    const Dataset val = ds.take_rows(idx.val);

    const GbdtModel model = fit(train, params);
    const ShapMatrix shap = tree_shap(model, val);
    const std::vector<double> pred = predict(model, val);
    write_shap_csv(shap, model, pred, out_file(st, "shap.csv").string());

    if (st.verify) {
        double worst = 0.0;
        for (std::size_t r = 0; r < shap.values.size(); ++r) {
            double total = shap.base_value;
            for (double v : shap.values[r]) total += v;
            const double tol = std::max(1e-8, 1e-8 * std::abs(pred[r]));
            worst = std::max(worst, std::abs(total - pred[r]) / tol);
        }
        if (worst >= 1.0) {
            std::cerr << "additivity check FAILED (worst ratio " << worst << ")\n";
            return 1;
        }
        std::cout << "additivity check passed on " << shap.values.size() << " rows\n";
    }
    if (st.verify_exact) {
        if (model.n_features() > 10)
            throw ConfigError("--verify-exact needs <= 10 features (got " +
                              std::to_string(model.n_features()) + ")");
        CoalitionValueSpec spec;
        double worst = 0.0;
        const std::size_t check_rows = std::min<std::size_t>(val.n_rows(), 20);
        for (std::size_t r = 0; r < check_rows; ++r) {
            const std::vector<double> row = val.row(r);
            const std::vector<double> exact = exact_shapley(model, row, spec);
            for (std::size_t j = 0; j < exact.size(); ++j)
                worst = std::max(worst, std::abs(exact[j] - shap.values[r][j]));
        }
        if (worst >= 1e-10) {
            std::cerr << "exact-oracle check FAILED (max deviation " << worst << ")\n";
            return 1;
        }
        std::cout << "exact-oracle check passed on " << check_rows << " rows\n";
    }
    std::cout << "wrote attributions for " << shap.values.size() << " rows to "
              << out_file(st, "shap.csv").string() << "\n";
    return 0;
}

int cmd_bench(CliState& st) {
    const TableConfig tc = st.cfg.table_config();  // validate before I/O
    Dataset ds = [&st] {
        if (!st.cfg.data_path.empty()) return load_input(st);
        return generate(st.cfg.scenario());  // scenario mode when no CSV given
    }();
    const SplitIndices idx = st.cfg.make_split(ds);
    const Dataset train = ds.take_rows(idx.train);
    const Dataset val = ds.take_rows(idx.val);
    const Dataset test = ds.take_rows(idx.test);
    if (test.n_rows() == 0) throw ConfigError("bench: test split is empty");

    const std::vector<MetricSummary> rows = run_table(train, val, test, tc);
    write_table_csv(rows, out_file(st, "results.csv").string());
    if (st.per_seed) {
        const std::vector<std::uint64_t> seeds =
            tc.seeds.empty() ? default_seed_list() : tc.seeds;
        write_per_seed_csv(rows, seeds, out_file(st, "results_per_seed.csv").string());
    }
    std::cout << "wrote " << rows.size() << " algorithm rows to "
              << out_file(st, "results.csv").string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"shapshift: Shapley/error-partition feature selection for regression"};
    app.require_subcommand(1);
    CliState st;

    CLI::App* synth = app.add_subcommand("synth", "generate a concept-shift dataset CSV");
    add_common_flags(synth, st);
    add_synth_flags(synth, st);
    synth->add_option("--case", st.synth_case, "representative coefficient case (1, 2 or 3)");

    CLI::App* select = app.add_subcommand("select", "run the backward-elimination selector");
    add_common_flags(select, st);
    add_data_split_flags(select, st);
    add_model_flags(select, st);
    add_selector_flags(select, st);

    CLI::App* shap = app.add_subcommand("shap", "dump validation Shapley attributions");
    add_common_flags(shap, st);
    add_data_split_flags(shap, st);
    add_model_flags(shap, st);
    add_key_flag(shap, st, "selector.seed", "seed", "model seed");
    shap->add_flag("--verify", st.verify, "check per-row additivity before writing");
    shap->add_flag("--verify-exact", st.verify_exact,
                   "cross-check against exhaustive enumeration (<= 10 features)");

    CLI::App* bench = app.add_subcommand("bench", "compare selectors over fixed seeds");
    add_common_flags(bench, st);
    add_data_split_flags(bench, st);
    add_model_flags(bench, st);
    add_selector_flags(bench, st);
    add_synth_flags(bench, st);
    bench->add_option("--case", st.synth_case, "representative coefficient case (1, 2 or 3)");
    bench->add_option_function<std::string>(
        "--scenario", [&st](const std::string& v) { st.overrides["synth.kind"] = v; },
        "alias for --kind (generated-scenario mode)");
    add_key_flag(bench, st, "bench.seeds", "seeds", "seed list `1:50` or `1,2,7`");
    add_key_flag(bench, st, "bench.algorithms", "algorithms",
                 "comma list: shapeffects,topk,lasso,keep_all");
    add_key_flag(bench, st, "bench.k", "k", "top-k size (0 = match shapeffects)");
    bench->add_flag("--per-seed", st.per_seed, "also write long-format per-seed CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        finalize_config(st);
        if (synth->parsed()) return cmd_synth(st);
        if (select->parsed()) return cmd_select(st);
        if (shap->parsed()) return cmd_shap(st);
        if (bench->parsed()) return cmd_bench(st);
        throw ConfigError("no subcommand given");
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
