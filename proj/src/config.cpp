#include "shapshift/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>

#include "shapshift/common.hpp"

namespace shapshift {

namespace {

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const unsigned long long v = std::stoull(trim(value), &pos);
        if (pos != trim(value).size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + value + "'");
    }
}

std::int64_t parse_i64(const std::string& key, const std::string& value) {
    try {
        std::size_t pos = 0;
        const long long v = std::stoll(trim(value), &pos);
        if (pos != trim(value).size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected an integer, got '" + value + "'");
    }
}

double parse_f64(const std::string& key, const std::string& value) {
    try {
        return parse_double_strict(value);
    } catch (const std::exception&) {
        throw ConfigError(key + ": expected a number, got '" + value + "'");
    }
}

}  // namespace

const std::vector<std::string>& known_config_keys() {
    static const std::vector<std::string> keys = {
        "data.path",           "data.target",
        "split.mode",          "split.n_train",
        "split.n_val",         "split.fractions",
        "split.seed",          "selector.q_low",
        "selector.q_high",     "selector.n_iter_prev",
        "selector.metric",     "selector.zero_tolerance",
        "selector.seed",       "model.n_trees",
        "model.learning_rate", "model.max_depth",
        "model.min_samples_leaf", "model.subsample",
        "bench.seeds",         "bench.algorithms",
        "bench.k",             "synth.kind",
        "synth.lambdas",       "synth.n_samples",
        "synth.seed",          "synth.noise_sd",
    };
    return keys;
}

void RunConfig::set(const std::string& key, const std::string& value) {
    const std::string v = trim(value);
    if (key == "data.path") data_path = v;
    else if (key == "data.target") data_target = v;
    else if (key == "split.mode") {
        if (v != "chronological" && v != "random")
            throw ConfigError("split.mode: expected chronological or random, got '" + v + "'");
        split_mode = v;
    } else if (key == "split.n_train") split_n_train = parse_u64(key, v);
    else if (key == "split.n_val") split_n_val = parse_u64(key, v);
    else if (key == "split.fractions") {
        const auto parts = split(v, ',');
        if (parts.size() != 3)
            throw ConfigError("split.fractions: expected three comma-separated values");
        for (int i = 0; i < 3; ++i) split_fractions[i] = parse_f64(key, parts[static_cast<std::size_t>(i)]);
    } else if (key == "split.seed") split_seed = parse_u64(key, v);
    else if (key == "selector.q_low") selector_q_low = parse_f64(key, v);
    else if (key == "selector.q_high") selector_q_high = parse_f64(key, v);
    else if (key == "selector.n_iter_prev") selector_n_iter_prev = static_cast<int>(parse_i64(key, v));
    else if (key == "selector.metric") selector_metric = v;
    else if (key == "selector.zero_tolerance") selector_zero_tolerance = parse_f64(key, v);
    else if (key == "selector.seed") selector_seed = parse_u64(key, v);
    else if (key == "model.n_trees") model_n_trees = static_cast<int>(parse_i64(key, v));
    else if (key == "model.learning_rate") model_learning_rate = parse_f64(key, v);
    else if (key == "model.max_depth") model_max_depth = static_cast<int>(parse_i64(key, v));
    else if (key == "model.min_samples_leaf")
        model_min_samples_leaf = static_cast<int>(parse_i64(key, v));
    else if (key == "model.subsample") model_subsample = parse_f64(key, v);
    else if (key == "bench.seeds") bench_seeds = v;
    else if (key == "bench.algorithms") bench_algorithms = v;
    else if (key == "bench.k") bench_k = parse_u64(key, v);
    else if (key == "synth.kind") synth_kind = v;
    else if (key == "synth.lambdas") synth_lambdas = v;
    else if (key == "synth.n_samples") synth_n_samples = parse_u64(key, v);
    else if (key == "synth.seed") synth_seed = parse_u64(key, v);
    else if (key == "synth.noise_sd") synth_noise_sd = parse_f64(key, v);
    else throw ConfigError("unknown config key '" + key + "'");
}

GbdtParams RunConfig::model_params() const {
    GbdtParams p;
    p.n_trees = model_n_trees;
    p.learning_rate = model_learning_rate;
    p.max_depth = model_max_depth;
    p.min_samples_leaf = model_min_samples_leaf;
    p.subsample = model_subsample;
    p.seed = selector_seed;
    p.validate();
    return p;
}

SelectorParams RunConfig::selector_params() const {
    SelectorParams sp;
    sp.quantiles.low = selector_q_low;
    sp.quantiles.high = selector_q_high;
    sp.n_iter_prev = selector_n_iter_prev;
    sp.metric = metric_from_string(selector_metric);
    sp.model_params = model_params();
    sp.seed = selector_seed;
    sp.zero_tolerance = selector_zero_tolerance;
    sp.validate();
    return sp;
}

ShiftScenario RunConfig::scenario() const {
    ShiftScenario s;
    s.kind = shift_kind_from_string(synth_kind);
    const auto parts = split(synth_lambdas, ',');
    if (parts.size() != 4)
        throw ConfigError("synth.lambdas: expected four comma-separated values (l1a,l1b,l2a,l2b)");
    s.lambda1_a = parse_f64("synth.lambdas", parts[0]);
    s.lambda1_b = parse_f64("synth.lambdas", parts[1]);
    s.lambda2_a = parse_f64("synth.lambdas", parts[2]);
    s.lambda2_b = parse_f64("synth.lambdas", parts[3]);
    s.n_samples = synth_n_samples;
    // Break point and ramp scale with the sample budget at the default
    // 2/3 : 1/6 proportions so desk-sized runs stay well-formed.
    if (synth_n_samples == 30000) {
        s.break_index = 20000;
        s.ramp_len = 5000;
    } else {
        s.break_index = synth_n_samples * 2 / 3;
        s.ramp_len = synth_n_samples / 6;
    }
    s.noise_sd = synth_noise_sd;
    s.seed = synth_seed;
    s.validate();
    return s;
}

std::vector<std::uint64_t> RunConfig::seed_list() const { return parse_seed_spec(bench_seeds); }

TableConfig RunConfig::table_config() const {
    TableConfig tc;
    tc.selector = selector_params();
    tc.seeds = seed_list();
    tc.k = bench_k;
    tc.shapeffects_configs.clear();
    tc.run_topk = false;
    tc.lasso_lambdas.clear();
    tc.run_keep_all = false;
    for (const std::string& raw : split(bench_algorithms, ',')) {
        const std::string name = trim(raw);
        if (name == "shapeffects") {
            tc.shapeffects_configs = {{0.25, 0.75}, {0.2, 0.8}, {0.15, 0.85}, {0.1, 0.9}, {0.05, 0.95}};
        } else if (name == "topk") {
            tc.run_topk = true;
        } else if (name == "lasso") {
            tc.lasso_lambdas = {0.01, 0.001, 0.0001, 0.00001};
        } else if (name == "keep_all") {
            tc.run_keep_all = true;
        } else if (!name.empty()) {
            throw ConfigError("bench.algorithms: unknown algorithm '" + name + "'");
        }
    }
    return tc;
}

SplitIndices RunConfig::make_split(const Dataset& ds) const {
    if (split_mode == "chronological") return split_chronological(ds, split_n_train, split_n_val);
    return split_random(ds, split_fractions[0], split_fractions[1], split_fractions[2],
                        split_seed);
}

void load_config_file(RunConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(line_no) +
                              ": expected `section.key = value`");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

void apply_env_overrides(RunConfig& cfg) {
    for (const std::string& key : known_config_keys()) {
        std::string env_name = "SHAPSHIFT_";
        for (char c : key)
            env_name += (c == '.') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        if (const char* value = std::getenv(env_name.c_str())) cfg.set(key, value);
    }
}

std::vector<std::uint64_t> parse_seed_spec(const std::string& spec) {
    const std::string s = trim(spec);
    std::vector<std::uint64_t> seeds;
    const std::size_t colon = s.find(':');
    if (colon != std::string::npos) {
        const std::uint64_t lo = parse_u64("bench.seeds", s.substr(0, colon));
        const std::uint64_t hi = parse_u64("bench.seeds", s.substr(colon + 1));
        if (hi < lo || hi - lo > 100000) throw ConfigError("bench.seeds: bad range '" + s + "'");
        for (std::uint64_t v = lo; v <= hi; ++v) seeds.push_back(v);
    } else {
        for (const std::string& tok : split(s, ','))
            if (!trim(tok).empty()) seeds.push_back(parse_u64("bench.seeds", tok));
    }
    if (seeds.empty()) throw ConfigError("bench.seeds: empty seed list");
    return seeds;
}

}  // namespace shapshift
