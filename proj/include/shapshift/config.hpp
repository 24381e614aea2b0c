#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "shapshift/bench.hpp"
#include "shapshift/dataset.hpp"
#include "shapshift/gbdt.hpp"
#include "shapshift/selector.hpp"
#include "shapshift/synth.hpp"

namespace shapshift {

// ---------------------------------------------------------------------------
// Flat plain-text run configuration: one `section.key = value` per line,
// '#' comments. Unknown keys are rejected. Precedence (lowest to highest):
// built-in defaults, config file, SHAPSHIFT_* environment variables, CLI
// flags.
// ---------------------------------------------------------------------------
struct RunConfig {
    // data.*
    std::string data_path;
    std::string data_target = "y";
    // split.*
    std::string split_mode = "chronological";  // or "random"
    std::size_t split_n_train = 20000;
    std::size_t split_n_val = 5000;
    double split_fractions[3] = {0.6, 0.2, 0.2};
    std::uint64_t split_seed = 0;
    // selector.*
    double selector_q_low = 0.1;
    double selector_q_high = 0.9;
    int selector_n_iter_prev = 30;
    std::string selector_metric = "MAE";
    double selector_zero_tolerance = 0.0;
    std::uint64_t selector_seed = 0;
    // model.*
    int model_n_trees = 250;
    double model_learning_rate = 0.1;
    int model_max_depth = 6;
    int model_min_samples_leaf = 20;
    double model_subsample = 1.0;
    // bench.*
    std::string bench_seeds = "1:50";
    std::string bench_algorithms = "shapeffects,topk,lasso,keep_all";
    std::size_t bench_k = 0;
    // synth.*
    std::string synth_kind = "sudden";
    std::string synth_lambdas = "-10,-4,10,-25";
    std::size_t synth_n_samples = 30000;
    std::uint64_t synth_seed = 0;
    double synth_noise_sd = 0.1;

    // Assign one key; throws ConfigError for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);

    GbdtParams model_params() const;
    SelectorParams selector_params() const;
    ShiftScenario scenario() const;         // from synth.*
    std::vector<std::uint64_t> seed_list() const;  // from bench.seeds
    TableConfig table_config() const;

    // Applies split.* to a dataset.
    SplitIndices make_split(const Dataset& ds) const;
};

// Parse a config file into `cfg` (later lines win).
void load_config_file(RunConfig& cfg, const std::string& path);

// Apply SHAPSHIFT_<SECTION>_<KEY> environment overrides for every known key.
void apply_env_overrides(RunConfig& cfg);

// All known keys (for --help and validation).
const std::vector<std::string>& known_config_keys();

// "1:50" (inclusive range) or "1,2,7" (explicit list).
std::vector<std::uint64_t> parse_seed_spec(const std::string& spec);

}  // namespace shapshift
