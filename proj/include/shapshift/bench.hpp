#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shapshift/dataset.hpp"
#include "shapshift/gbdt.hpp"
#include "shapshift/selector.hpp"

namespace shapshift {

// ---------------------------------------------------------------------------
// Multi-seed evaluation harness and baseline selectors. Summaries follow the
// mean/std/max/min-per-metric table layout; std is the population standard
// deviation over the declared seed list.
// ---------------------------------------------------------------------------

struct MetricStats {
    double mean = 0.0;
    double std = 0.0;
    double max = 0.0;
    double min = 0.0;
};

struct MetricSummary {
    std::string algorithm;
    std::size_t n_features = 0;
    MetricStats mae;
    MetricStats rmse;
    MetricStats r2;
    std::vector<std::string> feature_set;
    // Per-seed values aligned with the seed list (for --per-seed dumps).
    std::vector<double> mae_per_seed;
    std::vector<double> rmse_per_seed;
    std::vector<double> r2_per_seed;
};

struct LassoParams {
    double lambda = 0.001;
    int max_sweeps = 10000;
    double tol = 1e-7;

    void validate() const;
};

struct LassoResult {
    std::vector<std::string> selected;
    std::vector<std::string> feature_names;  // post constant-column exclusion
    std::vector<double> coefficients;        // in min-max normalized space
    double intercept = 0.0;
    bool converged = false;
    int sweeps = 0;
};

// Fits one model per seed on `fit_data` restricted to `feature_set`, scores
// on `test`, and summarizes MAE/RMSE/R2. An empty feature set degrades to the
// constant mean predictor. When subsample == 1 the fit ignores its seed, so
// one representative fit stands in for all seeds (identical by construction).
// run_table passes the training split here so the evaluation model sees the
// same window the selectors did.
MetricSummary evaluate(const std::vector<std::string>& feature_set, const Dataset& fit_data,
                       const Dataset& test, const GbdtParams& model_params,
                       const std::vector<std::uint64_t>& seeds, const std::string& label);

// Rank features by validation global influence of a single fit; top k, ties
// toward the alphabetically first name.
std::vector<std::string> baseline_topk_shap(const Dataset& train, const Dataset& val,
                                            const GbdtParams& model_params, std::size_t k);

// L1-penalized linear fit by cyclic coordinate descent with soft
// thresholding; features are min-max normalized to [0,1] first and constant
// columns excluded. Objective: (1/2n)||y - b0 - Xb||^2 + lambda*||b||_1 with
// an unpenalized intercept.
LassoResult lasso_select(const Dataset& train, const LassoParams& params);

struct TableConfig {
    std::vector<QuantilePair> shapeffects_configs = {
        {0.25, 0.75}, {0.2, 0.8}, {0.15, 0.85}, {0.1, 0.9}, {0.05, 0.95}};
    bool run_topk = true;
    std::size_t k = 0;  // 0 = size of the (0.1, 0.9) selection (or first config's)
    std::vector<double> lasso_lambdas = {0.01, 0.001, 0.0001, 0.00001};
    bool run_keep_all = true;
    SelectorParams selector;  // quantiles overridden per config
    std::vector<std::uint64_t> seeds;  // default 1..50
};

// Runs each configured selector and evaluates every selected set on the test
// split (training on train+val). Row order is fixed by the config.
std::vector<MetricSummary> run_table(const Dataset& train, const Dataset& val, const Dataset& test,
                                     const TableConfig& config);

// CSV with header `algorithm,n_features,mae_mean,...,r2_min`.
void write_table_csv(const std::vector<MetricSummary>& rows, const std::string& path);
// Long-format per-seed CSV: `algorithm,seed,mae,rmse,r2`.
void write_per_seed_csv(const std::vector<MetricSummary>& rows,
                        const std::vector<std::uint64_t>& seeds, const std::string& path);

std::vector<std::uint64_t> default_seed_list();  // 1..50

}  // namespace shapshift
