#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shapshift/dataset.hpp"

namespace shapshift {

// ---------------------------------------------------------------------------
// Deterministic least-squares gradient boosting over binary regression trees.
// fit() is a pure function of (data bytes, params): split search is exact
// (midpoints between adjacent distinct sorted values, ties broken by lowest
// feature index then lowest threshold) and nothing depends on wall clock,
// thread count or address layout. The only seeded behaviour is per-tree row
// subsampling, disabled at the default subsample = 1.
// ---------------------------------------------------------------------------

struct TreeNode {
    bool is_leaf = true;
    int feature = -1;        // split feature index (internal nodes)
    double threshold = 0.0;  // route left iff value < threshold
    int left = -1;
    int right = -1;
    double value = 0.0;      // leaf value
    std::int64_t cover = 0;  // training rows routed through this node
};

struct Tree {
    std::vector<TreeNode> nodes;  // root at index 0

    double predict_row(std::span<const double> row) const;
    // Cover-weighted mean over leaves == expected output over training rows.
    double expected_value() const;
};

struct GbdtParams {
    int n_trees = 250;
    double learning_rate = 0.1;
    int max_depth = 6;
    int min_samples_leaf = 20;
    double subsample = 1.0;  // fraction of rows drawn per tree; 1 = all rows
    std::uint64_t seed = 0;

    void validate() const;
};

struct GbdtModel {
    double base_score = 0.0;
    double learning_rate = 0.1;
    std::vector<std::string> feature_names;
    std::vector<Tree> trees;

    std::size_t n_features() const { return feature_names.size(); }
    double predict_row(std::span<const double> row) const;
};

GbdtModel fit(const Dataset& train, const GbdtParams& params);

// Row-major matrix, one prediction per row. Width must equal n_features.
std::vector<double> predict(const GbdtModel& model, const std::vector<std::vector<double>>& rows);
// Column access matches Dataset layout; feature names must agree.
std::vector<double> predict(const GbdtModel& model, const Dataset& ds);

// Line-oriented plain-text serialization; the loader re-validates all node
// invariants (two children per internal node, child covers summing to the
// parent, finite leaf values, feature indices in range).
void save_model(const GbdtModel& model, const std::string& path);
GbdtModel load_model(const std::string& path);

}  // namespace shapshift
