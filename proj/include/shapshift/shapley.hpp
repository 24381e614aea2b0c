#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "shapshift/dataset.hpp"
#include "shapshift/gbdt.hpp"

namespace shapshift {

// ---------------------------------------------------------------------------
// Shapley attribution for the gbdt ensemble.
//
// The default game is tree-conditional: the value of a coalition S is the
// model output obtained by fixing the features in S to the explained row and
// resolving every other split by descending both branches weighted with
// training cover ratios. tree_shap() computes the exact Shapley values of
// that game in polynomial time per tree; exact_shapley() evaluates the
// defining sum over all 2^N coalitions and serves as the oracle.
// ---------------------------------------------------------------------------

struct ShapMatrix {
    std::vector<std::vector<double>> values;  // one row per explained observation
    double base_value = 0.0;
    std::size_t explained_rows = 0;
};

enum class CoalitionMode {
    TreeConditional,
    BackgroundInterventional,
};

struct CoalitionValueSpec {
    CoalitionMode mode = CoalitionMode::TreeConditional;
    std::vector<std::vector<double>> background;  // required for interventional

    void validate() const;
};

// Expected model output when the coalition (bitmask over feature indices) is
// fixed to `row` and the rest is marginalized per `spec`.
double coalition_value(const GbdtModel& model, std::span<const double> row, std::uint64_t coalition,
                       const CoalitionValueSpec& spec);

// v(empty set): the attribution origin shared by all rows under `spec`.
double base_value(const GbdtModel& model, const CoalitionValueSpec& spec);

ShapMatrix tree_shap(const GbdtModel& model, const std::vector<std::vector<double>>& rows);
ShapMatrix tree_shap(const GbdtModel& model, const Dataset& ds);

// Exact enumeration; feature count capped at 15 (2^15 coalition values).
std::vector<double> exact_shapley(const GbdtModel& model, std::span<const double> row,
                                  const CoalitionValueSpec& spec);

struct SamplingResult {
    std::vector<double> values;
    std::vector<double> std_errors;  // empirical standard error per feature
    std::size_t n_permutations = 0;
};

// Permutation-sampling estimator: averages marginal contributions over seeded
// uniform random feature orderings. Unbiased for exact_shapley under the same
// spec; deterministic for a fixed seed.
SamplingResult sampling_shapley_detailed(const GbdtModel& model, std::span<const double> row,
                                         const CoalitionValueSpec& spec,
                                         std::size_t n_permutations, std::uint64_t seed);
std::vector<double> sampling_shapley(const GbdtModel& model, std::span<const double> row,
                                     const CoalitionValueSpec& spec, std::size_t n_permutations,
                                     std::uint64_t seed);

// Per-feature mean of absolute Shapley values.
std::vector<double> global_influence(const ShapMatrix& shap);

// CSV dump: header `row_index,<feature names...>,base_value,prediction`.
void write_shap_csv(const ShapMatrix& shap, const GbdtModel& model,
                    const std::vector<double>& predictions, const std::string& path);

}  // namespace shapshift
