#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "shapshift/dataset.hpp"
#include "shapshift/gbdt.hpp"
#include "shapshift/shapley.hpp"

namespace shapshift {

// ---------------------------------------------------------------------------
// Shapley/error-partition backward elimination.
//
// Validation errors (err = y - yhat) are split into correctly / over / under
// predicted bands by two quantiles; when the band [Q_low, Q_high] misses zero
// it is translated to straddle the sign boundary while keeping its width.
// Per-feature signed-squared Shapley effects are summed per band and turned
// into a "negative influence" score; features with no effect at all are swept
// in bulk, otherwise the worst scorer is dropped, until nothing scores > 0.
// ---------------------------------------------------------------------------

struct QuantilePair {
    double low = 0.1;
    double high = 0.9;

    void validate() const;
};

enum class ErrorLabel : std::uint8_t { CP, OP, UP };

struct ErrorPartition {
    std::vector<double> errors;
    double q_star = 0.0;   // empirical fraction of errors <= 0
    double Q_star = 0.0;   // Quantile(errors, q_star)
    double Q_low = 0.0;
    double Q_high = 0.0;
    double Q_low_star = 0.0;
    double Q_high_star = 0.0;
    double median_err = 0.0;
    std::vector<ErrorLabel> labels;
};

// Per feature, signed sums of sgn(phi)*phi^2 within each band.
struct GroupEffects {
    std::vector<double> cp;
    std::vector<double> op;
    std::vector<double> up;
};

struct NegInfluence {
    std::vector<double> values;  // in [0, inf]; +inf means "no effect at all"
};

enum class Metric { MAE, MSE, RMSE, R2 };

Metric metric_from_string(const std::string& name);
std::string metric_to_string(Metric m);
// Smaller-is-better for everything except R2.
bool metric_higher_is_better(Metric m);

struct SelectorParams {
    QuantilePair quantiles;
    int n_iter_prev = 30;  // shadow-phase iterations; 0 disables the phase
    Metric metric = Metric::MAE;
    GbdtParams model_params;
    std::uint64_t seed = 0;
    double zero_tolerance = 0.0;

    void validate() const;
};

enum class RemovalKind { InfiniteSweep, MaxNegInf, None };

std::string removal_kind_to_string(RemovalKind k);

struct IterationRecord {
    std::vector<std::string> feature_set;  // features at the start of the iteration
    std::vector<std::string> removed;
    RemovalKind removal_kind = RemovalKind::None;
    double metric_value = 0.0;
    std::vector<double> neg_influence;  // aligned with feature_set
};

struct SelectionTrace {
    std::vector<IterationRecord> iterations;
    std::vector<std::string> shadow_removed;  // features dropped by the shadow phase
    std::vector<std::string> best_feature_set;
    double best_metric = std::numeric_limits<double>::quiet_NaN();
};

// Memoizes fitted models and their validation attributions across selection
// runs that share data and model params (fit is a pure function, so cached
// results are bit-identical to recomputation). Optional everywhere.
class FitCache;
std::shared_ptr<FitCache> make_fit_cache();

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

double compute_metric(std::span<const double> y_true, std::span<const double> y_pred, Metric m);

ErrorPartition classify_errors(std::vector<double> errors, const QuantilePair& q);

inline double effect_per_obs(double shap_value) {
    return shap_value >= 0.0 ? shap_value * shap_value : -(shap_value * shap_value);
}

GroupEffects group_effects(const ShapMatrix& shap, const ErrorPartition& partition);

NegInfluence negative_influence(const GroupEffects& ge, double median_err, double zero_tolerance);

// Shadow prefilter: appends a seeded permutation of the most influential
// feature, averages global influences over n_iter_prev refits with shifted
// seeds, and drops every feature not beating the shadow. Returns survivors.
std::vector<std::string> preprocess_shadow(const Dataset& train, const Dataset& val,
                                           const SelectorParams& params,
                                           FitCache* cache = nullptr);

// Full elimination loop (shadow phase included when n_iter_prev > 0).
SelectionTrace run_selection(const Dataset& train, const Dataset& val,
                             const SelectorParams& params, FitCache* cache = nullptr);

// Trace CSV: `iteration,n_features,removed,removal_kind,metric_value` rows
// plus a final `best,...` line.
void write_trace_csv(const SelectionTrace& trace, const std::string& path);

}  // namespace shapshift
