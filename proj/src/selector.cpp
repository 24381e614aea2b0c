#include "shapshift/selector.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>

#include "shapshift/common.hpp"

namespace shapshift {

void QuantilePair::validate() const {
    if (!(low >= 0.0 && low < high && high <= 1.0))
        throw ConfigError("quantiles must satisfy 0 <= q_low < q_high <= 1 (got q_low=" +
                          format_double(low) + ", q_high=" + format_double(high) + ")");
}

void SelectorParams::validate() const {
    quantiles.validate();
    if (n_iter_prev < 0) throw ConfigError("selector.n_iter_prev must be >= 0");
    if (zero_tolerance < 0.0) throw ConfigError("selector.zero_tolerance must be >= 0");
    model_params.validate();
}

Metric metric_from_string(const std::string& name) {
    if (name == "MAE" || name == "mae") return Metric::MAE;
    if (name == "MSE" || name == "mse") return Metric::MSE;
    if (name == "RMSE" || name == "rmse") return Metric::RMSE;
    if (name == "R2" || name == "r2") return Metric::R2;
    throw ConfigError("unknown metric '" + name + "' (expected MAE, MSE, RMSE or R2)");
}

std::string metric_to_string(Metric m) {
    switch (m) {
        case Metric::MAE: return "MAE";
        case Metric::MSE: return "MSE";
        case Metric::RMSE: return "RMSE";
        case Metric::R2: return "R2";
    }
    return "?";
}

bool metric_higher_is_better(Metric m) { return m == Metric::R2; }

std::string removal_kind_to_string(RemovalKind k) {
    switch (k) {
        case RemovalKind::InfiniteSweep: return "infinite-sweep";
        case RemovalKind::MaxNegInf: return "max-neg-inf";
        case RemovalKind::None: return "none";
    }
    return "?";
}

double compute_metric(std::span<const double> y_true, std::span<const double> y_pred, Metric m) {
    if (y_true.size() != y_pred.size() || y_true.empty())
        throw std::runtime_error("compute_metric: length mismatch or empty input");
    const double n = static_cast<double>(y_true.size());
    switch (m) {
        case Metric::MAE: {
            double s = 0.0;
            for (std::size_t i = 0; i < y_true.size(); ++i) s += std::abs(y_true[i] - y_pred[i]);
            return s / n;
        }
        case Metric::MSE:
        case Metric::RMSE: {
            double s = 0.0;
            for (std::size_t i = 0; i < y_true.size(); ++i) {
                const double e = y_true[i] - y_pred[i];
                s += e * e;
            }
            return m == Metric::MSE ? s / n : std::sqrt(s / n);
        }
        case Metric::R2: {
            const double ybar = mean(y_true);
            double ss_res = 0.0, ss_tot = 0.0;
            for (std::size_t i = 0; i < y_true.size(); ++i) {
                const double e = y_true[i] - y_pred[i];
                ss_res += e * e;
                ss_tot += (y_true[i] - ybar) * (y_true[i] - ybar);
            }
            if (ss_tot == 0.0) throw std::runtime_error("compute_metric: R2 needs non-constant y");
            return 1.0 - ss_res / ss_tot;
        }
    }
    throw std::runtime_error("compute_metric: bad metric");
}

ErrorPartition classify_errors(std::vector<double> errors, const QuantilePair& q) {
    q.validate();
    if (errors.size() < 2) throw std::runtime_error("classify_errors: need at least 2 errors");

    ErrorPartition p;
    p.errors = std::move(errors);

    std::vector<double> sorted = p.errors;
    std::sort(sorted.begin(), sorted.end());
    p.Q_low = quantile_sorted(sorted, q.low);
    p.Q_high = quantile_sorted(sorted, q.high);
    p.median_err = quantile_sorted(sorted, 0.5);

    std::size_t n_nonpos = 0;
    for (double e : p.errors) n_nonpos += (e <= 0.0) ? 1 : 0;
    p.q_star = static_cast<double>(n_nonpos) / static_cast<double>(p.errors.size());
    p.Q_star = quantile_sorted(sorted, p.q_star);

    // Band translation: only when zero falls outside [Q_low, Q_high] is the
    // band shifted onto the sign boundary, keeping its width.
    if (p.Q_low <= 0.0 && 0.0 <= p.Q_high) {
        p.Q_low_star = p.Q_low;
        p.Q_high_star = p.Q_high;
    } else if (p.Q_high < 0.0) {
        p.Q_low_star = p.Q_star;
        p.Q_high_star = p.Q_high - (p.Q_low - p.Q_star);
    } else {  // Q_low > 0
        p.Q_low_star = p.Q_low - (p.Q_high - p.Q_star);
        p.Q_high_star = p.Q_star;
    }

    p.labels.resize(p.errors.size());
    for (std::size_t i = 0; i < p.errors.size(); ++i) {
        const double e = p.errors[i];
        if (e < p.Q_low_star)
            p.labels[i] = ErrorLabel::OP;
        else if (e > p.Q_high_star)
            p.labels[i] = ErrorLabel::UP;
        else
            p.labels[i] = ErrorLabel::CP;
    }
    return p;
}

GroupEffects group_effects(const ShapMatrix& shap, const ErrorPartition& partition) {
    if (shap.values.size() != partition.labels.size())
        throw std::runtime_error("group_effects: shap rows do not align with partition labels");
    const std::size_t n_feat = shap.values.empty() ? 0 : shap.values[0].size();
    GroupEffects ge;
    ge.cp.assign(n_feat, 0.0);
    ge.op.assign(n_feat, 0.0);
    ge.up.assign(n_feat, 0.0);
    for (std::size_t r = 0; r < shap.values.size(); ++r) {
        std::vector<double>* dest = nullptr;
        switch (partition.labels[r]) {
            case ErrorLabel::CP: dest = &ge.cp; break;
            case ErrorLabel::OP: dest = &ge.op; break;
            case ErrorLabel::UP: dest = &ge.up; break;
        }
        for (std::size_t j = 0; j < n_feat; ++j) (*dest)[j] += effect_per_obs(shap.values[r][j]);
    }
    return ge;
}

NegInfluence negative_influence(const GroupEffects& ge, double median_err, double zero_tolerance) {
    const std::size_t n_feat = ge.cp.size();
    NegInfluence out;
    out.values.resize(n_feat);
    for (std::size_t j = 0; j < n_feat; ++j) {
        const double ef_cp = ge.cp[j], ef_op = ge.op[j], ef_up = ge.up[j];
        const double a_cp = std::abs(ef_cp), a_op = std::abs(ef_op), a_up = std::abs(ef_up);
        double v = 0.0;
        if (a_cp + a_op + a_up <= zero_tolerance) {
            v = std::numeric_limits<double>::infinity();
        } else if (median_err < 0.0 && ef_op > 0.0 && ef_up >= 0.0 && a_op > a_up + a_cp) {
            // Over-prediction bias: penalize the over-predicted push. The
            // desirable-side guard admits zero so that a one-sided error
            // distribution (empty under-predicted band after translation)
            // still scores; the penalized side stays strictly positive.
            v = a_op - (a_up + a_cp);
        } else if (median_err > 0.0 && ef_op >= 0.0 && ef_up > 0.0 && a_up > a_op + a_cp) {
            v = a_up - (a_op + a_cp);
        } else if (ef_op > 0.0 && ef_up < 0.0 && a_up + a_op > a_cp) {
            v = a_up + a_op - a_cp;
        }
        out.values[j] = v;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Fit/attribution memoization
// ---------------------------------------------------------------------------

namespace {

struct FitResult {
    std::shared_ptr<GbdtModel> model;
    std::shared_ptr<ShapMatrix> val_shap;
    std::shared_ptr<std::vector<double>> val_pred;
};

}  // namespace

class FitCache {
public:
    FitResult& lookup(const std::string& key, bool& found) {
        std::lock_guard<std::mutex> lock(mutex_);
        auto [it, inserted] = entries_.try_emplace(key);
        found = !inserted;
        return it->second;
    }

    // Per-entry lock so concurrent selection runs only serialize on the map.
    std::mutex& entry_mutex(const std::string& key) {
        std::lock_guard<std::mutex> lock(mutex_);
        return locks_[key];
    }

private:
    std::mutex mutex_;
    std::map<std::string, FitResult> entries_;
    std::map<std::string, std::mutex> locks_;
};

std::shared_ptr<FitCache> make_fit_cache() { return std::make_shared<FitCache>(); }

namespace {

std::string fit_key(const std::vector<std::string>& features, std::uint64_t seed) {
    return std::to_string(seed) + "|" + join(features, ";");
}

// Fit on train (restricted to `features`), attribute and predict on val.
// Cached runs return the exact objects a fresh computation would produce.
FitResult fit_and_explain(const Dataset& train, const Dataset& val,
                          const std::vector<std::string>& features, GbdtParams model_params,
                          std::uint64_t model_seed, FitCache* cache) {
    model_params.seed = model_seed;
    const std::string key = fit_key(features, model_seed);

    if (cache != nullptr) {
        std::lock_guard<std::mutex> entry_lock(cache->entry_mutex(key));
        bool found = false;
        FitResult& slot = cache->lookup(key, found);
        if (found) return slot;
        const Dataset train_view = train.select(features);
        const Dataset val_view = val.select(features);
        slot.model = std::make_shared<GbdtModel>(fit(train_view, model_params));
        slot.val_shap = std::make_shared<ShapMatrix>(tree_shap(*slot.model, val_view));
        slot.val_pred = std::make_shared<std::vector<double>>(predict(*slot.model, val_view));
        return slot;
    }

    FitResult res;
    const Dataset train_view = train.select(features);
    const Dataset val_view = val.select(features);
    res.model = std::make_shared<GbdtModel>(fit(train_view, model_params));
    res.val_shap = std::make_shared<ShapMatrix>(tree_shap(*res.model, val_view));
    res.val_pred = std::make_shared<std::vector<double>>(predict(*res.model, val_view));
    return res;
}

std::string shadow_name(const Dataset& ds, const std::string& source) {
    std::string name = source + "_shadow";
    while (ds.has_feature(name) || name == ds.target_name()) name += "_";
    return name;
}

}  // namespace

std::vector<std::string> preprocess_shadow(const Dataset& train, const Dataset& val,
                                           const SelectorParams& params, FitCache* cache) {
    params.validate();
    if (params.n_iter_prev < 1)
        throw ConfigError("preprocess_shadow: n_iter_prev must be >= 1");
    if (train.n_features() == 0) throw std::runtime_error("preprocess_shadow: no features");

    // Most influential feature of the plain fit; ties go to the first name.
    const std::vector<std::string> all = train.feature_names();
    FitResult base = fit_and_explain(train, val, all, params.model_params, params.seed, cache);
    const std::vector<double> base_infl = global_influence(*base.val_shap);
    std::size_t top = 0;
    for (std::size_t j = 1; j < base_infl.size(); ++j)
        if (base_infl[j] > base_infl[top]) top = j;
    const std::string source = all[top];

    const std::string shadow = shadow_name(train, source);
    const Dataset train_sh = permute_column(train, source, params.seed, shadow);
    const Dataset val_sh = permute_column(val, source, params.seed, shadow);
    const std::vector<std::string> with_shadow = train_sh.feature_names();

    // Influences averaged over n_iter_prev refits with shifted model seeds.
    // With subsample == 1 the fit ignores its seed entirely, so each refit is
    // identical and one representative run stands in for the average.
    std::vector<double> avg(with_shadow.size(), 0.0);
    const int reps = (params.model_params.subsample < 1.0) ? params.n_iter_prev : 1;
    for (int k = 1; k <= reps; ++k) {
        FitResult r = fit_and_explain(train_sh, val_sh, with_shadow, params.model_params,
                                      params.seed + static_cast<std::uint64_t>(k), cache);
        const std::vector<double> infl = global_influence(*r.val_shap);
        for (std::size_t j = 0; j < avg.size(); ++j) avg[j] += infl[j];
    }
    for (double& v : avg) v /= static_cast<double>(reps);

    const std::size_t shadow_idx = train_sh.feature_index(shadow);
    const double bar = avg[shadow_idx];
    std::vector<std::string> kept;
    for (std::size_t j = 0; j < with_shadow.size(); ++j) {
        if (j == shadow_idx) continue;
        if (avg[j] > bar) kept.push_back(with_shadow[j]);
    }
    return kept;
}

SelectionTrace run_selection(const Dataset& train, const Dataset& val,
                             const SelectorParams& params, FitCache* cache) {
    params.validate();
    if (train.n_rows() == 0 || val.n_rows() == 0)
        throw std::runtime_error("run_selection: empty train or validation set");
    if (train.feature_names() != val.feature_names())
        throw std::runtime_error("run_selection: train/val schema mismatch");
    if (train.n_features() == 0) throw std::runtime_error("run_selection: no features");

    SelectionTrace trace;
    std::vector<std::string> features = train.feature_names();
    if (params.n_iter_prev > 0) {
        std::vector<std::string> kept = preprocess_shadow(train, val, params, cache);
        for (const auto& name : features)
            if (!std::binary_search(kept.begin(), kept.end(), name))
                trace.shadow_removed.push_back(name);
        features = std::move(kept);
    }

    bool removed_something = true;
    while (!features.empty() && removed_something) {
        FitResult r = fit_and_explain(train, val, features, params.model_params, params.seed, cache);

        std::vector<double> errors(val.n_rows());
        for (std::size_t i = 0; i < val.n_rows(); ++i)
            errors[i] = val.target()[i] - (*r.val_pred)[i];
        const ErrorPartition part = classify_errors(errors, params.quantiles);
        const GroupEffects ge = group_effects(*r.val_shap, part);
        const NegInfluence ni = negative_influence(ge, part.median_err, params.zero_tolerance);

        IterationRecord rec;
        rec.feature_set = features;
        rec.neg_influence = ni.values;
        rec.metric_value = compute_metric(val.target(), *r.val_pred, params.metric);

        std::vector<std::string> removed;
        bool any_infinite = false;
        for (double v : ni.values) any_infinite |= std::isinf(v);
        if (any_infinite) {
            rec.removal_kind = RemovalKind::InfiniteSweep;
            for (std::size_t j = 0; j < features.size(); ++j)
                if (std::isinf(ni.values[j])) removed.push_back(features[j]);
        } else {
            // Greatest positive influence; feature order is alphabetical, so
            // a strictly-greater comparison breaks ties toward the first name.
            std::ptrdiff_t arg = -1;
            for (std::size_t j = 0; j < features.size(); ++j)
                if (ni.values[j] > 0.0 && (arg < 0 || ni.values[j] > ni.values[static_cast<std::size_t>(arg)]))
                    arg = static_cast<std::ptrdiff_t>(j);
            if (arg >= 0) {
                rec.removal_kind = RemovalKind::MaxNegInf;
                removed.push_back(features[static_cast<std::size_t>(arg)]);
            } else {
                rec.removal_kind = RemovalKind::None;
            }
        }
        rec.removed = removed;
        trace.iterations.push_back(rec);

        removed_something = !removed.empty();
        if (removed_something) {
            std::vector<std::string> next;
            for (const auto& name : features)
                if (std::find(removed.begin(), removed.end(), name) == removed.end())
                    next.push_back(name);
            features = std::move(next);
        }
    }

    // Best iteration: optimal metric, ties resolved toward fewer features and
    // then the earlier iteration.
    const bool maximize = metric_higher_is_better(params.metric);
    std::ptrdiff_t best = -1;
    for (std::size_t k = 0; k < trace.iterations.size(); ++k) {
        if (best < 0) {
            best = static_cast<std::ptrdiff_t>(k);
            continue;
        }
        const IterationRecord& cand = trace.iterations[k];
        const IterationRecord& cur = trace.iterations[static_cast<std::size_t>(best)];
        const bool better = maximize ? cand.metric_value > cur.metric_value
                                     : cand.metric_value < cur.metric_value;
        const bool tie = cand.metric_value == cur.metric_value;
        if (better || (tie && cand.feature_set.size() < cur.feature_set.size()))
            best = static_cast<std::ptrdiff_t>(k);
    }
    if (best >= 0) {
        trace.best_feature_set = trace.iterations[static_cast<std::size_t>(best)].feature_set;
        trace.best_metric = trace.iterations[static_cast<std::size_t>(best)].metric_value;
    }
    return trace;
}

void write_trace_csv(const SelectionTrace& trace, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "iteration,n_features,removed,removal_kind,metric_value\n";
    for (std::size_t k = 0; k < trace.iterations.size(); ++k) {
        const IterationRecord& rec = trace.iterations[k];
        out << (k + 1) << "," << rec.feature_set.size() << "," << join(rec.removed, ";") << ","
            << removal_kind_to_string(rec.removal_kind) << "," << format_double(rec.metric_value)
            << "\n";
    }
    out << "best," << trace.best_feature_set.size() << "," << join(trace.best_feature_set, ";")
        << "," << format_double(trace.best_metric) << "\n";
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace shapshift
