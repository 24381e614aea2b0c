#include "shapshift/shapley.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>

#include "shapshift/common.hpp"

namespace shapshift {

void CoalitionValueSpec::validate() const {
    if (mode == CoalitionMode::BackgroundInterventional && background.empty())
        throw ConfigError("coalition spec: interventional mode needs a nonempty background");
}

// ---------------------------------------------------------------------------
// Path-dependent recursion (weighted path tracking with EXTEND/UNWIND).
// The path records, per unique feature met so far, the fraction of coalition
// weight flowing when the feature is out of the coalition (zero_fraction,
// cover ratios) or in it (one_fraction, split indicators), together with the
// permutation-weight polynomial pweight.
// ---------------------------------------------------------------------------
namespace {

struct PathElement {
    int feature_index;
    double zero_fraction;
    double one_fraction;
    double pweight;
};

void extend_path(PathElement* path, int unique_depth, double zero_fraction, double one_fraction,
                 int feature_index) {
    path[unique_depth] = {feature_index, zero_fraction, one_fraction,
                          unique_depth == 0 ? 1.0 : 0.0};
    for (int i = unique_depth - 1; i >= 0; --i) {
        path[i + 1].pweight +=
            one_fraction * path[i].pweight * (i + 1) / static_cast<double>(unique_depth + 1);
        path[i].pweight =
            zero_fraction * path[i].pweight * (unique_depth - i) / static_cast<double>(unique_depth + 1);
    }
}

void unwind_path(PathElement* path, int unique_depth, int path_index) {
    const double one_fraction = path[path_index].one_fraction;
    const double zero_fraction = path[path_index].zero_fraction;
    double next_one_portion = path[unique_depth].pweight;
    for (int i = unique_depth - 1; i >= 0; --i) {
        if (one_fraction != 0.0) {
            const double tmp = path[i].pweight;
            path[i].pweight =
                next_one_portion * (unique_depth + 1) / static_cast<double>((i + 1) * one_fraction);
            next_one_portion = tmp - path[i].pweight * zero_fraction * (unique_depth - i) /
                                         static_cast<double>(unique_depth + 1);
        } else {
            path[i].pweight = path[i].pweight * (unique_depth + 1) /
                              static_cast<double>(zero_fraction * (unique_depth - i));
        }
    }
    for (int i = path_index; i < unique_depth; ++i) {
        path[i].feature_index = path[i + 1].feature_index;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

double unwound_path_sum(const PathElement* path, int unique_depth, int path_index) {
    const double one_fraction = path[path_index].one_fraction;
    const double zero_fraction = path[path_index].zero_fraction;
    double next_one_portion = path[unique_depth].pweight;
    double total = 0.0;
    if (one_fraction != 0.0) {
        for (int i = unique_depth - 1; i >= 0; --i) {
            const double tmp = next_one_portion / static_cast<double>((i + 1) * one_fraction);
            total += tmp;
            next_one_portion = path[i].pweight - tmp * zero_fraction * (unique_depth - i);
        }
    } else {
        for (int i = unique_depth - 1; i >= 0; --i)
            total += path[i].pweight / (zero_fraction * (unique_depth - i));
    }
    return total * (unique_depth + 1);
}

void shap_recurse(const std::vector<TreeNode>& nodes, const double* x, double* phi, int node_index,
                  int unique_depth, PathElement* parent_path, double parent_zero_fraction,
                  double parent_one_fraction, int parent_feature_index) {
    PathElement* path = parent_path + unique_depth + 1;
    std::copy(parent_path, parent_path + unique_depth + 1, path);
    extend_path(path, unique_depth, parent_zero_fraction, parent_one_fraction,
                parent_feature_index);

    const TreeNode& node = nodes[static_cast<std::size_t>(node_index)];
    if (node.is_leaf) {
        for (int i = 1; i <= unique_depth; ++i) {
            const double w = unwound_path_sum(path, unique_depth, i);
            const PathElement& el = path[i];
            phi[el.feature_index] += w * (el.one_fraction - el.zero_fraction) * node.value;
        }
        return;
    }

    const int hot = (x[node.feature] < node.threshold) ? node.left : node.right;
    const int cold = (hot == node.left) ? node.right : node.left;
    const double node_cover = static_cast<double>(node.cover);
    const double hot_zero =
        static_cast<double>(nodes[static_cast<std::size_t>(hot)].cover) / node_cover;
    const double cold_zero =
        static_cast<double>(nodes[static_cast<std::size_t>(cold)].cover) / node_cover;

    // A feature met twice on one path gets its fractions multiplied, so the
    // previous occurrence is unwound before re-extending.
    double incoming_zero = 1.0;
    double incoming_one = 1.0;
    int path_index = 0;
    for (; path_index <= unique_depth; ++path_index)
        if (path[path_index].feature_index == node.feature) break;
    if (path_index != unique_depth + 1) {
        incoming_zero = path[path_index].zero_fraction;
        incoming_one = path[path_index].one_fraction;
        unwind_path(path, unique_depth, path_index);
        unique_depth -= 1;
    }

    shap_recurse(nodes, x, phi, hot, unique_depth + 1, path, hot_zero * incoming_zero,
                 incoming_one, node.feature);
    shap_recurse(nodes, x, phi, cold, unique_depth + 1, path, cold_zero * incoming_zero, 0.0,
                 node.feature);
}

int tree_depth(const std::vector<TreeNode>& nodes, int idx = 0) {
    const TreeNode& nd = nodes[static_cast<std::size_t>(idx)];
    if (nd.is_leaf) return 0;
    return 1 + std::max(tree_depth(nodes, nd.left), tree_depth(nodes, nd.right));
}

void check_covers(const GbdtModel& model) {
    for (const Tree& tree : model.trees) {
        for (const TreeNode& nd : tree.nodes) {
            if (nd.is_leaf) continue;
            const std::int64_t sum = tree.nodes[static_cast<std::size_t>(nd.left)].cover +
                                     tree.nodes[static_cast<std::size_t>(nd.right)].cover;
            if (nd.cover <= 0 || sum != nd.cover)
                throw std::runtime_error("tree_shap: cover invariant violated (corrupt model)");
        }
    }
}

}  // namespace

ShapMatrix tree_shap(const GbdtModel& model, const std::vector<std::vector<double>>& rows) {
    check_covers(model);
    const std::size_t n_feat = model.n_features();
    for (const auto& row : rows)
        if (row.size() != n_feat) throw std::runtime_error("tree_shap: row width mismatch");

    int max_depth = 0;
    for (const Tree& tree : model.trees)
        max_depth = std::max(max_depth, tree_depth(tree.nodes));
    const std::size_t path_size =
        static_cast<std::size_t>((max_depth + 2) * (max_depth + 3)) / 2 + 1;

    ShapMatrix out;
    out.explained_rows = rows.size();
    out.values.assign(rows.size(), std::vector<double>(n_feat, 0.0));
    out.base_value = model.base_score;
    for (const Tree& tree : model.trees)
        out.base_value += model.learning_rate * tree.expected_value();

    parallel_for(rows.size(), [&](std::size_t begin, std::size_t end) {
        std::vector<PathElement> path(path_size);
        std::vector<double> phi(n_feat);
        for (std::size_t r = begin; r < end; ++r) {
            std::fill(phi.begin(), phi.end(), 0.0);
            for (const Tree& tree : model.trees) {
                if (tree.nodes[0].is_leaf) continue;  // stump-free constant tree
                shap_recurse(tree.nodes, rows[r].data(), phi.data(), 0, 0, path.data(), 1.0, 1.0,
                             -1);
            }
            for (std::size_t j = 0; j < n_feat; ++j)
                out.values[r][j] = model.learning_rate * phi[j];
        }
    });
    return out;
}

ShapMatrix tree_shap(const GbdtModel& model, const Dataset& ds) {
    if (ds.feature_names() != model.feature_names)
        throw std::runtime_error("tree_shap: dataset features do not match the fitted model");
    std::vector<std::vector<double>> rows(ds.n_rows());
    for (std::size_t i = 0; i < ds.n_rows(); ++i) rows[i] = ds.row(i);
    return tree_shap(model, rows);
}

namespace {

double conditional_walk(const std::vector<TreeNode>& nodes, int idx, const double* x,
                        std::uint64_t coalition) {
    const TreeNode& nd = nodes[static_cast<std::size_t>(idx)];
    if (nd.is_leaf) return nd.value;
    if ((coalition >> nd.feature) & 1ULL) {
        const int child = (x[nd.feature] < nd.threshold) ? nd.left : nd.right;
        return conditional_walk(nodes, child, x, coalition);
    }
    const double wl = static_cast<double>(nodes[static_cast<std::size_t>(nd.left)].cover);
    const double wr = static_cast<double>(nodes[static_cast<std::size_t>(nd.right)].cover);
    return (wl * conditional_walk(nodes, nd.left, x, coalition) +
            wr * conditional_walk(nodes, nd.right, x, coalition)) /
           static_cast<double>(nd.cover);
}

}  // namespace

double coalition_value(const GbdtModel& model, std::span<const double> row, std::uint64_t coalition,
                       const CoalitionValueSpec& spec) {
    spec.validate();
    if (row.size() != model.n_features())
        throw std::runtime_error("coalition_value: row width mismatch");

    if (spec.mode == CoalitionMode::TreeConditional) {
        double sum = 0.0;
        for (const Tree& tree : model.trees)
            sum += conditional_walk(tree.nodes, 0, row.data(), coalition);
        return model.base_score + model.learning_rate * sum;
    }

    // Interventional: substitute the coalition features into each background
    // row and average the plain predictions.
    double total = 0.0;
    std::vector<double> merged(row.size());
    for (const auto& bg : spec.background) {
        if (bg.size() != row.size())
            throw std::runtime_error("coalition_value: background width mismatch");
        for (std::size_t j = 0; j < row.size(); ++j)
            merged[j] = ((coalition >> j) & 1ULL) ? row[j] : bg[j];
        total += model.predict_row(merged);
    }
    return total / static_cast<double>(spec.background.size());
}

double base_value(const GbdtModel& model, const CoalitionValueSpec& spec) {
    spec.validate();
    if (spec.mode == CoalitionMode::TreeConditional) {
        double base = model.base_score;
        for (const Tree& tree : model.trees) base += model.learning_rate * tree.expected_value();
        return base;
    }
    double total = 0.0;
    for (const auto& bg : spec.background) total += model.predict_row(bg);
    return total / static_cast<double>(spec.background.size());
}

std::vector<double> exact_shapley(const GbdtModel& model, std::span<const double> row,
                                  const CoalitionValueSpec& spec) {
    spec.validate();
    const std::size_t n_feat = model.n_features();
    if (n_feat > 15)
        throw std::runtime_error("exact_shapley: feature count " + std::to_string(n_feat) +
                                 " exceeds the enumeration cap of 15");
    if (row.size() != n_feat) throw std::runtime_error("exact_shapley: row width mismatch");

    const std::uint64_t n_masks = 1ULL << n_feat;
    std::vector<double> v(n_masks);
    for (std::uint64_t mask = 0; mask < n_masks; ++mask)
        v[mask] = coalition_value(model, row, mask, spec);

    // weight(s) = s! (F - s - 1)! / F!
    std::vector<double> factorial(n_feat + 1, 1.0);
    for (std::size_t k = 1; k <= n_feat; ++k)
        factorial[k] = factorial[k - 1] * static_cast<double>(k);
    std::vector<double> weight(n_feat);
    for (std::size_t s = 0; s < n_feat; ++s)
        weight[s] = factorial[s] * factorial[n_feat - s - 1] / factorial[n_feat];

    std::vector<double> phi(n_feat, 0.0);
    for (std::size_t i = 0; i < n_feat; ++i) {
        const std::uint64_t bit = 1ULL << i;
        for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
            if (mask & bit) continue;
            const int s = std::popcount(mask);
            phi[i] += weight[static_cast<std::size_t>(s)] * (v[mask | bit] - v[mask]);
        }
    }
    return phi;
}

SamplingResult sampling_shapley_detailed(const GbdtModel& model, std::span<const double> row,
                                         const CoalitionValueSpec& spec,
                                         std::size_t n_permutations, std::uint64_t seed) {
    spec.validate();
    if (n_permutations < 1)
        throw ConfigError("sampling_shapley: n_permutations must be >= 1");
    const std::size_t n_feat = model.n_features();
    if (row.size() != n_feat) throw std::runtime_error("sampling_shapley: row width mismatch");

    std::vector<double> sum(n_feat, 0.0), sum_sq(n_feat, 0.0);
    std::vector<std::size_t> perm(n_feat);
    Rng rng(seed);
    const double v_empty = base_value(model, spec);

    for (std::size_t p = 0; p < n_permutations; ++p) {
        for (std::size_t j = 0; j < n_feat; ++j) perm[j] = j;
        rng.shuffle(perm);
        std::uint64_t coalition = 0;
        double v_prev = v_empty;
        for (std::size_t j = 0; j < n_feat; ++j) {
            coalition |= 1ULL << perm[j];
            const double v_cur = coalition_value(model, row, coalition, spec);
            const double delta = v_cur - v_prev;
            sum[perm[j]] += delta;
            sum_sq[perm[j]] += delta * delta;
            v_prev = v_cur;
        }
    }

    SamplingResult out;
    out.n_permutations = n_permutations;
    out.values.resize(n_feat);
    out.std_errors.assign(n_feat, 0.0);
    const double p = static_cast<double>(n_permutations);
    for (std::size_t j = 0; j < n_feat; ++j) {
        out.values[j] = sum[j] / p;
        if (n_permutations > 1) {
            const double var = (sum_sq[j] - sum[j] * sum[j] / p) / (p - 1.0);
            out.std_errors[j] = std::sqrt(std::max(var, 0.0) / p);
        }
    }
    return out;
}

std::vector<double> sampling_shapley(const GbdtModel& model, std::span<const double> row,
                                     const CoalitionValueSpec& spec, std::size_t n_permutations,
                                     std::uint64_t seed) {
    return sampling_shapley_detailed(model, row, spec, n_permutations, seed).values;
}

std::vector<double> global_influence(const ShapMatrix& shap) {
    if (shap.explained_rows == 0 || shap.values.empty())
        throw std::runtime_error("global_influence: empty ShapMatrix");
    const std::size_t n_feat = shap.values[0].size();
    std::vector<double> out(n_feat, 0.0);
    for (const auto& row : shap.values)
        for (std::size_t j = 0; j < n_feat; ++j) out[j] += std::abs(row[j]);
    for (double& v : out) v /= static_cast<double>(shap.values.size());
    return out;
}

void write_shap_csv(const ShapMatrix& shap, const GbdtModel& model,
                    const std::vector<double>& predictions, const std::string& path) {
    if (predictions.size() != shap.values.size())
        throw std::runtime_error("write_shap_csv: prediction/value row mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "row_index," << join(model.feature_names, ",") << ",base_value,prediction\n";
    for (std::size_t r = 0; r < shap.values.size(); ++r) {
        out << r;
        for (double v : shap.values[r]) out << "," << format_double(v);
        out << "," << format_double(shap.base_value) << "," << format_double(predictions[r])
            << "\n";
    }
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace shapshift
