#include "shapshift/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "shapshift/common.hpp"

namespace shapshift {

double Tree::predict_row(std::span<const double> row) const {
    int node = 0;
    while (!nodes[node].is_leaf) {
        const TreeNode& nd = nodes[node];
        node = (row[static_cast<std::size_t>(nd.feature)] < nd.threshold) ? nd.left : nd.right;
    }
    return nodes[node].value;
}

double Tree::expected_value() const {
    double weighted = 0.0;
    double total = static_cast<double>(nodes[0].cover);
    for (const TreeNode& nd : nodes)
        if (nd.is_leaf) weighted += static_cast<double>(nd.cover) * nd.value;
    return weighted / total;
}

void GbdtParams::validate() const {
    if (n_trees < 0) throw ConfigError("model.n_trees must be >= 0");
    if (!(learning_rate > 0.0) || learning_rate > 1.0)
        throw ConfigError("model.learning_rate must be in (0, 1]");
    if (max_depth < 1) throw ConfigError("model.max_depth must be >= 1");
    if (min_samples_leaf < 1) throw ConfigError("model.min_samples_leaf must be >= 1");
    if (!(subsample > 0.0) || subsample > 1.0)
        throw ConfigError("model.subsample must be in (0, 1]");
}

double GbdtModel::predict_row(std::span<const double> row) const {
    double sum = 0.0;
    for (const Tree& t : trees) sum += t.predict_row(row);
    return base_score + learning_rate * sum;
}

namespace {

// State of one frontier node while a level is scanned.
struct NodeBuild {
    int tree_index;      // index into Tree::nodes
    std::int64_t count = 0;
    double sum = 0.0;
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;
    // per-feature scan state
    std::int64_t prefix_count = 0;
    double prefix_sum = 0.0;
    double prev_value = 0.0;
};

double midpoint(double lo, double hi) {
    double mid = lo + (hi - lo) * 0.5;
    // Adjacent representable values can round the midpoint onto lo; routing
    // is `x < threshold`, so fall back to hi which induces the same partition.
    if (!(mid > lo)) mid = hi;
    return mid;
}

}  // namespace

GbdtModel fit(const Dataset& train, const GbdtParams& params) {
    params.validate();
    if (train.n_rows() == 0) throw std::runtime_error("fit: empty training set");
    if (train.n_features() == 0) throw std::runtime_error("fit: no features");

    const std::size_t n = train.n_rows();
    const std::size_t n_feat = train.n_features();

    GbdtModel model;
    model.learning_rate = params.learning_rate;
    model.feature_names = train.feature_names();
    model.base_score = mean(train.target());

    const auto& y = train.target();
    double y_min = y[0], y_max = y[0];
    for (double v : y) {
        y_min = std::min(y_min, v);
        y_max = std::max(y_max, v);
    }
    if (y_min == y_max || params.n_trees == 0) return model;  // constant predictor

    // Presort every feature once; ties ordered by row index so the scan order
    // is fully determined by the data.
    std::vector<std::vector<std::int32_t>> order(n_feat);
    for (std::size_t f = 0; f < n_feat; ++f) {
        order[f].resize(n);
        std::iota(order[f].begin(), order[f].end(), 0);
        const auto& col = train.column(f);
        std::sort(order[f].begin(), order[f].end(), [&col](std::int32_t a, std::int32_t b) {
            if (col[a] != col[b]) return col[a] < col[b];
            return a < b;
        });
    }

    std::vector<double> residual(n);
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - model.base_score;

    const std::int64_t msl = params.min_samples_leaf;
    std::vector<std::int32_t> slot(n);        // frontier slot per row, -1 = settled
    std::vector<double> contrib(n);           // leaf value reached by each row
    std::vector<char> in_tree(n, 1);
    std::vector<std::size_t> sample_pool(n);
    std::iota(sample_pool.begin(), sample_pool.end(), 0);

    for (int t = 0; t < params.n_trees; ++t) {
        Tree tree;

        if (params.subsample < 1.0) {
            std::fill(in_tree.begin(), in_tree.end(), 0);
            std::size_t m = static_cast<std::size_t>(params.subsample * static_cast<double>(n));
            m = std::max<std::size_t>(m, 1);
            Rng rng(params.seed + static_cast<std::uint64_t>(t) * 0x9E3779B97F4A7C15ULL);
            std::vector<std::size_t> pool = sample_pool;
            for (std::size_t k = 0; k < m; ++k) {
                std::size_t j = k + static_cast<std::size_t>(rng.bounded(pool.size() - k));
                std::swap(pool[k], pool[j]);
                in_tree[pool[k]] = 1;
            }
        }

        // Root
        std::vector<NodeBuild> frontier(1);
        frontier[0].tree_index = 0;
        tree.nodes.emplace_back();
        for (std::size_t i = 0; i < n; ++i) {
            if (!in_tree[i]) {
                slot[i] = -1;
                continue;
            }
            slot[i] = 0;
            frontier[0].count++;
            frontier[0].sum += residual[i];
        }

        for (int depth = 0; depth < params.max_depth && !frontier.empty(); ++depth) {
            // Best split per frontier node, scanning features in index order
            // and thresholds ascending; strictly-greater comparison keeps the
            // first (lowest feature, lowest threshold) candidate on ties.
            for (auto& nb : frontier) {
                nb.best_gain = 0.0;
                nb.best_feature = -1;
            }
            for (std::size_t f = 0; f < n_feat; ++f) {
                const auto& col = train.column(f);
                for (auto& nb : frontier) {
                    nb.prefix_count = 0;
                    nb.prefix_sum = 0.0;
                }
                for (std::int32_t i : order[f]) {
                    const std::int32_t u = slot[i];
                    if (u < 0) continue;
                    NodeBuild& nb = frontier[static_cast<std::size_t>(u)];
                    const double v = col[static_cast<std::size_t>(i)];
                    if (nb.prefix_count >= msl && v > nb.prev_value &&
                        nb.count - nb.prefix_count >= msl) {
                        const double nl = static_cast<double>(nb.prefix_count);
                        const double nr = static_cast<double>(nb.count - nb.prefix_count);
                        const double sl = nb.prefix_sum;
                        const double sr = nb.sum - sl;
                        const double gain =
                            sl * sl / nl + sr * sr / nr - nb.sum * nb.sum / static_cast<double>(nb.count);
                        if (gain > nb.best_gain) {
                            nb.best_gain = gain;
                            nb.best_feature = static_cast<int>(f);
                            nb.best_threshold = midpoint(nb.prev_value, v);
                        }
                    }
                    nb.prefix_count++;
                    nb.prefix_sum += residual[i];
                    nb.prev_value = v;
                }
            }

            // Materialize splits / leaves and build the next frontier.
            std::vector<NodeBuild> next;
            std::vector<std::int32_t> child_slot(frontier.size(), -1);
            for (std::size_t u = 0; u < frontier.size(); ++u) {
                NodeBuild& nb = frontier[u];
                TreeNode& node = tree.nodes[static_cast<std::size_t>(nb.tree_index)];
                node.cover = nb.count;
                if (nb.best_feature < 0 || !(nb.best_gain > 0.0)) {
                    node.is_leaf = true;
                    node.value = nb.sum / static_cast<double>(nb.count);
                    continue;
                }
                node.is_leaf = false;
                node.feature = nb.best_feature;
                node.threshold = nb.best_threshold;
                node.left = static_cast<int>(tree.nodes.size());
                node.right = node.left + 1;
                child_slot[u] = static_cast<std::int32_t>(next.size());
                NodeBuild l, r;
                l.tree_index = node.left;
                r.tree_index = node.right;
                next.push_back(l);
                next.push_back(r);
                tree.nodes.emplace_back();
                tree.nodes.emplace_back();
            }

            // Reroute rows; settle rows whose node became a leaf.
            for (std::size_t i = 0; i < n; ++i) {
                const std::int32_t u = slot[i];
                if (u < 0) continue;
                const NodeBuild& nb = frontier[static_cast<std::size_t>(u)];
                const TreeNode& node = tree.nodes[static_cast<std::size_t>(nb.tree_index)];
                if (node.is_leaf) {
                    contrib[i] = node.value;
                    slot[i] = -1;
                    continue;
                }
                const bool go_left =
                    train.column(static_cast<std::size_t>(node.feature))[i] < node.threshold;
                const std::int32_t cs = child_slot[static_cast<std::size_t>(u)] + (go_left ? 0 : 1);
                slot[i] = cs;
                NodeBuild& child = next[static_cast<std::size_t>(cs)];
                child.count++;
                child.sum += residual[i];
            }
            frontier = std::move(next);
        }

        // Depth limit reached: everything still on the frontier is a leaf.
        for (const NodeBuild& nb : frontier) {
            TreeNode& node = tree.nodes[static_cast<std::size_t>(nb.tree_index)];
            node.is_leaf = true;
            node.cover = nb.count;
            node.value = nb.sum / static_cast<double>(nb.count);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const std::int32_t u = slot[i];
            if (u >= 0) {
                const NodeBuild& nb = frontier[static_cast<std::size_t>(u)];
                contrib[i] = tree.nodes[static_cast<std::size_t>(nb.tree_index)].value;
            }
        }

        // Cover bookkeeping uses the full training set even when the tree was
        // grown on a subsample (attribution weights downstream expect
        // cover(root) == training-set size).
        if (params.subsample < 1.0) {
            for (TreeNode& nd : tree.nodes) nd.cover = 0;
            for (std::size_t i = 0; i < n; ++i) {
                int node = 0;
                while (true) {
                    tree.nodes[static_cast<std::size_t>(node)].cover++;
                    const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node)];
                    if (nd.is_leaf) break;
                    node = (train.column(static_cast<std::size_t>(nd.feature))[i] < nd.threshold)
                               ? nd.left
                               : nd.right;
                }
            }
        }

        // Update residuals on all rows (including out-of-sample ones).
        std::vector<double> row_buf(n_feat);
        for (std::size_t i = 0; i < n; ++i) {
            double c;
            if (in_tree[i]) {
                c = contrib[i];
            } else {
                for (std::size_t j = 0; j < n_feat; ++j) row_buf[j] = train.column(j)[i];
                c = tree.predict_row(row_buf);
            }
            residual[i] -= params.learning_rate * c;
        }

        model.trees.push_back(std::move(tree));
    }
    return model;
}

std::vector<double> predict(const GbdtModel& model, const std::vector<std::vector<double>>& rows) {
    std::vector<double> out(rows.size());
    parallel_for(rows.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (rows[i].size() != model.n_features())
                throw std::runtime_error("predict: row width " + std::to_string(rows[i].size()) +
                                         " != feature count " +
                                         std::to_string(model.n_features()));
            out[i] = model.predict_row(rows[i]);
        }
    });
    return out;
}

std::vector<double> predict(const GbdtModel& model, const Dataset& ds) {
    if (ds.feature_names() != model.feature_names)
        throw std::runtime_error("predict: dataset features do not match the fitted model");
    std::vector<double> out(ds.n_rows());
    parallel_for(ds.n_rows(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> row(ds.n_features());
        for (std::size_t i = begin; i < end; ++i) {
            for (std::size_t j = 0; j < ds.n_features(); ++j) row[j] = ds.column(j)[i];
            out[i] = model.predict_row(row);
        }
    });
    return out;
}

void save_model(const GbdtModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "gbdt v1\n";
    out << "base_score " << format_double(model.base_score) << "\n";
    out << "learning_rate " << format_double(model.learning_rate) << "\n";
    out << "n_features " << model.feature_names.size() << "\n";
    for (const auto& name : model.feature_names) out << "feature " << name << "\n";
    out << "n_trees " << model.trees.size() << "\n";
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        const Tree& tree = model.trees[t];
        out << "tree " << t << " " << tree.nodes.size() << "\n";
        for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
            const TreeNode& nd = tree.nodes[k];
            if (nd.is_leaf) {
                out << "node " << k << " leaf " << format_double(nd.value) << " " << nd.cover
                    << "\n";
            } else {
                out << "node " << k << " split " << nd.feature << " "
                    << format_double(nd.threshold) << " " << nd.left << " " << nd.right << " "
                    << nd.cover << "\n";
            }
        }
    }
    out << "end\n";
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

namespace {

void validate_tree(const Tree& tree, std::size_t n_features, std::int64_t root_cover) {
    if (tree.nodes.empty()) throw std::runtime_error("model: empty tree");
    if (tree.nodes[0].cover != root_cover && root_cover >= 0)
        throw std::runtime_error("model: root cover mismatch");
    for (std::size_t k = 0; k < tree.nodes.size(); ++k) {
        const TreeNode& nd = tree.nodes[k];
        if (nd.cover <= 0) throw std::runtime_error("model: non-positive cover");
        if (nd.is_leaf) {
            if (!std::isfinite(nd.value)) throw std::runtime_error("model: non-finite leaf");
            continue;
        }
        if (nd.feature < 0 || static_cast<std::size_t>(nd.feature) >= n_features)
            throw std::runtime_error("model: feature index out of range");
        if (nd.left <= static_cast<int>(k) || nd.right <= static_cast<int>(k) ||
            nd.left >= static_cast<int>(tree.nodes.size()) ||
            nd.right >= static_cast<int>(tree.nodes.size()) || nd.left == nd.right)
            throw std::runtime_error("model: bad child links at node " + std::to_string(k));
        const std::int64_t child_sum = tree.nodes[static_cast<std::size_t>(nd.left)].cover +
                                       tree.nodes[static_cast<std::size_t>(nd.right)].cover;
        if (child_sum != nd.cover)
            throw std::runtime_error("model: child covers do not sum to parent at node " +
                                     std::to_string(k));
    }
}

std::vector<std::string> expect_line(std::istream& in, const char* what) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(std::string("model: missing ") + what);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> tok;
    std::istringstream ss(line);
    std::string t;
    while (ss >> t) tok.push_back(t);
    return tok;
}

}  // namespace

GbdtModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");

    auto tok = expect_line(in, "magic");
    if (tok.size() != 2 || tok[0] != "gbdt" || tok[1] != "v1")
        throw std::runtime_error("model: bad magic line");

    GbdtModel model;
    tok = expect_line(in, "base_score");
    if (tok.size() != 2 || tok[0] != "base_score") throw std::runtime_error("model: bad base_score");
    model.base_score = parse_double_strict(tok[1]);
    tok = expect_line(in, "learning_rate");
    if (tok.size() != 2 || tok[0] != "learning_rate")
        throw std::runtime_error("model: bad learning_rate");
    model.learning_rate = parse_double_strict(tok[1]);
    tok = expect_line(in, "n_features");
    if (tok.size() != 2 || tok[0] != "n_features") throw std::runtime_error("model: bad n_features");
    const std::size_t n_features = std::stoul(tok[1]);
    for (std::size_t j = 0; j < n_features; ++j) {
        tok = expect_line(in, "feature");
        if (tok.size() != 2 || tok[0] != "feature") throw std::runtime_error("model: bad feature");
        model.feature_names.push_back(tok[1]);
    }
    tok = expect_line(in, "n_trees");
    if (tok.size() != 2 || tok[0] != "n_trees") throw std::runtime_error("model: bad n_trees");
    const std::size_t n_trees = std::stoul(tok[1]);

    std::int64_t root_cover = -1;
    for (std::size_t t = 0; t < n_trees; ++t) {
        tok = expect_line(in, "tree");
        if (tok.size() != 3 || tok[0] != "tree") throw std::runtime_error("model: bad tree header");
        const std::size_t n_nodes = std::stoul(tok[2]);
        Tree tree;
        tree.nodes.resize(n_nodes);
        for (std::size_t k = 0; k < n_nodes; ++k) {
            tok = expect_line(in, "node");
            if (tok.size() < 4 || tok[0] != "node" || std::stoul(tok[1]) != k)
                throw std::runtime_error("model: bad node line");
            TreeNode& nd = tree.nodes[k];
            if (tok[2] == "leaf") {
                if (tok.size() != 5) throw std::runtime_error("model: bad leaf line");
                nd.is_leaf = true;
                nd.value = parse_double_strict(tok[3]);
                nd.cover = std::stoll(tok[4]);
            } else if (tok[2] == "split") {
                if (tok.size() != 8) throw std::runtime_error("model: bad split line");
                nd.is_leaf = false;
                nd.feature = std::stoi(tok[3]);
                nd.threshold = parse_double_strict(tok[4]);
                nd.left = std::stoi(tok[5]);
                nd.right = std::stoi(tok[6]);
                nd.cover = std::stoll(tok[7]);
            } else {
                throw std::runtime_error("model: unknown node kind '" + tok[2] + "'");
            }
        }
        validate_tree(tree, n_features, root_cover);
        if (root_cover < 0) root_cover = tree.nodes[0].cover;
        model.trees.push_back(std::move(tree));
    }
    tok = expect_line(in, "end");
    if (tok.size() != 1 || tok[0] != "end") throw std::runtime_error("model: missing end marker");
    return model;
}

}  // namespace shapshift
