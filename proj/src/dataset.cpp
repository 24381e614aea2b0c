#include "shapshift/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "shapshift/common.hpp"

namespace shapshift {

namespace {

bool valid_name(const std::string& name) {
    if (name.empty()) return false;
    for (char c : name) {
        const bool ok = (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') ||
                        (c >= '0' && c <= '9') || c == '_';
        if (!ok) return false;
    }
    return true;
}

void check_finite(const std::vector<double>& v, const std::string& what) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v[i]))
            throw std::runtime_error("non-finite value in " + what + " at row " +
                                     std::to_string(i));
    }
}

}  // namespace

Dataset::Dataset(std::vector<std::string> feature_names,
                 std::vector<std::vector<double>> columns,
                 std::vector<double> target,
                 std::string target_name)
    : target_(std::move(target)), target_name_(std::move(target_name)) {
    if (feature_names.size() != columns.size())
        throw std::runtime_error("Dataset: name/column count mismatch");
    if (target_.empty()) throw std::runtime_error("Dataset: empty target");
    if (!valid_name(target_name_))
        throw std::runtime_error("Dataset: invalid target name '" + target_name_ + "'");
    check_finite(target_, "target");

    const std::size_t n = target_.size();
    std::vector<std::size_t> order(feature_names.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return feature_names[a] < feature_names[b];
    });

    feature_names_.reserve(order.size());
    columns_.reserve(order.size());
    for (std::size_t k : order) {
        const std::string& name = feature_names[k];
        if (!valid_name(name))
            throw std::runtime_error("Dataset: invalid feature name '" + name + "'");
        if (!feature_names_.empty() && feature_names_.back() == name)
            throw std::runtime_error("Dataset: duplicate feature name '" + name + "'");
        if (name == target_name_)
            throw std::runtime_error("Dataset: feature name collides with target '" + name + "'");
        if (columns[k].size() != n)
            throw std::runtime_error("Dataset: column '" + name + "' has wrong length");
        check_finite(columns[k], "column '" + name + "'");
        feature_names_.push_back(name);
        columns_.push_back(std::move(columns[k]));
    }
}

const std::vector<double>& Dataset::column(const std::string& name) const {
    return columns_[feature_index(name)];
}

std::size_t Dataset::feature_index(const std::string& name) const {
    auto it = std::lower_bound(feature_names_.begin(), feature_names_.end(), name);
    if (it == feature_names_.end() || *it != name)
        throw std::runtime_error("unknown feature '" + name + "'");
    return static_cast<std::size_t>(it - feature_names_.begin());
}

bool Dataset::has_feature(const std::string& name) const {
    return std::binary_search(feature_names_.begin(), feature_names_.end(), name);
}

std::vector<double> Dataset::row(std::size_t i) const {
    std::vector<double> out(n_features());
    for (std::size_t j = 0; j < n_features(); ++j) out[j] = columns_[j][i];
    return out;
}

Dataset Dataset::select(const std::vector<std::string>& names) const {
    std::vector<std::string> sel_names;
    std::vector<std::vector<double>> sel_cols;
    sel_names.reserve(names.size());
    sel_cols.reserve(names.size());
    for (const auto& name : names) {
        sel_names.push_back(name);
        sel_cols.push_back(columns_[feature_index(name)]);
    }
    return Dataset(std::move(sel_names), std::move(sel_cols), target_, target_name_);
}

Dataset Dataset::take_rows(std::span<const std::size_t> indices) const {
    std::vector<std::vector<double>> cols(n_features());
    for (std::size_t j = 0; j < n_features(); ++j) {
        cols[j].reserve(indices.size());
        for (std::size_t i : indices) cols[j].push_back(columns_[j].at(i));
    }
    std::vector<double> tgt;
    tgt.reserve(indices.size());
    for (std::size_t i : indices) tgt.push_back(target_.at(i));
    return Dataset(feature_names_, std::move(cols), std::move(tgt), target_name_);
}

Dataset Dataset::concat(const Dataset& a, const Dataset& b) {
    if (a.feature_names_ != b.feature_names_ || a.target_name_ != b.target_name_)
        throw std::runtime_error("Dataset::concat: schema mismatch");
    std::vector<std::vector<double>> cols(a.n_features());
    for (std::size_t j = 0; j < a.n_features(); ++j) {
        cols[j] = a.columns_[j];
        cols[j].insert(cols[j].end(), b.columns_[j].begin(), b.columns_[j].end());
    }
    std::vector<double> tgt = a.target_;
    tgt.insert(tgt.end(), b.target_.begin(), b.target_.end());
    return Dataset(a.feature_names_, std::move(cols), std::move(tgt), a.target_name_);
}

Dataset load_csv(const std::string& path, const std::string& target_column) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("'" + path + "': empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    const std::vector<std::string> header = split(line, ',');
    std::ptrdiff_t target_pos = -1;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (!valid_name(header[j]))
            throw std::runtime_error("'" + path + "': invalid column name '" + header[j] + "'");
        for (std::size_t k = j + 1; k < header.size(); ++k)
            if (header[j] == header[k])
                throw std::runtime_error("'" + path + "': duplicate column '" + header[j] + "'");
        if (header[j] == target_column) target_pos = static_cast<std::ptrdiff_t>(j);
    }
    if (target_pos < 0)
        throw std::runtime_error("'" + path + "': target column '" + target_column +
                                 "' not found");

    std::vector<std::vector<double>> raw(header.size());
    std::size_t row_no = 1;
    while (std::getline(in, line)) {
        ++row_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const std::vector<std::string> cells = split(line, ',');
        if (cells.size() != header.size())
            throw std::runtime_error("'" + path + "': row " + std::to_string(row_no) + " has " +
                                     std::to_string(cells.size()) + " cells, expected " +
                                     std::to_string(header.size()));
        for (std::size_t j = 0; j < cells.size(); ++j) {
            double v;
            try {
                v = parse_double_strict(cells[j]);
            } catch (const std::exception& e) {
                throw std::runtime_error("'" + path + "': row " + std::to_string(row_no) +
                                         ", column '" + header[j] + "': " + e.what());
            }
            raw[j].push_back(v);
        }
    }
    if (raw[0].empty()) throw std::runtime_error("'" + path + "': no data rows");

    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;
    std::vector<double> target;
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (static_cast<std::ptrdiff_t>(j) == target_pos) {
            target = std::move(raw[j]);
        } else {
            names.push_back(header[j]);
            cols.push_back(std::move(raw[j]));
        }
    }
    return Dataset(std::move(names), std::move(cols), std::move(target), target_column);
}

void write_csv(const Dataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    std::string header = join(ds.feature_names(), ",");
    if (!header.empty()) header += ",";
    header += ds.target_name();
    out << header << "\n";
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        std::string line;
        for (std::size_t j = 0; j < ds.n_features(); ++j) {
            line += format_double(ds.column(j)[i]);
            line += ",";
        }
        line += format_double(ds.target()[i]);
        out << line << "\n";
    }
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

SplitIndices split_chronological(const Dataset& ds, std::size_t n_train, std::size_t n_val) {
    const std::size_t n = ds.n_rows();
    if (n_train < 1 || n_val < 1)
        throw std::runtime_error("split_chronological: train and val must be nonempty");
    if (n_train + n_val > n)
        throw std::runtime_error("split_chronological: n_train + n_val exceeds " +
                                 std::to_string(n) + " rows");
    SplitIndices s;
    for (std::size_t i = 0; i < n_train; ++i) s.train.push_back(i);
    for (std::size_t i = n_train; i < n_train + n_val; ++i) s.val.push_back(i);
    for (std::size_t i = n_train + n_val; i < n; ++i) s.test.push_back(i);
    return s;
}

SplitIndices split_random(const Dataset& ds, double f_train, double f_val, double f_test,
                          std::uint64_t seed) {
    if (f_train <= 0.0 || f_val <= 0.0 || f_test <= 0.0)
        throw std::runtime_error("split_random: fractions must be positive");
    if (std::abs(f_train + f_val + f_test - 1.0) > 1e-9)
        throw std::runtime_error("split_random: fractions must sum to 1");
    const std::size_t n = ds.n_rows();
    // Floor sizes for val/test; train absorbs the remainder.
    const std::size_t n_val = static_cast<std::size_t>(f_val * static_cast<double>(n));
    const std::size_t n_test = static_cast<std::size_t>(f_test * static_cast<double>(n));
    if (n_val == 0 || n_test == 0 || n_val + n_test >= n)
        throw std::runtime_error("split_random: degenerate split for n=" + std::to_string(n));

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(seed);
    rng.shuffle(perm);

    SplitIndices s;
    const std::size_t n_train = n - n_val - n_test;
    s.train.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train),
                 perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(perm.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), perm.end());
    std::sort(s.train.begin(), s.train.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.test.begin(), s.test.end());
    return s;
}

Dataset add_lag_feature(const Dataset& ds, const std::string& source, std::size_t lag,
                        const std::string& new_name) {
    const std::size_t n = ds.n_rows();
    if (lag == 0) throw std::runtime_error("add_lag_feature: lag must be positive");
    if (lag >= n)
        throw std::runtime_error("add_lag_feature: lag " + std::to_string(lag) +
                                 " >= row count " + std::to_string(n));
    if (ds.has_feature(new_name) || new_name == ds.target_name())
        throw std::runtime_error("add_lag_feature: name '" + new_name + "' already exists");

    const std::vector<double>& src =
        (source == ds.target_name()) ? ds.target() : ds.column(source);

    std::vector<std::string> names = ds.feature_names();
    std::vector<std::vector<double>> cols;
    cols.reserve(names.size() + 1);
    for (std::size_t j = 0; j < ds.n_features(); ++j)
        cols.emplace_back(ds.column(j).begin() + static_cast<std::ptrdiff_t>(lag),
                          ds.column(j).end());
    names.push_back(new_name);
    cols.emplace_back(src.begin(), src.end() - static_cast<std::ptrdiff_t>(lag));
    std::vector<double> target(ds.target().begin() + static_cast<std::ptrdiff_t>(lag),
                               ds.target().end());
    return Dataset(std::move(names), std::move(cols), std::move(target), ds.target_name());
}

Dataset permute_column(const Dataset& ds, const std::string& name, std::uint64_t seed,
                       const std::string& new_name) {
    if (ds.has_feature(new_name) || new_name == ds.target_name())
        throw std::runtime_error("permute_column: name '" + new_name + "' already exists");
    std::vector<double> shuffled = ds.column(name);
    Rng rng(seed);
    rng.shuffle(shuffled);

    std::vector<std::string> names = ds.feature_names();
    std::vector<std::vector<double>> cols = ds.columns();
    names.push_back(new_name);
    cols.push_back(std::move(shuffled));
    return Dataset(std::move(names), std::move(cols), ds.target(), ds.target_name());
}

}  // namespace shapshift
