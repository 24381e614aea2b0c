#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace shapshift {

// ---------------------------------------------------------------------------
// Tabular data model. Columns are always kept sorted ascending by feature
// name (unique names, [A-Za-z0-9_] only) and the matrix is rectangular and
// NaN/inf free; every operation returns a new Dataset, so instances can be
// shared freely across threads.
// ---------------------------------------------------------------------------
class Dataset {
public:
    Dataset() = default;

    // Validates and canonicalizes (sorts columns by name). Throws
    // std::runtime_error on duplicate/invalid names, shape mismatch or
    // non-finite values.
    Dataset(std::vector<std::string> feature_names,
            std::vector<std::vector<double>> columns,
            std::vector<double> target,
            std::string target_name = "y");

    std::size_t n_rows() const { return target_.size(); }
    std::size_t n_features() const { return feature_names_.size(); }

    const std::vector<std::string>& feature_names() const { return feature_names_; }
    const std::string& target_name() const { return target_name_; }
    const std::vector<double>& target() const { return target_; }

    const std::vector<double>& column(std::size_t index) const { return columns_[index]; }
    const std::vector<double>& column(const std::string& name) const;
    const std::vector<std::vector<double>>& columns() const { return columns_; }

    // Index of a feature name; throws if absent.
    std::size_t feature_index(const std::string& name) const;
    bool has_feature(const std::string& name) const;

    // One observation as a dense row (feature order == name order).
    std::vector<double> row(std::size_t i) const;

    // New Dataset with only the named features (any order; result re-sorted).
    Dataset select(const std::vector<std::string>& names) const;

    // New Dataset with the given rows, in the given order.
    Dataset take_rows(std::span<const std::size_t> indices) const;

    // Row-wise concatenation; both sides must have identical schema.
    static Dataset concat(const Dataset& a, const Dataset& b);

private:
    std::vector<std::string> feature_names_;
    std::vector<std::vector<double>> columns_;  // one vector per feature
    std::vector<double> target_;
    std::string target_name_ = "y";
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
    std::vector<std::size_t> test;
};

// CSV: UTF-8, comma delimiter, '.' decimals, header row, no quoting.
Dataset load_csv(const std::string& path, const std::string& target_column);
void write_csv(const Dataset& ds, const std::string& path);

// train = [0, n_train), val = [n_train, n_train + n_val), test = rest.
SplitIndices split_chronological(const Dataset& ds, std::size_t n_train, std::size_t n_val);

// Seeded random partition; sizes are floor(fraction * n) for val and test
// with the remainder going to train. Index order inside each set is ascending
// (original row order).
SplitIndices split_random(const Dataset& ds, double f_train, double f_val, double f_test,
                          std::uint64_t seed);

// Appends a column holding `source` shifted down by `lag` rows and drops the
// first `lag` rows of everything. `source` may be a feature name or the
// target name.
Dataset add_lag_feature(const Dataset& ds, const std::string& source, std::size_t lag,
                        const std::string& new_name);

// Appends a seeded uniform random permutation of the named column.
Dataset permute_column(const Dataset& ds, const std::string& name, std::uint64_t seed,
                       const std::string& new_name);

}  // namespace shapshift
