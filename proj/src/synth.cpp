#include "shapshift/synth.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "shapshift/common.hpp"

namespace shapshift {

namespace {
constexpr double kTwoPi = 2.0 * 3.14159265358979323846;
}

ShiftKind shift_kind_from_string(const std::string& name) {
    if (name == "sudden") return ShiftKind::Sudden;
    if (name == "incremental") return ShiftKind::Incremental;
    throw ConfigError("synth.kind: unknown value '" + name +
                      "' (expected sudden or incremental)");
}

std::string shift_kind_to_string(ShiftKind k) {
    return k == ShiftKind::Sudden ? "sudden" : "incremental";
}

void ShiftScenario::validate() const {
    if (n_samples < 2) throw ConfigError("synth.n_samples must be >= 2");
    if (break_index >= n_samples) throw ConfigError("synth break index out of range");
    if (kind == ShiftKind::Incremental && break_index + ramp_len > n_samples)
        throw ConfigError("synth: break_index + ramp_len exceeds n_samples");
    if (noise_sd < 0.0) throw ConfigError("synth.noise_sd must be >= 0");
}

double lambda_at(const ShiftScenario& scn, int which, std::size_t index) {
    if (which != 1 && which != 2) throw std::runtime_error("lambda_at: which must be 1 or 2");
    if (index >= scn.n_samples) throw std::runtime_error("lambda_at: index out of range");
    const double a = (which == 1) ? scn.lambda1_a : scn.lambda2_a;
    const double b = (which == 1) ? scn.lambda1_b : scn.lambda2_b;

    if (scn.kind == ShiftKind::Sudden) return index < scn.break_index ? a : b;

    if (index < scn.break_index) return a;
    if (index >= scn.break_index + scn.ramp_len) return b;
    const double offset = static_cast<double>(index - scn.break_index);
    return ((b - a) * offset + 10000.0 * a) / 10000.0;
}

Dataset generate(const ShiftScenario& scn) {
    scn.validate();
    const std::size_t n = scn.n_samples;

    // Draw order is fixed: ten uniforms per sample, then one normal per
    // sample, all from a single engine.
    Rng rng(scn.seed);
    std::vector<std::array<double, 10>> x(n);
    for (std::size_t t = 0; t < n; ++t)
        for (int j = 0; j < 10; ++j) x[t][static_cast<std::size_t>(j)] = rng.uniform01();
    std::vector<double> noise(n);
    for (std::size_t t = 0; t < n; ++t) noise[t] = scn.noise_sd * rng.normal();

    // Target for every sample; the index-0 sample has no predecessor, so its
    // lagged term group reuses the index-0 draws. That sample is dropped from
    // the emitted rows and only survives as y_lag1 of the first row.
    auto terms = [](const std::array<double, 10>& v, double l1, double l2) {
        return 2.0 * v[0] + l1 * v[1] * v[1] + 3.0 * std::sin(kTwoPi * v[2]) - 0.4 * v[3] +
               l2 * v[4] * v[4];
    };
    std::vector<double> y(n);
    for (std::size_t t = 0; t < n; ++t) {
        const double l1 = lambda_at(scn, 1, t);
        const double l2 = lambda_at(scn, 2, t);
        const std::array<double, 10>& prev = x[t == 0 ? 0 : t - 1];
        y[t] = terms(x[t], l1, l2) + terms(prev, l1, l2) + noise[t];
    }

    std::vector<std::string> names;
    std::vector<std::vector<double>> cols;
    auto add_column = [&](const std::string& name) -> std::vector<double>& {
        names.push_back(name);
        cols.emplace_back();
        cols.back().reserve(n - 1);
        return cols.back();
    };
    char buf[16];
    for (int j = 0; j < 10; ++j) {
        std::snprintf(buf, sizeof(buf), "x%02d", j + 1);
        auto& col = add_column(buf);
        for (std::size_t t = 1; t < n; ++t) col.push_back(x[t][static_cast<std::size_t>(j)]);
    }
    for (int j = 0; j < 10; ++j) {
        std::snprintf(buf, sizeof(buf), "x%02d_lag1", j + 1);
        auto& col = add_column(buf);
        for (std::size_t t = 1; t < n; ++t) col.push_back(x[t - 1][static_cast<std::size_t>(j)]);
    }
    {
        auto& col = add_column("y_lag1");
        for (std::size_t t = 1; t < n; ++t) col.push_back(y[t - 1]);
    }
    std::vector<double> target(y.begin() + 1, y.end());
    return Dataset(std::move(names), std::move(cols), std::move(target), "y");
}

std::vector<ShiftScenario> scenario_grid(ShiftKind kind) {
    const double grid_l1a[] = {-10.0, -1.0, -0.1};
    const double grid_l1b[] = {-4.0, -0.4, -0.04};
    const double grid_l2a[] = {10.0, 1.0, 0.1};
    const double grid_l2b[] = {-25.0, -2.5, -0.25};

    std::vector<ShiftScenario> out;
    out.reserve(81);
    for (double l1a : grid_l1a)
        for (double l1b : grid_l1b)
            for (double l2a : grid_l2a)
                for (double l2b : grid_l2b) {
                    ShiftScenario s;
                    s.lambda1_a = l1a;
                    s.lambda1_b = l1b;
                    s.lambda2_a = l2a;
                    s.lambda2_b = l2b;
                    s.kind = kind;
                    out.push_back(s);
                }
    return out;
}

ShiftScenario representative_case(ShiftKind kind, int case_number) {
    ShiftScenario s;
    s.kind = kind;
    switch (case_number) {
        case 1:
            s.lambda1_a = -10.0; s.lambda1_b = -4.0; s.lambda2_a = 10.0; s.lambda2_b = -25.0;
            break;
        case 2:
            s.lambda1_a = -1.0; s.lambda1_b = -0.4; s.lambda2_a = 1.0; s.lambda2_b = -2.5;
            break;
        case 3:
            s.lambda1_a = -0.1; s.lambda1_b = -0.04; s.lambda2_a = 0.1; s.lambda2_b = -0.25;
            break;
        default:
            throw ConfigError("synth case must be 1, 2 or 3");
    }
    return s;
}

void write_scenario_meta(const ShiftScenario& scn, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << "kind=" << shift_kind_to_string(scn.kind) << "\n";
    out << "lambda1_a=" << format_double(scn.lambda1_a) << "\n";
    out << "lambda1_b=" << format_double(scn.lambda1_b) << "\n";
    out << "lambda2_a=" << format_double(scn.lambda2_a) << "\n";
    out << "lambda2_b=" << format_double(scn.lambda2_b) << "\n";
    out << "n_samples=" << scn.n_samples << "\n";
    out << "break_index=" << scn.break_index << "\n";
    out << "ramp_len=" << scn.ramp_len << "\n";
    out << "noise_sd=" << format_double(scn.noise_sd) << "\n";
    out << "seed=" << scn.seed << "\n";
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace shapshift
