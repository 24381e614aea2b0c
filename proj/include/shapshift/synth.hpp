#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "shapshift/dataset.hpp"

namespace shapshift {

// ---------------------------------------------------------------------------
// Synthetic concept-shift scenarios over a fixed nonlinear autoregressive
// target. Two coefficients switch from their a-values to their b-values at a
// breakpoint, either instantly (sudden) or along a ramp (incremental).
// ---------------------------------------------------------------------------

enum class ShiftKind { Sudden, Incremental };

ShiftKind shift_kind_from_string(const std::string& name);
std::string shift_kind_to_string(ShiftKind k);

struct ShiftScenario {
    double lambda1_a = -10.0;
    double lambda1_b = -4.0;
    double lambda2_a = 10.0;
    double lambda2_b = -25.0;
    ShiftKind kind = ShiftKind::Sudden;
    std::size_t n_samples = 30000;
    std::size_t break_index = 20000;
    std::size_t ramp_len = 5000;   // incremental only
    double noise_sd = 0.1;         // noise variance 0.01
    std::uint64_t seed = 0;

    void validate() const;
};

// Coefficient value at a sample index. `which` selects lambda 1 or 2.
// Incremental note: the ramp interpolation uses a fixed denominator of 10000
// regardless of ramp_len, so with the default 5000-sample ramp the value only
// reaches the midpoint before snapping to the b-value at
// break_index + ramp_len. This is the defined schedule, not a bug.
double lambda_at(const ShiftScenario& scn, int which, std::size_t index);

// Emits n_samples-1 rows with 21 features: the ten current draws, their
// one-step lags (suffix `_lag1`) and the lag of the target (`y_lag1`), plus
// the target `y`. The first sample only seeds the lags and is dropped; its
// own target value (which becomes y_lag1 of the first emitted row) reuses the
// index-0 draws for the lagged terms.
Dataset generate(const ShiftScenario& scn);

// Full Cartesian product over the four coefficient grids (81 scenarios),
// ordered lexicographically over the grid lists.
std::vector<ShiftScenario> scenario_grid(ShiftKind kind);

// The three grid corners studied in depth; `case_number` in {1, 2, 3}.
ShiftScenario representative_case(ShiftKind kind, int case_number);

// Plain-text key=value sidecar with every scenario field.
void write_scenario_meta(const ShiftScenario& scn, const std::string& path);

}  // namespace shapshift
