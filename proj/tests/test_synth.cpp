#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "shapshift/common.hpp"
#include "shapshift/synth.hpp"

using namespace shapshift;

TEST_CASE("sudden schedule steps at the break index") {
    ShiftScenario scn;  // defaults: case-1 coefficients, sudden
    CHECK(lambda_at(scn, 1, 0) == -10.0);
    CHECK(lambda_at(scn, 1, 19999) == -10.0);
    CHECK(lambda_at(scn, 1, 20000) == -4.0);
    CHECK(lambda_at(scn, 2, 19999) == 10.0);
    CHECK(lambda_at(scn, 2, 20000) == -25.0);
    CHECK(lambda_at(scn, 2, 29999) == -25.0);
    CHECK_THROWS_AS(lambda_at(scn, 1, 30000), std::runtime_error);
    CHECK_THROWS_AS(lambda_at(scn, 3, 0), std::runtime_error);
}

TEST_CASE("incremental schedule follows the fixed-denominator interpolation") {
    ShiftScenario scn;
    scn.kind = ShiftKind::Incremental;
    scn.lambda1_a = -1.0;
    scn.lambda1_b = -0.4;
    CHECK(lambda_at(scn, 1, 19999) == -1.0);
    CHECK(lambda_at(scn, 1, 22500) == doctest::Approx((0.6 * 2500.0 - 10000.0) / 10000.0));
    CHECK(lambda_at(scn, 1, 22500) == doctest::Approx(-0.85));
    CHECK(lambda_at(scn, 1, 25000) == -0.4);  // b-value exactly from the ramp end
    CHECK(lambda_at(scn, 1, 29999) == -0.4);
    // The 10000 denominator over a 5000-wide ramp stops at the midpoint, so
    // the ramp end is a jump from ~(a+b)/2 to b.
    const double last_ramp = lambda_at(scn, 1, 24999);
    CHECK(last_ramp == doctest::Approx((0.6 * 4999.0 - 10000.0) / 10000.0));
}

TEST_CASE("generate: shape, range and determinism") {
    ShiftScenario scn;
    scn.n_samples = 3000;
    scn.break_index = 2000;
    scn.ramp_len = 500;
    scn.seed = 11;
    const Dataset ds = generate(scn);
    CHECK(ds.n_rows() == scn.n_samples - 1);
    CHECK(ds.n_features() == 21);

    // All x columns live in [0, 1]; the target stays finite.
    for (std::size_t j = 0; j < ds.n_features(); ++j) {
        if (ds.feature_names()[j] == "y_lag1") continue;
        for (double v : ds.column(j)) {
            CHECK(v >= 0.0);
            CHECK(v < 1.0);
        }
    }

    const Dataset again = generate(scn);
    CHECK(again.target() == ds.target());
    for (std::size_t j = 0; j < ds.n_features(); ++j) CHECK(again.column(j) == ds.column(j));
}

TEST_CASE("generate: expected feature names in sorted order") {
    ShiftScenario scn;
    scn.n_samples = 50;
    scn.break_index = 30;
    scn.ramp_len = 10;
    const Dataset ds = generate(scn);
    const auto& names = ds.feature_names();
    CHECK(std::find(names.begin(), names.end(), "x01") != names.end());
    CHECK(std::find(names.begin(), names.end(), "x10_lag1") != names.end());
    CHECK(std::find(names.begin(), names.end(), "y_lag1") != names.end());
    CHECK(std::is_sorted(names.begin(), names.end()));
}

TEST_CASE("noise-free generation matches an independent evaluator") {
    ShiftScenario scn;
    scn.kind = ShiftKind::Sudden;
    scn.n_samples = 400;
    scn.break_index = 250;
    scn.noise_sd = 0.0;
    scn.seed = 99;
    const Dataset ds = generate(scn);

    // Recompute the target from the emitted feature columns only.
    auto col = [&](const char* name) -> const std::vector<double>& { return ds.column(name); };
    const double two_pi = 2.0 * 3.14159265358979323846;
    for (std::size_t i = 0; i < ds.n_rows(); i += 7) {
        const std::size_t t = i + 1;  // emitted row i corresponds to sample t
        const double l1 = lambda_at(scn, 1, t);
        const double l2 = lambda_at(scn, 2, t);
        auto group = [&](const std::vector<double>& x1, const std::vector<double>& x2,
                         const std::vector<double>& x3, const std::vector<double>& x4,
                         const std::vector<double>& x5) {
            return 2.0 * x1[i] + l1 * x2[i] * x2[i] + 3.0 * std::sin(two_pi * x3[i]) -
                   0.4 * x4[i] + l2 * x5[i] * x5[i];
        };
        const double expected =
            group(col("x01"), col("x02"), col("x03"), col("x04"), col("x05")) +
            group(col("x01_lag1"), col("x02_lag1"), col("x03_lag1"), col("x04_lag1"),
                  col("x05_lag1"));
        CHECK(ds.target()[i] == doctest::Approx(expected).epsilon(1e-12));
    }

    // Lag columns line up with the current columns shifted by one row.
    for (std::size_t i = 1; i < ds.n_rows(); ++i) {
        CHECK(ds.column("x01_lag1")[i] == ds.column("x01")[i - 1]);
        CHECK(ds.column("y_lag1")[i] == ds.target()[i - 1]);
    }
}

TEST_CASE("zero lambdas and zero draws annihilate the function") {
    // All terms vanish at x = 0: the sin, linear and squared pieces are zero.
    ShiftScenario scn;
    scn.lambda1_a = scn.lambda1_b = scn.lambda2_a = scn.lambda2_b = 0.0;
    scn.noise_sd = 0.0;
    scn.n_samples = 10;
    scn.break_index = 5;
    scn.ramp_len = 2;
    const Dataset ds = generate(scn);
    for (std::size_t i = 0; i < ds.n_rows(); ++i) {
        const double x1 = ds.column("x01")[i], x3 = ds.column("x03")[i],
                     x4 = ds.column("x04")[i];
        const double x1l = ds.column("x01_lag1")[i], x3l = ds.column("x03_lag1")[i],
                     x4l = ds.column("x04_lag1")[i];
        const double expected = 2.0 * x1 + 3.0 * std::sin(2.0 * 3.14159265358979323846 * x3) -
                                0.4 * x4 + 2.0 * x1l +
                                3.0 * std::sin(2.0 * 3.14159265358979323846 * x3l) - 0.4 * x4l;
        CHECK(ds.target()[i] == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("scenario_grid is the 81-point lexicographic product") {
    const std::vector<ShiftScenario> grid = scenario_grid(ShiftKind::Sudden);
    CHECK(grid.size() == 81);
    CHECK(grid[0].lambda1_a == -10.0);
    CHECK(grid[0].lambda1_b == -4.0);
    CHECK(grid[0].lambda2_a == 10.0);
    CHECK(grid[0].lambda2_b == -25.0);

    bool found_case3 = false;
    for (const ShiftScenario& s : grid)
        found_case3 |= s.lambda1_a == -0.1 && s.lambda1_b == -0.04 && s.lambda2_a == 0.1 &&
                       s.lambda2_b == -0.25;
    CHECK(found_case3);

    // Deterministic order: last element is the all-smallest-magnitude corner.
    CHECK(grid[80].lambda1_a == -0.1);
    CHECK(grid[80].lambda2_b == -0.25);
}

TEST_CASE("representative cases map to the study corners") {
    const ShiftScenario c1 = representative_case(ShiftKind::Sudden, 1);
    CHECK(c1.lambda2_b == -25.0);
    const ShiftScenario c2 = representative_case(ShiftKind::Incremental, 2);
    CHECK(c2.lambda1_a == -1.0);
    CHECK(c2.kind == ShiftKind::Incremental);
    const ShiftScenario c3 = representative_case(ShiftKind::Sudden, 3);
    CHECK(c3.lambda2_a == 0.1);
    CHECK_THROWS_AS(representative_case(ShiftKind::Sudden, 4), ConfigError);
}
