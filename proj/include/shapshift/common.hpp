#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace shapshift {

// Thrown for invalid configuration or parameter values (CLI exit code 2).
// Everything else (I/O failures, malformed data files, ...) uses
// std::runtime_error and maps to exit code 1.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// ---------------------------------------------------------------------------
// Deterministic randomness
//
// All randomness in the project flows through this wrapper. mt19937_64 has a
// standardized sequence and the derived draws below avoid the
// implementation-defined std::*_distribution classes, so identical seeds give
// identical results on any platform.
// ---------------------------------------------------------------------------
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Uniform on [0, 1) with 53 bits of precision.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the spare value is cached.
    double normal();

    // Uniform integer in [0, n) by rejection sampling (exact, no modulo bias).
    std::uint64_t bounded(std::uint64_t n);

    // Fisher-Yates shuffle with the bounded() draw above.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// ---------------------------------------------------------------------------
// Order-statistics quantile with linear interpolation: h = (n-1)q, value
// interpolated between ranks floor(h) and ceil(h).
// ---------------------------------------------------------------------------

// `sorted` must be ascending and nonempty; q in [0, 1].
double quantile_sorted(std::span<const double> sorted, double q);

// Copies and sorts, then delegates to quantile_sorted.
double quantile(std::span<const double> values, double q);

double mean(std::span<const double> values);

// ---------------------------------------------------------------------------
// Canonical float text: shortest representation that round-trips exactly.
// Used by every CSV/metadata writer so re-runs are byte-identical.
// ---------------------------------------------------------------------------
std::string format_double(double value);

// Strict parse: the whole token must be a finite decimal number.
// Throws std::runtime_error naming the offending token otherwise.
double parse_double_strict(const std::string& token);

// ---------------------------------------------------------------------------
// String helpers
// ---------------------------------------------------------------------------
std::vector<std::string> split(const std::string& s, char delim);
std::string trim(const std::string& s);
std::string join(const std::vector<std::string>& parts, const std::string& sep);

// ---------------------------------------------------------------------------
// Row-level parallelism. Work is split into contiguous [begin, end) chunks so
// output ordering (and therefore every result bit) is independent of the
// thread count. Nested use from already-parallel sections degrades to serial.
// ---------------------------------------------------------------------------
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& chunk_fn);

}  // namespace shapshift
