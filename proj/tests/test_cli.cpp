#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "shapshift/common.hpp"
#include "shapshift/dataset.hpp"

// End-to-end checks against the installed binary. CTest provides its path via
// the SHAPSHIFT_CLI environment variable.

namespace fs = std::filesystem;
using namespace shapshift;

namespace {

std::string cli_path() {
    const char* p = std::getenv("SHAPSHIFT_CLI");
    REQUIRE(p != nullptr);
    return p;
}

int run(const std::string& args) {
    const std::string cmd = cli_path() + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::size_t count_lines(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n';
    return n;
}

}  // namespace

TEST_CASE("synth writes the documented row/column counts and is reproducible") {
    const fs::path dir = fresh_dir("cli_synth");
    const std::string common =
        "synth --kind sudden --case 1 --n-samples 500 --synth-seed 5 --out " + dir.string();
    REQUIRE(run(common) == 0);
    const Dataset ds = load_csv((dir / "dataset.csv").string(), "y");
    CHECK(ds.n_rows() == 499);
    CHECK(ds.n_features() == 21);

    const std::string first = read_text(dir / "dataset.csv");
    const std::string meta = read_text(dir / "dataset.meta");
    CHECK(meta.find("kind=sudden") != std::string::npos);
    CHECK(meta.find("lambda2_b=-25") != std::string::npos);

    REQUIRE(run(common) == 0);
    CHECK(read_text(dir / "dataset.csv") == first);
}

TEST_CASE("invalid configuration exits with code 2") {
    const fs::path dir = fresh_dir("cli_bad");
    CHECK(run("synth --kind sideways --out " + dir.string()) == 2);
    CHECK(run("select --q-low 0.9 --q-high 0.1 --data nonexistent.csv") == 2);
    CHECK(run("bogus-subcommand") == 2);
}

TEST_CASE("missing input file exits with code 1") {
    CHECK(run("select --data /nonexistent/things.csv --n-train 10 --n-val 5") == 1);
}

TEST_CASE("select emits trace and feature list") {
    const fs::path dir = fresh_dir("cli_select");
    REQUIRE(run("synth --kind sudden --case 1 --n-samples 600 --synth-seed 7 --out " +
                dir.string()) == 0);
    const std::string data = (dir / "dataset.csv").string();
    REQUIRE(run("select --data " + data + " --n-train 400 --n-val 120 --n-trees 20 "
                "--n-iter-prev 2 --max-depth 4 --min-samples-leaf 10 --out " +
                dir.string()) == 0);

    const std::string trace = read_text(dir / "trace.csv");
    CHECK(trace.rfind("iteration,n_features,removed,removal_kind,metric_value\n", 0) == 0);
    CHECK(trace.find("\nbest,") != std::string::npos);

    const std::string selected = read_text(dir / "selected_features.txt");
    CHECK(count_lines(selected) >= 1);
}

TEST_CASE("shap emits additive attributions with self-verification") {
    const fs::path dir = fresh_dir("cli_shap");
    REQUIRE(run("synth --kind sudden --case 3 --n-samples 400 --synth-seed 9 --out " +
                dir.string()) == 0);
    const std::string data = (dir / "dataset.csv").string();
    REQUIRE(run("shap --data " + data + " --n-train 300 --n-val 60 --n-trees 15 "
                "--max-depth 4 --min-samples-leaf 10 --verify --out " +
                dir.string()) == 0);
    const std::string shap = read_text(dir / "shap.csv");
    CHECK(shap.rfind("row_index,", 0) == 0);
    CHECK(shap.find(",base_value,prediction") != std::string::npos);
    CHECK(count_lines(shap) == 61);  // header + one row per validation row
}

TEST_CASE("bench runs are byte-identical and cover the requested algorithms") {
    const fs::path dir = fresh_dir("cli_bench");
    const std::string common =
        "bench --kind sudden --case 1 --n-samples 600 --synth-seed 3 "
        "--n-train 400 --n-val 100 --n-trees 10 --max-depth 3 --min-samples-leaf 10 "
        "--n-iter-prev 0 --seeds 1:3 --algorithms shapeffects,topk,lasso,keep_all "
        "--per-seed --out ";
    REQUIRE(run(common + (dir / "a").string()) == 0);
    REQUIRE(run(common + (dir / "b").string()) == 0);
    const std::string res_a = read_text(dir / "a" / "results.csv");
    CHECK(res_a == read_text(dir / "b" / "results.csv"));
    CHECK(read_text(dir / "a" / "results_per_seed.csv") ==
          read_text(dir / "b" / "results_per_seed.csv"));
    CHECK(count_lines(res_a) == 12);  // header + 5 + 1 + 4 + 1
    CHECK(res_a.find("shapeffects(0.1-0.9)") != std::string::npos);
    CHECK(res_a.find("keep_all") != std::string::npos);
}

TEST_CASE("config file, environment and flags compose in precedence order") {
    const fs::path dir = fresh_dir("cli_config");
    {
        std::ofstream out(dir / "run.conf");
        out << "synth.kind = sudden\n";
        out << "synth.n_samples = 300\n";
        out << "synth.seed = 1\n";
    }
    // Environment overrides the file, flags override the environment.
    const std::string cmd = "SHAPSHIFT_SYNTH_N_SAMPLES=400 " + cli_path() +
                            " synth --config " + (dir / "run.conf").string() +
                            " --synth-seed 2 --out " + dir.string() + " >/dev/null 2>&1";
    REQUIRE(WEXITSTATUS(std::system(cmd.c_str())) == 0);
    const Dataset ds = load_csv((dir / "dataset.csv").string(), "y");
    CHECK(ds.n_rows() == 399);  // env beat the file
    const std::string meta = read_text(dir / "dataset.meta");
    CHECK(meta.find("seed=2") != std::string::npos);  // flag beat everything
}
