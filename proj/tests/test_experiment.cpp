#include "cbm/experiment.hpp"

#include "cbm/knn.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

using namespace cbm;

namespace {

ExperimentSpec quick_blob_spec(const std::string& dataset, ConceptMode mode, int repeats,
                               int epochs = 60) {
    ExperimentSpec spec;
    spec.dataset = dataset;
    spec.mode = mode;
    spec.repeats = repeats;
    spec.base_seed = 0;
    spec.config.train = default_train_config(dataset);
    spec.config.train.epochs = epochs;
    return spec;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path);
    REQUIRE(f.good());
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("dataset registry covers the closed vocabulary") {
    CHECK(dataset_registry().size() == 6);
    CHECK(dataset_info("blobs").display == "Blobs");
    CHECK(dataset_info("paritymnist-nomissing").display == "ParityMNIST-NoMissing");
    CHECK(dataset_info("paritymnist").is_mnist);
    CHECK_FALSE(dataset_info("overlappingblobs").is_mnist);
    CHECK_THROWS_AS(dataset_info("cub"), std::invalid_argument);

    CHECK(default_train_config("blobs").batch_size == 32);
    CHECK(default_train_config("paritymnist").batch_size == 256);
    CHECK(default_train_config("paritymnist").epochs > default_train_config("blobs").epochs);

    // Per-family predictor defaults: heavier masking and finer vote grid for
    // the blob tasks, the classic 0.5 / 50 for MNIST.
    CHECK(default_predictor_config("blobs").dropout_p == 0.75);
    CHECK(default_predictor_config("blobs").mcd_samples == 300);
    CHECK(default_predictor_config("paritymnist").dropout_p == 0.5);
    CHECK(default_predictor_config("paritymnist").mcd_samples == 50);
    CHECK(default_predictor_config("blobs").threshold == 0.5);
}

TEST_CASE("summarize computes the appendix statistics") {
    const ExperimentResult r = summarize("Blobs", ConceptMode::Soft, {0.4, 0.6});
    CHECK(r.mean == doctest::Approx(0.5));
    CHECK(r.min == 0.4);
    CHECK(r.max == 0.6);
    CHECK(r.stddev == doctest::Approx(std::sqrt(0.02)).epsilon(1e-12));  // 0.1414...

    const ExperimentResult one = summarize("Blobs", ConceptMode::Soft, {0.7});
    CHECK(one.stddev == 0.0);
    CHECK(one.mean == 0.7);
    CHECK(one.min == 0.7);
    CHECK(one.max == 0.7);

    CHECK_THROWS_AS(summarize("Blobs", ConceptMode::Soft, {}), std::invalid_argument);
}

TEST_CASE("grid plan enumerates the full results table") {
    const auto plan = grid_plan(0, "");
    REQUIRE(plan.size() == 24);  // 6 datasets x 4 modes

    // Dataset-major, table order; HardMcd, SoftMcd, Hard, Soft within.
    CHECK(plan[0].dataset == "ambiguousblobs");
    CHECK(plan[0].mode == ConceptMode::HardMcd);
    CHECK(plan[1].mode == ConceptMode::SoftMcd);
    CHECK(plan[2].mode == ConceptMode::Hard);
    CHECK(plan[3].mode == ConceptMode::Soft);
    CHECK(plan[4].dataset == "blobs");
    CHECK(plan[20].dataset == "paritymnist-nomissing");

    // Default repeat counts: 20 for blobs, 10 for MNIST.
    CHECK(plan[0].repeats == 20);
    CHECK(plan[16].repeats == 10);

    const auto fast = grid_plan(0, "", 2, 1);
    CHECK(fast[0].repeats == 2);
    CHECK(fast[16].repeats == 1);
}

TEST_CASE("run_repeat is deterministic end to end") {
    ConceptPredictorConfig cfg;
    cfg.mode = ConceptMode::Soft;
    cfg.train = default_train_config("blobs");
    cfg.train.epochs = 40;
    const double a = run_repeat("blobs", cfg, 123);
    const double b = run_repeat("blobs", cfg, 123);
    CHECK(a == b);
}

TEST_CASE("run_experiment aggregates independent repeats") {
    const ExperimentSpec spec = quick_blob_spec("blobs", ConceptMode::Soft, 3, 40);
    const ExperimentResult res = run_experiment(spec);
    REQUIRE(res.accuracies.size() == 3);
    CHECK(res.dataset == "Blobs");
    CHECK(res.min <= res.mean);
    CHECK(res.mean <= res.max);
    CHECK(res.stddev >= 0.0);

    // Each repeat's seed depends only on its index.
    ConceptPredictorConfig cfg = spec.config;
    cfg.mode = spec.mode;
    for (int i = 0; i < 3; ++i) {
        CHECK(res.accuracies[static_cast<std::size_t>(i)] ==
              run_repeat("blobs", cfg, spec.base_seed + static_cast<std::uint64_t>(i)));
    }
}

TEST_CASE("missing MNIST directory raises an error naming the dataset") {
    ConceptPredictorConfig cfg;
    cfg.train = default_train_config("paritymnist");
    CHECK_THROWS_WITH_AS(run_repeat("paritymnist", cfg, 0, ""),
                         doctest::Contains("MNIST directory not set"), MnistError);
    CHECK_THROWS_WITH_AS(run_repeat("paritymnist", cfg, 0, "/nonexistent-dir"),
                         doctest::Contains("/nonexistent-dir"), MnistError);
}

TEST_CASE("csv output uses the pinned schema and round-trips") {
    std::vector<ExperimentResult> results;
    results.push_back(summarize("Blobs", ConceptMode::HardMcd, {0.497, 0.503, 0.51}));
    results.push_back(summarize("Blobs", ConceptMode::Soft, {0.84, 0.87}));

    std::stringstream out;
    write_results_csv(results, out);
    std::string line;
    std::getline(out, line);
    CHECK(line == "dataset,algorithm,mean_acc,std_acc,min_acc,max_acc");
    std::getline(out, line);
    CHECK(line.substr(0, 18) == "Blobs,NN+Hard+MCD,");

    // Round-trip the first row's numbers at 6 decimals.
    std::stringstream row(line.substr(18));
    double mean, stddev, mn, mx;
    char comma;
    row >> mean >> comma >> stddev >> comma >> mn >> comma >> mx;
    CHECK(mean == doctest::Approx(results[0].mean).epsilon(1e-6));
    CHECK(stddev == doctest::Approx(results[0].stddev).epsilon(1e-6));
    CHECK(mn == doctest::Approx(results[0].min).epsilon(1e-6));
    CHECK(mx == doctest::Approx(results[0].max).epsilon(1e-6));

    CHECK_THROWS_AS(write_results_csv({}, out), std::invalid_argument);
}

TEST_CASE("markdown output groups datasets and orders modes like the table") {
    std::vector<ExperimentResult> results;
    // Shuffled input order on purpose.
    results.push_back(summarize("NoConceptBlobs", ConceptMode::Soft, {0.98}));
    results.push_back(summarize("Blobs", ConceptMode::Soft, {0.85}));
    results.push_back(summarize("Blobs", ConceptMode::HardMcd, {0.50}));
    results.push_back(summarize("NoConceptBlobs", ConceptMode::Hard, {0.47}));

    std::stringstream out;
    write_results_markdown(results, out);
    const std::string text = out.str();

    const auto p_hdr = text.find("| Dataset | Algorithm |");
    const auto p1 = text.find("| NoConceptBlobs | NN+Hard |");
    const auto p2 = text.find("| NoConceptBlobs | NN+Soft |");
    const auto p3 = text.find("| Blobs | NN+Hard+MCD |");
    const auto p4 = text.find("| Blobs | NN+Soft |");
    REQUIRE(p_hdr != std::string::npos);
    REQUIRE(p1 != std::string::npos);
    REQUIRE(p2 != std::string::npos);
    REQUIRE(p3 != std::string::npos);
    REQUIRE(p4 != std::string::npos);
    CHECK(p1 < p2);  // Hard before Soft within a dataset group
    CHECK(p2 < p3);  // first-appearance dataset order
    CHECK(p3 < p4);
}

TEST_CASE("projection data separates the Blobs concepts") {
    const std::string path = "/tmp/cbm_test_projection.csv";
    emit_projection("blobs", 5, path);
    const std::string text = slurp(path);

    std::stringstream in(text);
    std::string line;
    std::getline(in, line);
    CHECK(line.substr(0, 1) == "#");
    std::getline(in, line);  // concept weight comment
    CHECK(line.find("w=[") != std::string::npos);
    std::getline(in, line);
    CHECK(line == "x1,x2,c,y,proj,sigma");

    int rows = 0, sign_ok = 0;
    while (std::getline(in, line)) {
        double x1, x2, proj, sigma;
        int c, y;
        std::sscanf(line.c_str(), "%lf,%lf,%d,%d,%lf,%lf", &x1, &x2, &c, &y, &proj, &sigma);
        CHECK(sigma > 0.0);
        CHECK(sigma < 1.0);
        ++rows;
        if ((proj > 0.0) == (c == 1)) ++sign_ok;
    }
    CHECK(rows == 1000);
    CHECK(static_cast<double>(sign_ok) / rows >= 0.99);

    CHECK_THROWS_AS(emit_projection("paritymnist", 0, path), std::invalid_argument);
}

TEST_CASE("projection data carries one column set per concept") {
    const std::string path = "/tmp/cbm_test_projection_l2.csv";
    emit_projection("noconceptblobs", 3, path);
    std::ifstream in(path);
    REQUIRE(in.good());
    std::string line;
    int weight_comments = 0;
    while (std::getline(in, line) && line[0] == '#') {
        weight_comments += line.find("w=[") != std::string::npos;
    }
    CHECK(weight_comments == 2);
    CHECK(line == "x1,x2,c0,c1,y,proj0,proj1,sigma0,sigma1");
}

TEST_CASE("cli run writes a single summary row") {
    const std::string out = "/tmp/cbm_cli_run.csv";
    const char* argv[] = {"cbm",   "run",  "--dataset", "blobs",      "--mode", "soft",
                          "--repeats", "1",    "--seed",    "0",          "--epochs", "30",
                          "--out",     out.c_str()};
    CHECK(cli_main(static_cast<int>(std::size(argv)), argv) == 0);
    const std::string text = slurp(out);
    CHECK(text.find("dataset,algorithm,") == 0);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);
    CHECK(text.find("Blobs,NN+Soft,") != std::string::npos);
}

TEST_CASE("cli reports usage errors with exit code 2") {
    const char* argv[] = {"cbm", "run", "--dataset", "blobs", "--frobnicate"};
    CHECK(cli_main(static_cast<int>(std::size(argv)), argv) == 2);
    const char* argv2[] = {"cbm", "frobnicate"};
    CHECK(cli_main(static_cast<int>(std::size(argv2)), argv2) == 2);
}

TEST_CASE("cli fails with exit code 1 when MNIST files are missing") {
    const char* argv[] = {"cbm",       "run", "--dataset", "paritymnist", "--repeats", "1",
                          "--mnist-dir", "/nonexistent-mnist-dir"};
    CHECK(cli_main(static_cast<int>(std::size(argv)), argv) == 1);
}

TEST_CASE("cli falls back to the MNIST_DIR environment variable") {
    char* saved = std::getenv("MNIST_DIR");
    const std::string restore = saved != nullptr ? saved : "";
    setenv("MNIST_DIR", "/nonexistent-env-mnist-dir", 1);
    const char* argv[] = {"cbm", "run", "--dataset", "paritymnist", "--repeats", "1"};
    CHECK(cli_main(static_cast<int>(std::size(argv)), argv) == 1);
    if (saved != nullptr) {
        setenv("MNIST_DIR", restore.c_str(), 1);
    } else {
        unsetenv("MNIST_DIR");
    }
}

TEST_CASE("cli rejects an unknown dataset at runtime") {
    const char* argv[] = {"cbm", "run", "--dataset", "cub", "--repeats", "1"};
    CHECK(cli_main(static_cast<int>(std::size(argv)), argv) == 1);
}
