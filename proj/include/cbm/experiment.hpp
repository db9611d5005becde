#pragma once

#include "cbm/clm.hpp"
#include "cbm/datasets.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace cbm {

struct DatasetInfo {
    std::string token;    // CLI token, lowercase
    std::string display;  // results-table name
    bool is_mnist = false;
    int default_repeats = 20;  // 20 for blob datasets, 10 for MNIST ones
};

// Closed vocabulary: blobs, noconceptblobs, ambiguousblobs, overlappingblobs,
// paritymnist, paritymnist-nomissing (in results-table order).
const std::vector<DatasetInfo>& dataset_registry();
const DatasetInfo& dataset_info(const std::string& token);

// Training defaults: 10 epochs / batch 32 for blobs, 40 / 256 for MNIST.
TrainConfig default_train_config(const std::string& dataset_token);

// Full predictor defaults per dataset family. Blob datasets pair a higher
// dropout rate with a larger MCD sample count (0.75 / 300); MNIST datasets
// use the classic 0.5 / 50.
ConceptPredictorConfig default_predictor_config(const std::string& dataset_token);

struct ExperimentSpec {
    std::string dataset;  // token
    ConceptMode mode = ConceptMode::Soft;
    int repeats = 20;
    std::uint64_t base_seed = 0;
    ConceptPredictorConfig config;
    std::string mnist_dir;  // required for MNIST datasets
    int max_parallel = 0;   // 0 = hardware concurrency
};

struct ExperimentResult {
    std::string dataset;  // display name
    ConceptMode mode = ConceptMode::Soft;
    std::vector<double> accuracies;  // one per repeat
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation (n-1), 0 for one repeat
    double min = 0.0;
    double max = 0.0;
};

ExperimentResult summarize(const std::string& dataset_display, ConceptMode mode,
                           const std::vector<double>& accuracies);

// One sequential-bottleneck run: data from `seed`, CLM training from
// seed + 10000, one MCD prediction stream (seed + 10001) shared by the
// train-split and test-split predictions.
double run_repeat(const std::string& dataset, const ConceptPredictorConfig& config,
                  std::uint64_t seed, const std::string& mnist_dir = "");

ExperimentResult run_experiment(const ExperimentSpec& spec);

// The full results-table grid: datasets in table order x modes in column
// order (HardMcd, SoftMcd, Hard, Soft).
std::vector<ExperimentSpec> grid_plan(std::uint64_t base_seed, const std::string& mnist_dir,
                                      std::optional<int> blob_repeats = std::nullopt,
                                      std::optional<int> mnist_repeats = std::nullopt);

// CSV columns: dataset,algorithm,mean_acc,std_acc,min_acc,max_acc (6 decimals).
void write_results_csv(const std::vector<ExperimentResult>& results, std::ostream& out);

// Markdown table in results-table layout: rows grouped by dataset, modes in
// column order within each group.
void write_results_markdown(const std::vector<ExperimentResult>& results, std::ostream& out);

void write_results(const std::vector<ExperimentResult>& results, const std::string& format,
                   const std::string& path);

// Trains a linear CLM (hidden_dim = 0) on a blob dataset's concept task and
// writes per-point projection records: x1,x2,c,y,proj,sigma. The weight vector
// and intercept go into a leading comment.
void emit_projection(const std::string& dataset, std::uint64_t seed, const std::string& out_path);

// Subcommands: run, grid, plot-projection. Exit codes: 0 success, 1 runtime
// failure, 2 usage error.
int cli_main(int argc, const char* const* argv);

}  // namespace cbm
