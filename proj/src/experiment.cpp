#include "cbm/experiment.hpp"

#include "cbm/knn.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <future>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

namespace cbm {

const std::vector<DatasetInfo>& dataset_registry() {
    static const std::vector<DatasetInfo> registry = {
        {"ambiguousblobs", "AmbiguousBlobs", false, 20},
        {"blobs", "Blobs", false, 20},
        {"noconceptblobs", "NoConceptBlobs", false, 20},
        {"overlappingblobs", "OverlappingBlobs", false, 20},
        {"paritymnist", "ParityMNIST", true, 10},
        {"paritymnist-nomissing", "ParityMNIST-NoMissing", true, 10},
    };
    return registry;
}

const DatasetInfo& dataset_info(const std::string& token) {
    for (const DatasetInfo& info : dataset_registry()) {
        if (info.token == token) return info;
    }
    throw std::invalid_argument("unknown dataset: " + token);
}

TrainConfig default_train_config(const std::string& dataset_token) {
    TrainConfig cfg;
    if (dataset_info(dataset_token).is_mnist) {
        cfg.epochs = 40;
        cfg.batch_size = 256;
    } else {
        cfg.epochs = 10;
        cfg.batch_size = 32;
    }
    return cfg;
}

ConceptPredictorConfig default_predictor_config(const std::string& dataset_token) {
    ConceptPredictorConfig cfg;
    cfg.train = default_train_config(dataset_token);
    if (!dataset_info(dataset_token).is_mnist) {
        // The blob tasks need the stochastic predictions to stay informative
        // near ambiguous regions; a heavier mask rate plus a finer vote grid
        // keeps confident clusters pinned at 0/1 while uncertain points get
        // distinguishable fractions.
        cfg.dropout_p = 0.75;
        cfg.mcd_samples = 300;
    }
    return cfg;
}

namespace {

constexpr int kPointsPerCluster = 250;

std::optional<BlobVariant> blob_variant(const std::string& token) {
    if (token == "blobs") return BlobVariant::Blobs;
    if (token == "noconceptblobs") return BlobVariant::NoConceptBlobs;
    if (token == "ambiguousblobs") return BlobVariant::AmbiguousBlobs;
    if (token == "overlappingblobs") return BlobVariant::OverlappingBlobs;
    return std::nullopt;
}

std::pair<LabeledDataset, LabeledDataset> load_dataset(const std::string& token,
                                                       std::uint64_t seed,
                                                       const std::string& mnist_dir) {
    if (auto variant = blob_variant(token)) {
        return gen_blobs(blob_spec(*variant), kPointsPerCluster, seed);
    }
    const DatasetInfo& info = dataset_info(token);  // validates the token
    if (mnist_dir.empty()) {
        throw MnistError(MnistError::Kind::OpenFailed,
                         "MNIST directory not set for dataset '" + info.token +
                             "' (pass --mnist-dir or set MNIST_DIR)");
    }
    RawMnist raw_train = load_mnist(mnist_dir + "/train-images-idx3-ubyte",
                                    mnist_dir + "/train-labels-idx1-ubyte");
    raw_train.split = "train";
    RawMnist raw_test = load_mnist(mnist_dir + "/t10k-images-idx3-ubyte",
                                   mnist_dir + "/t10k-labels-idx1-ubyte");
    raw_test.split = "test";
    const ParityVariant variant =
        token == "paritymnist" ? ParityVariant::Missing34 : ParityVariant::NoMissing;
    return make_parity_mnist(raw_train, raw_test, variant);
}

}  // namespace

ExperimentResult summarize(const std::string& dataset_display, ConceptMode mode,
                           const std::vector<double>& accuracies) {
    if (accuracies.empty()) throw std::invalid_argument("summarize: no accuracies");
    ExperimentResult res;
    res.dataset = dataset_display;
    res.mode = mode;
    res.accuracies = accuracies;

    double sum = 0.0;
    res.min = accuracies.front();
    res.max = accuracies.front();
    for (double a : accuracies) {
        sum += a;
        res.min = std::min(res.min, a);
        res.max = std::max(res.max, a);
    }
    const double n = static_cast<double>(accuracies.size());
    res.mean = sum / n;
    if (accuracies.size() > 1) {
        double sq = 0.0;
        for (double a : accuracies) sq += (a - res.mean) * (a - res.mean);
        res.stddev = std::sqrt(sq / (n - 1.0));
    }
    return res;
}

double run_repeat(const std::string& dataset, const ConceptPredictorConfig& config,
                  std::uint64_t seed, const std::string& mnist_dir) {
    auto [train, test] = load_dataset(dataset, seed, mnist_dir);

    // Data randomness comes from `seed`; training and MCD prediction are
    // reseeded at fixed offsets so they stay independent of it. The train and
    // test splits share one MCD seed: both sides of the 3-NN fit/evaluate pair
    // must see the same stochastic representation function, otherwise the
    // mask-set bias of the averages misaligns the two point clouds.
    ConceptPredictorConfig cfg = config;
    cfg.train.seed = seed + 10000;
    const Clm clm = train_clm(train, cfg);

    const std::uint64_t mcd_seed = seed + 10001;
    const Matrix train_reps = predict(clm, train.X, mcd_seed);
    const Knn knn = fit_3nn(train_reps, train.Y);
    const Matrix test_reps = predict(clm, test.X, mcd_seed);
    const std::vector<int> predicted = predict_3nn(knn, test_reps);
    return accuracy(predicted, test.Y);
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
    if (spec.repeats < 1) throw std::invalid_argument("run_experiment: repeats must be >= 1");
    const DatasetInfo& info = dataset_info(spec.dataset);

    ConceptPredictorConfig cfg = spec.config;
    cfg.mode = spec.mode;

    std::vector<double> accuracies(static_cast<std::size_t>(spec.repeats));
    unsigned width = spec.max_parallel > 0 ? static_cast<unsigned>(spec.max_parallel)
                                           : std::max(1u, std::thread::hardware_concurrency());
    width = std::min<unsigned>(width, static_cast<unsigned>(spec.repeats));

    if (width <= 1) {
        for (int i = 0; i < spec.repeats; ++i) {
            accuracies[static_cast<std::size_t>(i)] =
                run_repeat(spec.dataset, cfg, spec.base_seed + static_cast<std::uint64_t>(i),
                           spec.mnist_dir);
        }
    } else {
        // Each repeat owns its model, dataset and generators; join in index
        // order so the summary is independent of scheduling.
        std::atomic<int> next{0};
        std::vector<std::future<void>> workers;
        std::vector<std::exception_ptr> errors(static_cast<std::size_t>(spec.repeats));
        for (unsigned w = 0; w < width; ++w) {
            workers.push_back(std::async(std::launch::async, [&]() {
                for (int i = next.fetch_add(1); i < spec.repeats; i = next.fetch_add(1)) {
                    try {
                        accuracies[static_cast<std::size_t>(i)] = run_repeat(
                            spec.dataset, cfg, spec.base_seed + static_cast<std::uint64_t>(i),
                            spec.mnist_dir);
                    } catch (...) {
                        errors[static_cast<std::size_t>(i)] = std::current_exception();
                    }
                }
            }));
        }
        for (auto& f : workers) f.get();
        for (const auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    return summarize(info.display, spec.mode, accuracies);
}

std::vector<ExperimentSpec> grid_plan(std::uint64_t base_seed, const std::string& mnist_dir,
                                      std::optional<int> blob_repeats,
                                      std::optional<int> mnist_repeats) {
    const ConceptMode mode_order[] = {ConceptMode::HardMcd, ConceptMode::SoftMcd,
                                      ConceptMode::Hard, ConceptMode::Soft};
    std::vector<ExperimentSpec> plan;
    for (const DatasetInfo& info : dataset_registry()) {
        for (ConceptMode mode : mode_order) {
            ExperimentSpec spec;
            spec.dataset = info.token;
            spec.mode = mode;
            spec.repeats = info.is_mnist ? mnist_repeats.value_or(info.default_repeats)
                                         : blob_repeats.value_or(info.default_repeats);
            spec.base_seed = base_seed;
            spec.config = default_predictor_config(info.token);
            spec.mnist_dir = mnist_dir;
            plan.push_back(std::move(spec));
        }
    }
    return plan;
}

void write_results_csv(const std::vector<ExperimentResult>& results, std::ostream& out) {
    if (results.empty()) throw std::invalid_argument("write_results: no results");
    out << "dataset,algorithm,mean_acc,std_acc,min_acc,max_acc\n";
    char buf[160];
    for (const ExperimentResult& r : results) {
        std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%.6f,%.6f", r.mean, r.stddev, r.min, r.max);
        out << r.dataset << ',' << concept_mode_label(r.mode) << ',' << buf << '\n';
    }
}

void write_results_markdown(const std::vector<ExperimentResult>& results, std::ostream& out) {
    if (results.empty()) throw std::invalid_argument("write_results: no results");

    // Group rows by dataset (first-appearance order), modes in column order.
    std::vector<std::string> datasets;
    for (const ExperimentResult& r : results) {
        if (std::find(datasets.begin(), datasets.end(), r.dataset) == datasets.end()) {
            datasets.push_back(r.dataset);
        }
    }
    const ConceptMode mode_order[] = {ConceptMode::HardMcd, ConceptMode::SoftMcd,
                                      ConceptMode::Hard, ConceptMode::Soft};

    out << "| Dataset | Algorithm | Mean Acc. | Std. dev. Acc. | Min. Acc. | Max. Acc. |\n";
    out << "|---|---|---|---|---|---|\n";
    char buf[160];
    for (const std::string& ds : datasets) {
        for (ConceptMode mode : mode_order) {
            for (const ExperimentResult& r : results) {
                if (r.dataset != ds || r.mode != mode) continue;
                std::snprintf(buf, sizeof(buf), "%.6f | %.6f | %.6f | %.6f", r.mean, r.stddev,
                              r.min, r.max);
                out << "| " << r.dataset << " | " << concept_mode_label(r.mode) << " | " << buf
                    << " |\n";
            }
        }
    }
}

void write_results(const std::vector<ExperimentResult>& results, const std::string& format,
                   const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write results to " + path);
    if (format == "csv") {
        write_results_csv(results, out);
    } else if (format == "markdown") {
        write_results_markdown(results, out);
    } else {
        throw std::invalid_argument("unknown results format: " + format);
    }
    if (!out.good()) throw std::runtime_error("write failed for " + path);
}

void emit_projection(const std::string& dataset, std::uint64_t seed,
                     const std::string& out_path) {
    const auto variant = blob_variant(dataset);
    if (!variant) {
        throw std::invalid_argument("emit_projection: blob datasets only, got '" + dataset + "'");
    }
    const BlobSpec spec = blob_spec(*variant);
    auto [train, test] = gen_blobs(spec, kPointsPerCluster, seed);

    // Linear concept model: logits = W2 x + b2, one weight row per concept.
    // Trained to convergence on its own schedule; the figure wants the
    // settled separating direction, not the experiment pipeline's snapshot.
    ConceptPredictorConfig cfg;
    cfg.hidden_dim = 0;
    cfg.dropout_p = 0.0;
    cfg.train.epochs = 200;
    cfg.train.batch_size = 32;
    cfg.train.seed = seed + 10000;
    const Clm clm = train_clm(train, cfg);

    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot write projection data to " + out_path);

    const int L = train.concepts();
    char buf[256];
    out << "# dataset=" << spec.name << " seed=" << seed << "\n";
    for (int l = 0; l < L; ++l) {
        std::snprintf(buf, sizeof(buf), "# concept %d: w=[%.10g,%.10g] b=%.10g", l,
                      clm.net.W2(l, 0), clm.net.W2(l, 1), clm.net.b2[l]);
        out << buf << "\n";
    }
    out << "x1,x2";
    for (int l = 0; l < L; ++l) out << (L == 1 ? ",c" : ",c" + std::to_string(l));
    out << ",y";
    for (int l = 0; l < L; ++l) out << (L == 1 ? ",proj" : ",proj" + std::to_string(l));
    for (int l = 0; l < L; ++l) out << (L == 1 ? ",sigma" : ",sigma" + std::to_string(l));
    out << "\n";

    const Matrix proj = (train.X * clm.net.W2.transpose()).rowwise() + clm.net.b2.transpose();
    for (int i = 0; i < train.n(); ++i) {
        std::snprintf(buf, sizeof(buf), "%.10g,%.10g", train.X(i, 0), train.X(i, 1));
        out << buf;
        for (int l = 0; l < L; ++l) out << ',' << static_cast<int>(train.C(i, l));
        out << ',' << train.Y[static_cast<std::size_t>(i)];
        for (int l = 0; l < L; ++l) {
            std::snprintf(buf, sizeof(buf), ",%.10g", proj(i, l));
            out << buf;
        }
        for (int l = 0; l < L; ++l) {
            std::snprintf(buf, sizeof(buf), ",%.10g", sigmoid(proj(i, l)));
            out << buf;
        }
        out << "\n";
    }
    if (!out.good()) throw std::runtime_error("write failed for " + out_path);
}

namespace {

std::string env_mnist_dir() {
    const char* env = std::getenv("MNIST_DIR");
    return env != nullptr ? env : "";
}

void print_results(const std::vector<ExperimentResult>& results, const std::string& format,
                   const std::string& out_path) {
    if (out_path.empty()) {
        if (format == "csv") {
            write_results_csv(results, std::cout);
        } else {
            write_results_markdown(results, std::cout);
        }
    } else {
        write_results(results, format, out_path);
    }
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Concept bottleneck model experiments"};
    app.require_subcommand(1);

    std::string dataset, mode_token = "soft", out_path, format = "csv";
    std::string mnist_dir = env_mnist_dir();
    std::uint64_t seed = 0;
    int repeats = -1;
    int mcd_samples = 0;
    double dropout = -1.0, threshold = -1.0;
    int epochs = -1, batch_size = -1;
    double lr = -1.0;
    int blob_repeats = 20, mnist_repeats = 10;

    CLI::App* run = app.add_subcommand("run", "Run one dataset x mode experiment");
    run->add_option("--dataset", dataset, "Dataset token")->required();
    run->add_option("--mode", mode_token, "Concept mode: hard, soft, hard-mcd, soft-mcd");
    run->add_option("--repeats", repeats, "Number of repeats (default per dataset)");
    run->add_option("--seed", seed, "Base seed");
    run->add_option("--mcd-samples", mcd_samples, "MCD sample count T (default per dataset)");
    run->add_option("--dropout", dropout, "Dropout rate (default per dataset)");
    run->add_option("--threshold", threshold, "Hard-label threshold (default 0.5)");
    run->add_option("--epochs", epochs, "Training epochs (default per dataset)");
    run->add_option("--lr", lr, "Learning rate");
    run->add_option("--batch-size", batch_size, "Minibatch size (default per dataset)");
    run->add_option("--mnist-dir", mnist_dir, "Directory with MNIST IDX files");
    run->add_option("--out", out_path, "Output path (default: stdout)");
    run->add_option("--format", format, "csv or markdown")
        ->check(CLI::IsMember({"csv", "markdown"}));

    CLI::App* grid = app.add_subcommand("grid", "Run the full results-table grid");
    grid->add_option("--seed", seed, "Base seed");
    grid->add_option("--blob-repeats", blob_repeats, "Repeats for blob datasets");
    grid->add_option("--mnist-repeats", mnist_repeats, "Repeats for MNIST datasets");
    grid->add_option("--mnist-dir", mnist_dir, "Directory with MNIST IDX files");
    grid->add_option("--out", out_path, "Output path (default: stdout)");
    grid->add_option("--format", format, "csv or markdown")
        ->check(CLI::IsMember({"csv", "markdown"}));

    CLI::App* plot = app.add_subcommand("plot-projection", "Emit Figure-1 projection data");
    plot->add_option("--dataset", dataset, "Blob dataset token")->required();
    plot->add_option("--seed", seed, "Seed");
    plot->add_option("--out", out_path, "Output CSV path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (run->parsed()) {
            ExperimentSpec spec;
            spec.dataset = dataset;
            spec.mode = parse_concept_mode(mode_token);
            spec.repeats = repeats > 0 ? repeats : dataset_info(dataset).default_repeats;
            spec.base_seed = seed;
            spec.mnist_dir = mnist_dir;
            spec.config = default_predictor_config(dataset);
            if (mcd_samples > 0) spec.config.mcd_samples = mcd_samples;
            if (dropout >= 0.0) spec.config.dropout_p = dropout;
            if (threshold > 0.0) spec.config.threshold = threshold;
            if (epochs >= 0) spec.config.train.epochs = epochs;
            if (batch_size > 0) spec.config.train.batch_size = batch_size;
            if (lr > 0.0) spec.config.train.learning_rate = lr;
            const ExperimentResult result = run_experiment(spec);
            print_results({result}, format, out_path);
        } else if (grid->parsed()) {
            std::vector<ExperimentResult> results;
            for (const ExperimentSpec& spec : grid_plan(seed, mnist_dir, blob_repeats,
                                                        mnist_repeats)) {
                ExperimentResult r = run_experiment(spec);
                std::fprintf(stderr, "%-22s %-12s mean=%.3f std=%.3f\n", r.dataset.c_str(),
                             concept_mode_label(r.mode).c_str(), r.mean, r.stddev);
                results.push_back(std::move(r));
            }
            print_results(results, format, out_path);
        } else if (plot->parsed()) {
            emit_projection(dataset, seed, out_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

}  // namespace cbm
