#pragma once

#include "cbm/mlp.hpp"

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cbm {

struct LabeledDataset {
    Matrix X;            // n x d features
    Matrix C;            // n x L concept labels, entries 0 or 1
    std::vector<int> Y;  // n target labels, values in {0,1}
    std::string name;    // dataset identifier
    std::string split;   // "train" or "test"

    int n() const { return static_cast<int>(X.rows()); }
    int dim() const { return static_cast<int>(X.cols()); }
    int concepts() const { return static_cast<int>(C.cols()); }
};

struct BlobCluster {
    Eigen::Vector2d mean;
    std::vector<double> concepts;  // length L, entries 0 or 1
    int target = 0;                // 0 or 1
};

struct BlobSpec {
    std::string name;
    std::vector<BlobCluster> clusters;
    double std_dev = 0.1;
    int concept_count = 1;
};

enum class BlobVariant { Blobs, NoConceptBlobs, AmbiguousBlobs, OverlappingBlobs };

BlobSpec blob_spec(BlobVariant variant);

// Draws n_per_cluster train points for every cluster, then n_per_cluster test
// points, from one generator seeded with `seed` (disjoint streams).
std::pair<LabeledDataset, LabeledDataset> gen_blobs(const BlobSpec& spec, int n_per_cluster,
                                                    std::uint64_t seed);

struct RawMnist {
    std::vector<std::uint8_t> images;  // n * 784, grayscale 0-255, row-flattened
    std::vector<std::uint8_t> digits;  // n, values 0-9
    std::string split;

    int n() const { return static_cast<int>(digits.size()); }
};

struct MnistError : std::runtime_error {
    enum class Kind { OpenFailed, BadMagic, Truncated, CountMismatch };
    Kind kind;
    MnistError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

// Parses a big-endian IDX image/label file pair (magics 2051 and 2049).
RawMnist load_mnist(const std::string& images_path, const std::string& labels_path);

enum class ParityVariant { Missing34, NoMissing };

// Features are pixels/255. Y = 0 for odd digits, 1 for even. C = [1,0] iff
// digit == 3, [0,1] iff digit == 4, [0,0] otherwise. Missing34 drops every
// 3 and 4 from both splits.
std::pair<LabeledDataset, LabeledDataset> make_parity_mnist(const RawMnist& raw_train,
                                                            const RawMnist& raw_test,
                                                            ParityVariant variant);

}  // namespace cbm
