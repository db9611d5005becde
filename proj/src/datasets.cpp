#include "cbm/datasets.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

namespace cbm {

namespace {

BlobCluster cluster(double mx, double my, std::vector<double> concepts, int target) {
    BlobCluster c;
    c.mean << mx, my;
    c.concepts = std::move(concepts);
    c.target = target;
    return c;
}

LabeledDataset assemble_blob_split(const BlobSpec& spec, int n_per_cluster,
                                   std::mt19937_64& rng, const char* split) {
    const int n_clusters = static_cast<int>(spec.clusters.size());
    const int n = n_clusters * n_per_cluster;
    LabeledDataset ds;
    ds.name = spec.name;
    ds.split = split;
    ds.X.resize(n, 2);
    ds.C.resize(n, spec.concept_count);
    ds.Y.resize(static_cast<std::size_t>(n));

    std::normal_distribution<double> gauss(0.0, spec.std_dev);
    int row = 0;
    for (const BlobCluster& cl : spec.clusters) {
        for (int i = 0; i < n_per_cluster; ++i, ++row) {
            ds.X(row, 0) = cl.mean.x() + gauss(rng);
            ds.X(row, 1) = cl.mean.y() + gauss(rng);
            for (int l = 0; l < spec.concept_count; ++l) {
                ds.C(row, l) = cl.concepts[static_cast<std::size_t>(l)];
            }
            ds.Y[static_cast<std::size_t>(row)] = cl.target;
        }
    }

    // Row order is shuffled so that downstream index-based tie-breaking (the
    // 3-NN rule) does not systematically favour the first cluster when many
    // representations coincide exactly.
    std::vector<int> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    LabeledDataset shuffled = ds;
    for (int r = 0; r < n; ++r) {
        const int src = perm[static_cast<std::size_t>(r)];
        shuffled.X.row(r) = ds.X.row(src);
        shuffled.C.row(r) = ds.C.row(src);
        shuffled.Y[static_cast<std::size_t>(r)] = ds.Y[static_cast<std::size_t>(src)];
    }
    return shuffled;
}

std::uint32_t read_be_u32(std::ifstream& f, const std::string& path) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    if (f.gcount() != 4) {
        throw MnistError(MnistError::Kind::Truncated, "truncated IDX header in " + path);
    }
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

BlobSpec blob_spec(BlobVariant variant) {
    BlobSpec spec;
    // Cluster order follows the label pattern (C=0,Y=0), (C=0,Y=1),
    // (C=1,Y=0), (C=1,Y=1).
    switch (variant) {
        case BlobVariant::Blobs:
            spec.name = "Blobs";
            spec.concept_count = 1;
            spec.clusters = {cluster(-1.0, -2.0, {0.0}, 0), cluster(1.0, -1.0, {0.0}, 1),
                             cluster(1.0, 1.0, {1.0}, 0), cluster(-1.0, 2.0, {1.0}, 1)};
            break;
        case BlobVariant::AmbiguousBlobs:
            spec.name = "AmbiguousBlobs";
            spec.concept_count = 1;
            spec.clusters = {cluster(-1.0, -2.0, {0.0}, 0), cluster(1.0, -0.25, {0.0}, 1),
                             cluster(1.0, 0.25, {1.0}, 0), cluster(-1.0, 2.0, {1.0}, 1)};
            break;
        case BlobVariant::NoConceptBlobs:
            spec.name = "NoConceptBlobs";
            spec.concept_count = 2;
            spec.clusters = {cluster(-1.0, -2.0, {0.0, 0.0}, 0), cluster(1.0, -1.0, {0.0, 0.0}, 1),
                             cluster(1.0, 1.0, {0.0, 0.0}, 0), cluster(-1.0, 2.0, {0.0, 0.0}, 1)};
            break;
        case BlobVariant::OverlappingBlobs:
            // Both Y=0 clusters sit on the midpoint of the Blobs Y=0 means.
            spec.name = "OverlappingBlobs";
            spec.concept_count = 1;
            spec.clusters = {cluster(0.0, -0.5, {0.0}, 0), cluster(1.0, -1.0, {0.0}, 1),
                             cluster(0.0, -0.5, {1.0}, 0), cluster(-1.0, 2.0, {1.0}, 1)};
            break;
        default:
            throw std::invalid_argument("blob_spec: unknown variant");
    }
    return spec;
}

std::pair<LabeledDataset, LabeledDataset> gen_blobs(const BlobSpec& spec, int n_per_cluster,
                                                    std::uint64_t seed) {
    if (n_per_cluster < 1) throw std::invalid_argument("gen_blobs: n_per_cluster must be >= 1");
    if (spec.std_dev <= 0.0) throw std::invalid_argument("gen_blobs: std_dev must be positive");
    if (spec.clusters.empty()) throw std::invalid_argument("gen_blobs: no clusters");
    for (const BlobCluster& cl : spec.clusters) {
        if (static_cast<int>(cl.concepts.size()) != spec.concept_count) {
            throw std::invalid_argument("gen_blobs: concept vector length mismatch");
        }
    }

    std::mt19937_64 rng(seed);
    LabeledDataset train = assemble_blob_split(spec, n_per_cluster, rng, "train");
    LabeledDataset test = assemble_blob_split(spec, n_per_cluster, rng, "test");
    return {std::move(train), std::move(test)};
}

RawMnist load_mnist(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) {
        throw MnistError(MnistError::Kind::OpenFailed, "cannot open MNIST images: " + images_path);
    }
    std::ifstream lbl(labels_path, std::ios::binary);
    if (!lbl) {
        throw MnistError(MnistError::Kind::OpenFailed, "cannot open MNIST labels: " + labels_path);
    }

    const std::uint32_t img_magic = read_be_u32(img, images_path);
    if (img_magic != 2051) {
        throw MnistError(MnistError::Kind::BadMagic,
                         "bad image magic " + std::to_string(img_magic) + " in " + images_path +
                             " (expected 2051)");
    }
    const std::uint32_t n_images = read_be_u32(img, images_path);
    const std::uint32_t rows = read_be_u32(img, images_path);
    const std::uint32_t cols = read_be_u32(img, images_path);
    if (rows != 28 || cols != 28) {
        throw MnistError(MnistError::Kind::BadMagic,
                         "unexpected image dimensions " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " in " + images_path);
    }

    const std::uint32_t lbl_magic = read_be_u32(lbl, labels_path);
    if (lbl_magic != 2049) {
        throw MnistError(MnistError::Kind::BadMagic,
                         "bad label magic " + std::to_string(lbl_magic) + " in " + labels_path +
                             " (expected 2049)");
    }
    const std::uint32_t n_labels = read_be_u32(lbl, labels_path);
    if (n_labels != n_images) {
        throw MnistError(MnistError::Kind::CountMismatch,
                         "image/label count mismatch: " + std::to_string(n_images) + " vs " +
                             std::to_string(n_labels));
    }

    RawMnist raw;
    raw.images.resize(std::size_t{n_images} * 784);
    img.read(reinterpret_cast<char*>(raw.images.data()),
             static_cast<std::streamsize>(raw.images.size()));
    if (static_cast<std::size_t>(img.gcount()) != raw.images.size()) {
        throw MnistError(MnistError::Kind::Truncated, "truncated image payload in " + images_path);
    }
    raw.digits.resize(n_labels);
    lbl.read(reinterpret_cast<char*>(raw.digits.data()),
             static_cast<std::streamsize>(raw.digits.size()));
    if (static_cast<std::size_t>(lbl.gcount()) != raw.digits.size()) {
        throw MnistError(MnistError::Kind::Truncated, "truncated label payload in " + labels_path);
    }
    for (std::uint8_t d : raw.digits) {
        if (d > 9) {
            throw MnistError(MnistError::Kind::Truncated,
                             "label value " + std::to_string(int(d)) + " out of range in " +
                                 labels_path);
        }
    }
    return raw;
}

namespace {

LabeledDataset parity_split(const RawMnist& raw, ParityVariant variant, const char* split,
                            const std::string& name) {
    std::vector<int> keep;
    keep.reserve(raw.digits.size());
    for (int i = 0; i < raw.n(); ++i) {
        const int d = raw.digits[static_cast<std::size_t>(i)];
        if (variant == ParityVariant::Missing34 && (d == 3 || d == 4)) continue;
        keep.push_back(i);
    }

    const int n = static_cast<int>(keep.size());
    LabeledDataset ds;
    ds.name = name;
    ds.split = split;
    ds.X.resize(n, 784);
    ds.C = Matrix::Zero(n, 2);
    ds.Y.resize(static_cast<std::size_t>(n));
    for (int r = 0; r < n; ++r) {
        const int i = keep[static_cast<std::size_t>(r)];
        const std::uint8_t* px = raw.images.data() + std::size_t{static_cast<std::size_t>(i)} * 784;
        for (int j = 0; j < 784; ++j) {
            ds.X(r, j) = px[j] / 255.0;
        }
        const int d = raw.digits[static_cast<std::size_t>(i)];
        if (d == 3) ds.C(r, 0) = 1.0;
        if (d == 4) ds.C(r, 1) = 1.0;
        ds.Y[static_cast<std::size_t>(r)] = (d % 2 == 0) ? 1 : 0;  // odd -> 0, even -> 1
    }
    return ds;
}

}  // namespace

std::pair<LabeledDataset, LabeledDataset> make_parity_mnist(const RawMnist& raw_train,
                                                            const RawMnist& raw_test,
                                                            ParityVariant variant) {
    const std::string name =
        variant == ParityVariant::Missing34 ? "ParityMNIST" : "ParityMNIST-NoMissing";
    return {parity_split(raw_train, variant, "train", name),
            parity_split(raw_test, variant, "test", name)};
}

}  // namespace cbm
