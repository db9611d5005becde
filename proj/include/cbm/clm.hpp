#pragma once

#include "cbm/datasets.hpp"
#include "cbm/mlp.hpp"

#include <cstdint>
#include <string>

namespace cbm {

enum class ConceptMode { Hard, Soft, HardMcd, SoftMcd };

ConceptMode parse_concept_mode(const std::string& token);
std::string concept_mode_token(ConceptMode mode);   // "hard", "soft", "hard-mcd", "soft-mcd"
std::string concept_mode_label(ConceptMode mode);   // "NN+Hard", "NN+Soft", ...

struct ConceptPredictorConfig {
    ConceptMode mode = ConceptMode::Soft;
    double threshold = 0.5;  // strict: hard label is 1 iff prob > threshold
    int mcd_samples = 50;
    double dropout_p = 0.5;
    int hidden_dim = 128;
    TrainConfig train;
};

// The concept labeling model f_{X->C}.
struct Clm {
    Mlp net;
    ConceptPredictorConfig config;
};

// Sequential bottleneck, first stage: fit the network to (X, C) with dropout
// active during training.
Clm train_clm(const LabeledDataset& train_set, const ConceptPredictorConfig& config);

// Dropout off; sigmoid probabilities.
Matrix predict_soft(const Clm& clm, const Matrix& X);

// Dropout off; elementwise 1[prob > threshold].
Matrix predict_hard(const Clm& clm, const Matrix& X);

// Dropout on: averages the sigmoid outputs of mcd_samples masked passes.
Matrix predict_mcd_soft(const Clm& clm, const Matrix& X, std::uint64_t seed);

// Dropout on: thresholds each masked pass and returns the vote fraction,
// values in {0, 1/T, ..., 1}. Not re-thresholded — the fraction itself is the
// uncertainty-carrying concept representation.
Matrix predict_mcd_hard(const Clm& clm, const Matrix& X, std::uint64_t seed);

// Dispatch over config.mode.
Matrix predict(const Clm& clm, const Matrix& X, std::uint64_t seed);

}  // namespace cbm
