#include "cbm/clm.hpp"

#include <stdexcept>

namespace cbm {

ConceptMode parse_concept_mode(const std::string& token) {
    if (token == "hard") return ConceptMode::Hard;
    if (token == "soft") return ConceptMode::Soft;
    if (token == "hard-mcd") return ConceptMode::HardMcd;
    if (token == "soft-mcd") return ConceptMode::SoftMcd;
    throw std::invalid_argument("unknown concept mode: " + token);
}

std::string concept_mode_token(ConceptMode mode) {
    switch (mode) {
        case ConceptMode::Hard: return "hard";
        case ConceptMode::Soft: return "soft";
        case ConceptMode::HardMcd: return "hard-mcd";
        case ConceptMode::SoftMcd: return "soft-mcd";
    }
    throw std::invalid_argument("unknown concept mode value");
}

std::string concept_mode_label(ConceptMode mode) {
    switch (mode) {
        case ConceptMode::Hard: return "NN+Hard";
        case ConceptMode::Soft: return "NN+Soft";
        case ConceptMode::HardMcd: return "NN+Hard+MCD";
        case ConceptMode::SoftMcd: return "NN+Soft+MCD";
    }
    throw std::invalid_argument("unknown concept mode value");
}

namespace {

void validate_config(const ConceptPredictorConfig& cfg) {
    if (cfg.threshold <= 0.0 || cfg.threshold >= 1.0) {
        throw std::invalid_argument("concept predictor: threshold must be in (0,1)");
    }
    if (cfg.mcd_samples < 1) {
        throw std::invalid_argument("concept predictor: mcd_samples must be >= 1");
    }
    if (cfg.dropout_p < 0.0 || cfg.dropout_p >= 1.0) {
        throw std::invalid_argument("concept predictor: dropout_p must be in [0,1)");
    }
}

// Precomputes the post-ReLU hidden activations once; each MCD pass only
// rescales columns and redoes the output layer. Bit-identical to a full
// masked forward pass over the same inputs.
template <typename PerSample>
Matrix mcd_average(const Clm& clm, const Matrix& X, std::uint64_t seed, PerSample&& per_sample) {
    const Mlp& net = clm.net;
    const int T = clm.config.mcd_samples;

    const Matrix hidden0 =
        ((X * net.W1.transpose()).rowwise() + net.b1.transpose()).cwiseMax(0.0);

    std::mt19937_64 rng(seed);
    Matrix acc = Matrix::Zero(X.rows(), net.out_dim);
    Matrix masked;
    for (int t = 0; t < T; ++t) {
        const DropoutMask mask = sample_mask(rng, net.dropout_p, net.hidden_dim);
        masked = hidden0;
        masked.array().rowwise() *= (mask.keep * mask.scale).transpose().array();
        const Matrix logits = (masked * net.W2.transpose()).rowwise() + net.b2.transpose();
        acc += per_sample(logits);
    }
    return acc / static_cast<double>(T);
}

}  // namespace

Clm train_clm(const LabeledDataset& train_set, const ConceptPredictorConfig& config) {
    validate_config(config);
    if (train_set.n() == 0) throw std::invalid_argument("train_clm: empty training set");

    Clm clm;
    clm.config = config;
    clm.net = init_mlp(train_set.dim(), config.hidden_dim, train_set.concepts(),
                       config.dropout_p, config.train.seed);
    train_network(clm.net, train_set.X, train_set.C, config.train);
    return clm;
}

Matrix predict_soft(const Clm& clm, const Matrix& X) {
    return forward(clm.net, X).probs;
}

Matrix predict_hard(const Clm& clm, const Matrix& X) {
    const double thr = clm.config.threshold;
    return predict_soft(clm, X).unaryExpr([thr](double p) { return p > thr ? 1.0 : 0.0; });
}

Matrix predict_mcd_soft(const Clm& clm, const Matrix& X, std::uint64_t seed) {
    validate_config(clm.config);
    // With dropout off (or no hidden layer) every mask is the identity, so the
    // average of T samples is the single deterministic pass.
    if (clm.net.dropout_p == 0.0 || clm.net.hidden_dim == 0) return predict_soft(clm, X);
    return mcd_average(clm, X, seed, [](const Matrix& logits) {
        return logits.unaryExpr([](double z) { return sigmoid(z); });
    });
}

Matrix predict_mcd_hard(const Clm& clm, const Matrix& X, std::uint64_t seed) {
    validate_config(clm.config);
    if (clm.net.dropout_p == 0.0 || clm.net.hidden_dim == 0) return predict_hard(clm, X);
    const double thr = clm.config.threshold;
    return mcd_average(clm, X, seed, [thr](const Matrix& logits) {
        return logits.unaryExpr([thr](double z) { return sigmoid(z) > thr ? 1.0 : 0.0; });
    });
}

Matrix predict(const Clm& clm, const Matrix& X, std::uint64_t seed) {
    switch (clm.config.mode) {
        case ConceptMode::Hard: return predict_hard(clm, X);
        case ConceptMode::Soft: return predict_soft(clm, X);
        case ConceptMode::HardMcd: return predict_mcd_hard(clm, X, seed);
        case ConceptMode::SoftMcd: return predict_mcd_soft(clm, X, seed);
    }
    throw std::invalid_argument("predict: unknown mode");
}

}  // namespace cbm
