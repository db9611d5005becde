#include "cbm/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace cbm {

namespace {

void check_finite(const Matrix& m, const char* what) {
    if (!m.allFinite()) {
        throw std::invalid_argument(std::string(what) + ": non-finite entries");
    }
}

Matrix sigmoid_matrix(const Matrix& logits) {
    return logits.unaryExpr([](double z) { return sigmoid(z); });
}

// Mask application: every hidden column j is multiplied by keep[j] * scale.
void apply_mask(Matrix& hidden, const DropoutMask& mask) {
    hidden.array().rowwise() *= (mask.keep * mask.scale).transpose().array();
}

}  // namespace

double sigmoid(double z) {
    double s;
    if (z >= 0.0) {
        s = 1.0 / (1.0 + std::exp(-z));
    } else {
        const double e = std::exp(z);
        s = e / (1.0 + e);
    }
    // Keep the result strictly inside (0,1); saturation would otherwise round
    // to exactly 0 or 1 for |z| beyond ~37 (high end) or ~745 (low end).
    if (s >= 1.0) s = std::nextafter(1.0, 0.0);
    if (s <= 0.0) s = std::numeric_limits<double>::min();
    return s;
}

Mlp init_mlp(int in_dim, int hidden_dim, int out_dim, double dropout_p, std::uint64_t seed) {
    if (in_dim <= 0) throw std::invalid_argument("init_mlp: in_dim must be positive");
    if (out_dim <= 0) throw std::invalid_argument("init_mlp: out_dim must be positive");
    if (hidden_dim < 0) throw std::invalid_argument("init_mlp: hidden_dim must be >= 0");
    if (dropout_p < 0.0 || dropout_p >= 1.0) {
        throw std::invalid_argument("init_mlp: dropout_p must be in [0,1)");
    }

    Mlp mlp;
    mlp.in_dim = in_dim;
    mlp.hidden_dim = hidden_dim;
    mlp.out_dim = out_dim;
    mlp.dropout_p = dropout_p;

    std::mt19937_64 rng(seed);
    auto glorot_fill = [&rng](Matrix& w, int fan_in, int fan_out) {
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-limit, limit);
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) {
                w(i, j) = dist(rng);
            }
        }
    };

    if (hidden_dim > 0) {
        mlp.W1.resize(hidden_dim, in_dim);
        glorot_fill(mlp.W1, in_dim, hidden_dim);
        mlp.b1 = Vector::Zero(hidden_dim);
        mlp.W2.resize(out_dim, hidden_dim);
        glorot_fill(mlp.W2, hidden_dim, out_dim);
    } else {
        mlp.W1.resize(0, in_dim);
        mlp.b1 = Vector::Zero(0);
        mlp.W2.resize(out_dim, in_dim);
        glorot_fill(mlp.W2, in_dim, out_dim);
    }
    mlp.b2 = Vector::Zero(out_dim);
    return mlp;
}

DropoutMask sample_mask(std::mt19937_64& rng, double dropout_p, int hidden_dim) {
    if (dropout_p < 0.0 || dropout_p >= 1.0) {
        throw std::invalid_argument("sample_mask: dropout_p must be in [0,1)");
    }
    if (hidden_dim < 0) throw std::invalid_argument("sample_mask: negative hidden_dim");

    DropoutMask mask;
    mask.keep.resize(hidden_dim);
    mask.scale = 1.0 / (1.0 - dropout_p);
    std::bernoulli_distribution keep_dist(1.0 - dropout_p);
    for (int i = 0; i < hidden_dim; ++i) {
        mask.keep[i] = keep_dist(rng) ? 1.0 : 0.0;
    }
    return mask;
}

ForwardPass forward(const Mlp& mlp, const Matrix& X, const DropoutMask* mask) {
    if (X.cols() != mlp.in_dim) {
        throw std::invalid_argument("forward: X column count does not match in_dim");
    }
    if (mask != nullptr && mask->keep.size() != mlp.hidden_dim) {
        throw std::invalid_argument("forward: mask length does not match hidden_dim");
    }

    ForwardPass fp;
    if (mlp.hidden_dim > 0) {
        fp.hidden = ((X * mlp.W1.transpose()).rowwise() + mlp.b1.transpose()).cwiseMax(0.0);
        if (mask != nullptr) {
            apply_mask(fp.hidden, *mask);
        }
        fp.logits = (fp.hidden * mlp.W2.transpose()).rowwise() + mlp.b2.transpose();
    } else {
        fp.hidden.resize(X.rows(), 0);
        fp.logits = (X * mlp.W2.transpose()).rowwise() + mlp.b2.transpose();
    }
    fp.probs = sigmoid_matrix(fp.logits);
    return fp;
}

double bce_loss(const Matrix& logits, const Matrix& targets) {
    if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
        throw std::invalid_argument("bce_loss: shape mismatch");
    }
    if (logits.size() == 0) throw std::invalid_argument("bce_loss: empty input");
    check_finite(logits, "bce_loss");

    // Stable form: max(z,0) - z*t + log(1 + exp(-|z|)).
    double total = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        for (Eigen::Index i = 0; i < logits.rows(); ++i) {
            const double z = logits(i, j);
            const double t = targets(i, j);
            total += std::max(z, 0.0) - z * t + std::log1p(std::exp(-std::abs(z)));
        }
    }
    return total / static_cast<double>(logits.size());
}

Gradients backprop(const Mlp& mlp, const Matrix& X, const Matrix& targets,
                   const DropoutMask* mask) {
    if (targets.rows() != X.rows() || targets.cols() != mlp.out_dim) {
        throw std::invalid_argument("backprop: target shape mismatch");
    }
    const ForwardPass fp = forward(mlp, X, mask);

    // d(mean BCE)/d(logit) = (p - t) / (n * L).
    const double inv_count = 1.0 / static_cast<double>(targets.size());
    const Matrix delta = (fp.probs - targets) * inv_count;  // n x out

    Gradients g;
    g.W2 = delta.transpose() * (mlp.hidden_dim > 0 ? fp.hidden : X);
    g.b2 = delta.colwise().sum().transpose();

    if (mlp.hidden_dim > 0) {
        Matrix d_hidden = delta * mlp.W2;  // n x hidden
        if (mask != nullptr) {
            apply_mask(d_hidden, *mask);
        }
        // ReLU sub-gradient: 0 at the kink. fp.hidden is post-mask, so gate on
        // the recomputed preactivation instead.
        const Matrix pre = (X * mlp.W1.transpose()).rowwise() + mlp.b1.transpose();
        const Matrix d_pre =
            (pre.array() > 0.0).template cast<double>() * d_hidden.array();
        g.W1 = d_pre.transpose() * X;
        g.b1 = d_pre.colwise().sum().transpose();
    } else {
        g.W1.resize(0, mlp.in_dim);
        g.b1 = Vector::Zero(0);
    }
    return g;
}

AdamState init_adam(const Mlp& mlp) {
    AdamState st;
    auto zeros_like = [](const Mlp& m) {
        Gradients g;
        g.W1 = Matrix::Zero(m.W1.rows(), m.W1.cols());
        g.b1 = Vector::Zero(m.b1.size());
        g.W2 = Matrix::Zero(m.W2.rows(), m.W2.cols());
        g.b2 = Vector::Zero(m.b2.size());
        return g;
    };
    st.m = zeros_like(mlp);
    st.v = zeros_like(mlp);
    st.step = 0;
    return st;
}

void adam_step(Mlp& mlp, const Gradients& grads, AdamState& state, const TrainConfig& cfg) {
    if (grads.W1.rows() != mlp.W1.rows() || grads.W1.cols() != mlp.W1.cols() ||
        grads.W2.rows() != mlp.W2.rows() || grads.W2.cols() != mlp.W2.cols() ||
        grads.b1.size() != mlp.b1.size() || grads.b2.size() != mlp.b2.size()) {
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    }
    state.step += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

    auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad;
        v = cfg.beta2 * v.array().matrix() + (1.0 - cfg.beta2) * grad.array().square().matrix();
        param.array() -= cfg.learning_rate * (m.array() / bc1) /
                         ((v.array() / bc2).sqrt() + cfg.epsilon);
    };
    update(mlp.W1, grads.W1, state.m.W1, state.v.W1);
    update(mlp.b1, grads.b1, state.m.b1, state.v.b1);
    update(mlp.W2, grads.W2, state.m.W2, state.v.W2);
    update(mlp.b2, grads.b2, state.m.b2, state.v.b2);
}

std::vector<double> train_network(Mlp& mlp, const Matrix& X, const Matrix& targets,
                                  const TrainConfig& cfg) {
    const Eigen::Index n = X.rows();
    if (n == 0) throw std::invalid_argument("train_network: empty dataset");
    if (targets.rows() != n || targets.cols() != mlp.out_dim) {
        throw std::invalid_argument("train_network: target shape mismatch");
    }
    if (cfg.batch_size < 1) throw std::invalid_argument("train_network: batch_size must be >= 1");
    if (cfg.learning_rate <= 0.0) {
        throw std::invalid_argument("train_network: learning_rate must be positive");
    }
    if (cfg.epochs < 0) throw std::invalid_argument("train_network: negative epochs");

    std::mt19937_64 rng(cfg.seed);
    AdamState state = init_adam(mlp);
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    std::vector<double> history;
    history.reserve(static_cast<std::size_t>(cfg.epochs));

    const Eigen::Index bs = cfg.batch_size;
    Matrix xb, tb;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        for (Eigen::Index start = 0; start < n; start += bs) {
            const Eigen::Index len = std::min(bs, n - start);
            xb.resize(len, X.cols());
            tb.resize(len, targets.cols());
            for (Eigen::Index r = 0; r < len; ++r) {
                xb.row(r) = X.row(order[static_cast<std::size_t>(start + r)]);
                tb.row(r) = targets.row(order[static_cast<std::size_t>(start + r)]);
            }
            const DropoutMask mask = sample_mask(rng, mlp.dropout_p, mlp.hidden_dim);
            const Gradients grads = backprop(mlp, xb, tb, &mask);
            adam_step(mlp, grads, state, cfg);
        }
        history.push_back(bce_loss(forward(mlp, X).logits, targets));
    }
    return history;
}

}  // namespace cbm
