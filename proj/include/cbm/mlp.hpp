#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <random>
#include <vector>

namespace cbm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Inverted dropout: kept units are scaled by 1/(1 - dropout_p) so the
// expected activation matches the no-dropout network.
struct DropoutMask {
    Vector keep;         // entries 0 or 1, one per hidden unit
    double scale = 1.0;  // 1/(1 - dropout_p)
};

struct TrainConfig {
    int epochs = 200;
    int batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// One-hidden-layer network: logits = W2 * relu(W1 x + b1) + b2.
// hidden_dim == 0 degenerates to the linear model logits = W2 x + b2.
struct Mlp {
    int in_dim = 0;
    int hidden_dim = 0;
    int out_dim = 0;
    Matrix W1;  // hidden_dim x in_dim
    Vector b1;  // hidden_dim
    Matrix W2;  // out_dim x hidden_dim (out_dim x in_dim when hidden_dim == 0)
    Vector b2;  // out_dim
    double dropout_p = 0.0;
};

struct Gradients {
    Matrix W1;
    Vector b1;
    Matrix W2;
    Vector b2;
};

struct AdamState {
    Gradients m;
    Gradients v;
    long step = 0;
};

struct ForwardPass {
    Matrix hidden;  // n x hidden_dim, after ReLU and mask
    Matrix logits;  // n x out_dim
    Matrix probs;   // n x out_dim, strictly inside (0,1)
};

// Numerically stable logistic; result is clamped to the open interval (0,1).
double sigmoid(double z);

// Uniform Glorot init, biases zero. Deterministic for a given seed.
Mlp init_mlp(int in_dim, int hidden_dim, int out_dim, double dropout_p, std::uint64_t seed);

// Each keep entry is an independent Bernoulli(1 - dropout_p) draw.
DropoutMask sample_mask(std::mt19937_64& rng, double dropout_p, int hidden_dim);

// X is n x in_dim, one example per row. mask == nullptr means dropout off.
ForwardPass forward(const Mlp& mlp, const Matrix& X, const DropoutMask* mask = nullptr);

// Mean binary cross-entropy over all (example, concept) cells, computed from
// logits so that |logit| up to 1e4 stays finite.
double bce_loss(const Matrix& logits, const Matrix& targets);

// Exact gradient of bce_loss(forward(mlp, X, mask).logits, targets) w.r.t.
// every parameter. ReLU sub-gradient at 0 is taken as 0.
Gradients backprop(const Mlp& mlp, const Matrix& X, const Matrix& targets,
                   const DropoutMask* mask = nullptr);

AdamState init_adam(const Mlp& mlp);

// Bias-corrected adaptive-moment update, in place.
void adam_step(Mlp& mlp, const Gradients& grads, AdamState& state, const TrainConfig& cfg);

// Minibatch training with a fresh dropout mask per batch and a reshuffle per
// epoch. Returns one full-data loss (dropout off) per epoch.
std::vector<double> train_network(Mlp& mlp, const Matrix& X, const Matrix& targets,
                                  const TrainConfig& cfg);

}  // namespace cbm
