#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "odx/dataset.hpp"

namespace odx {

// Standard SELU constants.
inline constexpr double kSeluLambda = 1.0507009873554804934193349852946;
inline constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

inline double selu(double x) {
    return x > 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * (std::exp(x) - 1.0);
}

inline double selu_deriv(double x) {
    return x > 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
}

struct NetworkConfig {
    int input_dim = 0;     // n
    int encoding_dim = 0;  // m, bottleneck; must be < n
    int hidden_layers = 3;
    double learning_rate = 9.5e-3;
    int epochs = 500;
    int batch_size = 32;
    std::uint64_t seed = 0;
    // Early stop: quit after `patience` consecutive epochs whose loss improves
    // the best seen by less than `min_improvement`.
    double min_improvement = 1e-6;
    int patience = 20;

    // Symmetric widths, input to output. Encoder widths are linearly
    // interpolated from input_dim down to encoding_dim and mirrored; an even
    // hidden layer count duplicates the bottleneck width in the middle.
    std::vector<int> layer_widths() const;

    void validate() const;  // throws ConfigError
};

// Per-layer weights (widths[l+1] x widths[l]) and biases. SELU on every layer
// except the last, whose output is linear.
struct NetworkParams {
    std::vector<int> widths;
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;

    std::size_t layer_count() const { return weights.size(); }
};

// Weights ~ N(0, 1/fan_in), biases zero, deterministic in config.seed.
NetworkParams build_network(const NetworkConfig& config);

// Activations kept for the backward pass. Batches are column vectors.
struct ForwardCache {
    std::vector<Eigen::MatrixXd> pre;  // z_l, one per layer
    std::vector<Eigen::MatrixXd> act;  // a_0 = input, ..., a_L = output
};

// x: input_dim x batch. Returns the reconstruction (same shape).
Eigen::MatrixXd forward(const NetworkParams& params, const Eigen::MatrixXd& x,
                        ForwardCache* cache = nullptr);

// Mean squared error over dimensions of a single observation.
double loss_mse(const Eigen::VectorXd& x, const Eigen::VectorXd& r);

// Mean per-observation MSE over a batch (columns).
double batch_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& r);

struct Gradients {
    std::vector<Eigen::MatrixXd> weights;
    std::vector<Eigen::VectorXd> biases;
};

// Exact gradient of batch_loss w.r.t. every weight and bias. The cache must
// come from forward() over the same x.
Gradients backward(const NetworkParams& params, const ForwardCache& cache,
                   const Eigen::MatrixXd& x);

struct AdamState {
    std::vector<Eigen::MatrixXd> m_weights, v_weights;
    std::vector<Eigen::VectorXd> m_biases, v_biases;
    long step = 0;  // t; incremented by adam_step
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

AdamState make_adam_state(const NetworkParams& params);

// One bias-corrected Adam update. Throws NumericError on non-finite
// gradients.
void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state,
               double learning_rate);

struct TrainResult {
    NetworkParams params;
    std::vector<double> epoch_loss;  // mean per-observation loss per epoch
};

// Trains on the given (already standardized) dataset with shuffled
// mini-batches. Deterministic for a fixed (seed, config, data). Throws
// NumericError with the epoch index if the loss diverges.
TrainResult train(const Dataset& standardized, const NetworkConfig& config);

struct ReconstructionReport {
    std::string id;
    double score = 0.0;           // mean over dimensions of deviation^2
    Eigen::VectorXd deviations;   // observed - reconstructed, standardized units
};

// One report per observation, in row order.
std::vector<ReconstructionReport> reconstruct_all(const NetworkParams& params,
                                                  const Dataset& standardized);

}  // namespace odx
