#include "odx/autoencoder.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "odx/errors.hpp"
#include "odx/rng.hpp"

namespace odx {

std::vector<int> NetworkConfig::layer_widths() const {
    validate();
    const int half = (hidden_layers + 1) / 2;
    std::vector<int> encoder;  // widths after the input, down to the bottleneck
    for (int i = 1; i <= half; ++i) {
        const double w = input_dim + (encoding_dim - input_dim) *
                                         (static_cast<double>(i) / half);
        encoder.push_back(static_cast<int>(std::llround(w)));
    }
    encoder.back() = encoding_dim;

    std::vector<int> widths;
    widths.push_back(input_dim);
    for (int w : encoder) widths.push_back(w);
    if (hidden_layers % 2 == 0) widths.push_back(encoding_dim);
    for (auto it = encoder.rbegin() + 1; it != encoder.rend(); ++it) widths.push_back(*it);
    widths.push_back(input_dim);
    return widths;
}

void NetworkConfig::validate() const {
    if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
    if (encoding_dim < 1) throw ConfigError("encoding_dim must be >= 1");
    if (encoding_dim >= input_dim) {
        throw ConfigError("encoding_dim must be smaller than input_dim (got " +
                          std::to_string(encoding_dim) + " >= " +
                          std::to_string(input_dim) + ")");
    }
    if (hidden_layers < 1) throw ConfigError("hidden_layers must be >= 1");
    if (learning_rate <= 0.0) throw ConfigError("learning_rate must be positive");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

NetworkParams build_network(const NetworkConfig& config) {
    NetworkParams params;
    params.widths = config.layer_widths();
    Rng rng(config.seed);
    for (std::size_t l = 0; l + 1 < params.widths.size(); ++l) {
        const int fan_in = params.widths[l];
        const int fan_out = params.widths[l + 1];
        if (fan_in < 1 || fan_out < 1) throw ConfigError("zero-width layer");
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Eigen::MatrixXd w(fan_out, fan_in);
        for (int i = 0; i < fan_out; ++i) {
            for (int j = 0; j < fan_in; ++j) {
                w(i, j) = rng.normal() * scale;
            }
        }
        params.weights.push_back(std::move(w));
        params.biases.push_back(Eigen::VectorXd::Zero(fan_out));
    }
    return params;
}

Eigen::MatrixXd forward(const NetworkParams& params, const Eigen::MatrixXd& x,
                        ForwardCache* cache) {
    if (x.rows() != params.widths.front()) {
        throw DataError("forward: input has " + std::to_string(x.rows()) +
                        " dimensions, network expects " +
                        std::to_string(params.widths.front()));
    }
    if (cache) {
        cache->pre.clear();
        cache->act.clear();
        cache->act.push_back(x);
    }
    Eigen::MatrixXd a = x;
    const std::size_t layers = params.layer_count();
    for (std::size_t l = 0; l < layers; ++l) {
        Eigen::MatrixXd z = (params.weights[l] * a).colwise() + params.biases[l];
        if (l + 1 < layers) {
            a = z.unaryExpr([](double v) { return selu(v); });
        } else {
            a = z;  // linear output layer
        }
        if (cache) {
            cache->pre.push_back(std::move(z));
            cache->act.push_back(a);
        }
    }
    return a;
}

double loss_mse(const Eigen::VectorXd& x, const Eigen::VectorXd& r) {
    if (x.size() != r.size()) throw DataError("loss_mse: length mismatch");
    return (x - r).squaredNorm() / static_cast<double>(x.size());
}

double batch_loss(const Eigen::MatrixXd& x, const Eigen::MatrixXd& r) {
    if (x.rows() != r.rows() || x.cols() != r.cols()) {
        throw DataError("batch_loss: shape mismatch");
    }
    return (x - r).squaredNorm() /
           static_cast<double>(x.rows() * x.cols());
}

Gradients backward(const NetworkParams& params, const ForwardCache& cache,
                   const Eigen::MatrixXd& x) {
    const std::size_t layers = params.layer_count();
    if (cache.pre.size() != layers || cache.act.size() != layers + 1 ||
        cache.act.front().rows() != x.rows() || cache.act.front().cols() != x.cols()) {
        throw DataError("backward: cache does not match input");
    }
    const double denom = static_cast<double>(x.rows() * x.cols());

    Gradients grads;
    grads.weights.resize(layers);
    grads.biases.resize(layers);

    // dL/dz for the linear output layer; loss is mean over dims and batch.
    Eigen::MatrixXd delta = 2.0 * (cache.act.back() - x) / denom;
    for (std::size_t l = layers; l-- > 0;) {
        grads.weights[l] = delta * cache.act[l].transpose();
        grads.biases[l] = delta.rowwise().sum();
        if (l > 0) {
            delta = (params.weights[l].transpose() * delta).cwiseProduct(
                cache.pre[l - 1].unaryExpr([](double v) { return selu_deriv(v); }));
        }
    }
    return grads;
}

AdamState make_adam_state(const NetworkParams& params) {
    AdamState state;
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        state.m_weights.push_back(Eigen::MatrixXd::Zero(params.weights[l].rows(),
                                                        params.weights[l].cols()));
        state.v_weights.push_back(Eigen::MatrixXd::Zero(params.weights[l].rows(),
                                                        params.weights[l].cols()));
        state.m_biases.push_back(Eigen::VectorXd::Zero(params.biases[l].size()));
        state.v_biases.push_back(Eigen::VectorXd::Zero(params.biases[l].size()));
    }
    return state;
}

void adam_step(NetworkParams& params, const Gradients& grads, AdamState& state,
               double learning_rate) {
    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        if (!grads.weights[l].allFinite() || !grads.biases[l].allFinite()) {
            throw NumericError("adam_step: non-finite gradient in layer " +
                               std::to_string(l));
        }
    }
    state.step += 1;
    const double b1 = state.beta1;
    const double b2 = state.beta2;
    const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));

    for (std::size_t l = 0; l < params.layer_count(); ++l) {
        auto& mw = state.m_weights[l];
        auto& vw = state.v_weights[l];
        mw = b1 * mw + (1.0 - b1) * grads.weights[l];
        vw = b2 * vw + (1.0 - b2) * grads.weights[l].cwiseProduct(grads.weights[l]);
        params.weights[l].array() -=
            learning_rate * (mw.array() / bc1) / ((vw.array() / bc2).sqrt() + state.epsilon);

        auto& mb = state.m_biases[l];
        auto& vb = state.v_biases[l];
        mb = b1 * mb + (1.0 - b1) * grads.biases[l];
        vb = b2 * vb + (1.0 - b2) * grads.biases[l].cwiseProduct(grads.biases[l]);
        params.biases[l].array() -=
            learning_rate * (mb.array() / bc1) / ((vb.array() / bc2).sqrt() + state.epsilon);
    }
}

TrainResult train(const Dataset& standardized, const NetworkConfig& config) {
    NetworkConfig cfg = config;
    cfg.input_dim = static_cast<int>(standardized.dims());
    cfg.validate();
    const auto n = standardized.rows();
    if (n < cfg.batch_size) {
        throw ConfigError("train: dataset has " + std::to_string(n) +
                          " rows, need at least batch_size=" +
                          std::to_string(cfg.batch_size));
    }

    TrainResult result;
    result.params = build_network(cfg);
    AdamState adam = make_adam_state(result.params);
    Rng shuffle_rng(child_seed(cfg.seed, 1));

    // Observations as columns.
    const Eigen::MatrixXd all = standardized.values.transpose();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    double best = std::numeric_limits<double>::infinity();
    int stall = 0;
    ForwardCache cache;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
            const Eigen::Index count = std::min<Eigen::Index>(cfg.batch_size, n - start);
            Eigen::MatrixXd batch(all.rows(), count);
            for (Eigen::Index c = 0; c < count; ++c) {
                batch.col(c) = all.col(order[static_cast<std::size_t>(start + c)]);
            }
            Eigen::MatrixXd recon = forward(result.params, batch, &cache);
            loss_sum += batch_loss(batch, recon) * static_cast<double>(count);
            Gradients grads = backward(result.params, cache, batch);
            adam_step(result.params, grads, adam, cfg.learning_rate);
        }
        const double epoch_loss = loss_sum / static_cast<double>(n);
        if (!std::isfinite(epoch_loss)) {
            throw NumericError("train: loss diverged at epoch " + std::to_string(epoch));
        }
        result.epoch_loss.push_back(epoch_loss);

        if (best - epoch_loss < cfg.min_improvement) {
            if (++stall >= cfg.patience) break;
        } else {
            stall = 0;
        }
        best = std::min(best, epoch_loss);
    }
    return result;
}

std::vector<ReconstructionReport> reconstruct_all(const NetworkParams& params,
                                                  const Dataset& standardized) {
    if (standardized.dims() != params.widths.front()) {
        throw DataError("reconstruct_all: dataset dimension mismatch");
    }
    const Eigen::MatrixXd recon = forward(params, standardized.values.transpose());
    std::vector<ReconstructionReport> reports;
    reports.reserve(static_cast<std::size_t>(standardized.rows()));
    for (Eigen::Index i = 0; i < standardized.rows(); ++i) {
        ReconstructionReport rep;
        rep.id = standardized.ids[static_cast<std::size_t>(i)];
        rep.deviations = standardized.values.row(i).transpose() - recon.col(i);
        rep.score = rep.deviations.squaredNorm() /
                    static_cast<double>(rep.deviations.size());
        reports.push_back(std::move(rep));
    }
    return reports;
}

}  // namespace odx
