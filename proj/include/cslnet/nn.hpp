#pragma once

// Small convolutional classifier with hand-written backpropagation.
//
// Topology: `conv_channels.size()` blocks of
//   3x3 convolution (stride 1, zero padding 1) -> ReLU -> 2x2 max-pool (stride 2)
// followed by fully connected ReLU layers of widths `hidden` and a final
// linear layer of width `classes` with softmax. Everything is double precision.
//
// Activation layout: a Volume stores a (channels x height*width) matrix whose
// column y*width + x holds every channel of pixel (y, x). Convolution weights
// are (out x 9*in) with column (ky*3 + kx)*in + c.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace cslnet::nn {

struct Shape3 {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t size() const noexcept { return channels * height * width; }
    bool operator==(const Shape3&) const = default;
};

struct Volume {
    Shape3 shape;
    Eigen::MatrixXd data;  // channels x (height * width)

    Volume() = default;
    explicit Volume(Shape3 s) : shape(s), data(Eigen::MatrixXd::Zero(s.channels, s.height * s.width)) {}

    double& at(std::size_t c, std::size_t y, std::size_t x) {
        return data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(y * shape.width + x));
    }
    double at(std::size_t c, std::size_t y, std::size_t x) const {
        return data(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(y * shape.width + x));
    }
};

struct NetworkSpec {
    Shape3 input{3, 64, 64};
    std::vector<std::size_t> conv_channels{16, 32, 64};
    std::vector<std::size_t> hidden{128};
    std::size_t classes = 2;

    /// Throws ConfigError unless every block sees an even spatial size and all widths are positive.
    void validate() const;
    Shape3 conv_output() const;
    std::size_t flatten_width() const { return conv_output().size(); }
    std::size_t parameter_count() const;

    /// One-line text form, e.g. "input 3x64x64; conv 16; conv 32; dense 128; dense 2".
    std::string describe() const;
    static NetworkSpec parse(const std::string& text);

    bool operator==(const NetworkSpec&) const = default;
};

struct LayerParams {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
};

/// Conv layers first, then dense layers (the last one is the output layer).
struct Parameters {
    std::vector<LayerParams> conv;
    std::vector<LayerParams> dense;

    /// Zeroed copy with the same shapes.
    Parameters zeros_like() const;
    std::size_t count() const;
    /// Every weight and bias buffer, in storage order: conv then dense, weight before bias.
    std::vector<std::span<double>> buffers();
    std::vector<std::span<const double>> buffers() const;
    bool all_finite() const;
};

enum class OptimizerKind { Adam, Momentum };

struct TrainConfig {
    std::size_t epochs = 20;
    std::size_t batch_size = 32;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;  // shuffle stream
    OptimizerKind optimizer = OptimizerKind::Adam;
    double beta1 = 0.9;  // Adam first moment; also the momentum coefficient
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

struct NetworkState {
    Parameters params;
    Parameters moment1;  // Adam m, or momentum velocity
    Parameters moment2;  // Adam v
    std::size_t steps = 0;
    std::uint64_t rng_seed = 0;
};

struct Prediction {
    Eigen::VectorXd probabilities;
    int label = 0;  // argmax, lowest index on ties
};

/// Non-owning batch: inputs[i] is labelled labels[i] (labels may be empty for inference).
struct BatchView {
    std::span<const Volume> inputs;
    std::span<const int> labels;

    std::size_t size() const noexcept { return inputs.size(); }
};

/// He-normal weights (std = sqrt(2 / fan_in)) from Xoshiro256ss(seed),
/// drawn layer by layer in storage order; biases zero.
NetworkState init_network(const NetworkSpec& spec, std::uint64_t seed);

/// Softmax outputs for each input. Throws DivergenceError on non-finite logits.
std::vector<Prediction> forward(const NetworkState& state, const NetworkSpec& spec, std::span<const Volume> inputs);

/// Raw logits, classes x batch.
Eigen::MatrixXd logits(const NetworkState& state, const NetworkSpec& spec, std::span<const Volume> inputs);

struct LossAndGrads {
    double loss = 0.0;  // mean cross-entropy
    Parameters grads;   // gradient of the mean loss
    std::vector<Prediction> predictions;
};

LossAndGrads loss_and_grads(const NetworkState& state, const NetworkSpec& spec, const BatchView& batch);

/// Mean cross-entropy only (no backward pass).
double loss(const NetworkState& state, const NetworkSpec& spec, const BatchView& batch);

/// One optimizer update with the given gradients. Throws DivergenceError if a parameter becomes non-finite.
void apply_update(NetworkState& state, const Parameters& grads, const TrainConfig& config);

struct Evaluation {
    double accuracy = 0.0;
    double loss = 0.0;
    std::size_t count = 0;
};

/// Throws ConfigError on an empty dataset. Never modifies `state`.
Evaluation evaluate(const NetworkState& state, const NetworkSpec& spec, const BatchView& data);

struct EpochMetrics {
    std::size_t epoch = 0;  // zero-based
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_accuracy = 0.0;
};

struct TrainResult {
    NetworkState state;
    std::vector<EpochMetrics> history;
};

/// Mini-batch training. Each epoch reshuffles the training set with a stream
/// seeded from config.seed; the final partial batch is kept. Validation may be
/// empty, in which case val metrics are zero. Throws DivergenceError carrying
/// the epoch index on a non-finite loss.
TrainResult train(NetworkState state, const NetworkSpec& spec, const TrainConfig& config, const BatchView& train_set,
                  const BatchView& validation);

/// FNV-1a over the raw bytes of every parameter.
std::uint64_t parameter_hash(const Parameters& params);

/// "CSLNET01" | descriptor length u64 | descriptor text | rng seed u64 | tensor count u64 |
/// per tensor: rows u64, cols u64, rows*cols f64 row-major. Little-endian.
void save_checkpoint(const NetworkState& state, const NetworkSpec& spec, const std::filesystem::path& path);

struct Checkpoint {
    NetworkSpec spec;
    NetworkState state;
};
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace cslnet::nn
