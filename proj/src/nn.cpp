#include "cslnet/nn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "binary_io.hpp"
#include "cslnet/errors.hpp"
#include "cslnet/rng.hpp"

namespace cslnet::nn {

namespace {

constexpr std::string_view kCheckpointMagic = "CSLNET01";
constexpr std::size_t kTaps = 9;
constexpr std::size_t kEvalChunk = 64;

using Index = Eigen::Index;

Index idx(std::size_t v) { return static_cast<Index>(v); }

// (C x H*W) -> (9C x H*W), zero padding 1.
void im2col(const Eigen::MatrixXd& in, std::size_t h, std::size_t w, Eigen::MatrixXd& cols) {
    const std::size_t c = static_cast<std::size_t>(in.rows());
    cols.resize(idx(kTaps * c), idx(h * w));
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            double* dst = cols.col(idx(y * w + x)).data();
            for (std::size_t ky = 0; ky < 3; ++ky) {
                const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                for (std::size_t kx = 0; kx < 3; ++kx, dst += c) {
                    const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
                    if (sy < 0 || sx < 0 || sy >= static_cast<std::ptrdiff_t>(h) || sx >= static_cast<std::ptrdiff_t>(w)) {
                        std::fill(dst, dst + c, 0.0);
                    } else {
                        const double* src = in.col(static_cast<Index>(sy) * idx(w) + sx).data();
                        std::copy(src, src + c, dst);
                    }
                }
            }
        }
    }
}

// Adjoint of im2col.
void col2im(const Eigen::MatrixXd& cols, std::size_t c, std::size_t h, std::size_t w, Eigen::MatrixXd& out) {
    out.setZero(idx(c), idx(h * w));
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const double* src = cols.col(idx(y * w + x)).data();
            for (std::size_t ky = 0; ky < 3; ++ky) {
                const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
                for (std::size_t kx = 0; kx < 3; ++kx, src += c) {
                    const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
                    if (sy < 0 || sx < 0 || sy >= static_cast<std::ptrdiff_t>(h) || sx >= static_cast<std::ptrdiff_t>(w))
                        continue;
                    double* dst = out.col(static_cast<Index>(sy) * idx(w) + sx).data();
                    for (std::size_t k = 0; k < c; ++k) dst[k] += src[k];
                }
            }
        }
    }
}

struct ConvCache {
    Eigen::MatrixXd cols;
    Eigen::MatrixXd pre;             // out x H*W, before ReLU
    std::vector<std::int32_t> argmax;  // [q * out + o] -> source pixel of pooled output q
    std::size_t height = 0;
    std::size_t width = 0;
};

struct DenseCache {
    std::vector<Eigen::MatrixXd> inputs;  // per dense layer, in x B
    std::vector<Eigen::MatrixXd> pre;     // per dense layer, out x B
};

// ReLU followed by 2x2 max-pool, stride 2. Ties keep the first pixel in
// (top-left, top-right, bottom-left, bottom-right) order.
Eigen::MatrixXd relu_pool(const Eigen::MatrixXd& pre, std::size_t h, std::size_t w, std::vector<std::int32_t>* argmax) {
    const auto out_c = static_cast<std::size_t>(pre.rows());
    const std::size_t ph = h / 2, pw = w / 2;
    Eigen::MatrixXd pooled(idx(out_c), idx(ph * pw));
    if (argmax) argmax->assign(out_c * ph * pw, 0);
    for (std::size_t py = 0; py < ph; ++py) {
        for (std::size_t px = 0; px < pw; ++px) {
            const std::size_t q = py * pw + px;
            const std::array<std::size_t, 4> src{(2 * py) * w + 2 * px, (2 * py) * w + 2 * px + 1,
                                                 (2 * py + 1) * w + 2 * px, (2 * py + 1) * w + 2 * px + 1};
            for (std::size_t o = 0; o < out_c; ++o) {
                double best = std::max(pre(idx(o), idx(src[0])), 0.0);
                std::size_t best_p = src[0];
                for (std::size_t k = 1; k < 4; ++k) {
                    const double v = std::max(pre(idx(o), idx(src[k])), 0.0);
                    if (v > best) {
                        best = v;
                        best_p = src[k];
                    }
                }
                pooled(idx(o), idx(q)) = best;
                if (argmax) (*argmax)[q * out_c + o] = static_cast<std::int32_t>(best_p);
            }
        }
    }
    return pooled;
}

// Runs the conv stack on one sample and returns the flattened output.
Eigen::VectorXd conv_forward(const Parameters& params, const Volume& input, std::vector<ConvCache>* caches) {
    Eigen::MatrixXd act = input.data;
    std::size_t h = input.shape.height, w = input.shape.width;
    if (caches) caches->resize(params.conv.size());
    Eigen::MatrixXd cols_local, pre_local;
    for (std::size_t l = 0; l < params.conv.size(); ++l) {
        const auto& layer = params.conv[l];
        Eigen::MatrixXd& cols = caches ? (*caches)[l].cols : cols_local;
        Eigen::MatrixXd& pre = caches ? (*caches)[l].pre : pre_local;
        im2col(act, h, w, cols);
        pre.resize(layer.weight.rows(), cols.cols());
        pre.noalias() = layer.weight * cols;
        pre.colwise() += layer.bias;
        act = relu_pool(pre, h, w, caches ? &(*caches)[l].argmax : nullptr);
        if (caches) {
            (*caches)[l].height = h;
            (*caches)[l].width = w;
        }
        h /= 2;
        w /= 2;
    }
    return Eigen::Map<const Eigen::VectorXd>(act.data(), act.size());
}

Eigen::MatrixXd dense_forward(const Parameters& params, Eigen::MatrixXd act, DenseCache* cache) {
    if (cache) {
        cache->inputs.resize(params.dense.size());
        cache->pre.resize(params.dense.size());
    }
    for (std::size_t l = 0; l < params.dense.size(); ++l) {
        const auto& layer = params.dense[l];
        Eigen::MatrixXd z(layer.weight.rows(), act.cols());
        z.noalias() = layer.weight * act;
        z.colwise() += layer.bias;
        if (cache) {
            cache->inputs[l] = std::move(act);
            cache->pre[l] = z;
        }
        act = l + 1 < params.dense.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : std::move(z);
    }
    return act;
}

void check_inputs(const NetworkSpec& spec, std::span<const Volume> inputs) {
    for (const auto& v : inputs)
        if (!(v.shape == spec.input) || v.data.rows() != idx(spec.input.channels) ||
            v.data.cols() != idx(spec.input.height * spec.input.width))
            throw ConfigError("input volume shape does not match network input " + std::to_string(spec.input.channels) +
                              "x" + std::to_string(spec.input.height) + "x" + std::to_string(spec.input.width));
}

Eigen::MatrixXd flatten_batch(const Parameters& params, const NetworkSpec& spec, std::span<const Volume> inputs,
                              std::vector<std::vector<ConvCache>>* caches) {
    Eigen::MatrixXd flat(idx(spec.flatten_width()), idx(inputs.size()));
    if (caches) caches->resize(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i)
        flat.col(idx(i)) = conv_forward(params, inputs[i], caches ? &(*caches)[i] : nullptr);
    return flat;
}

Prediction softmax(const Eigen::VectorXd& z) {
    const double m = z.maxCoeff();
    Eigen::VectorXd e = (z.array() - m).exp();
    Prediction p;
    p.probabilities = e / e.sum();
    Index arg = 0;
    p.probabilities.maxCoeff(&arg);
    p.label = static_cast<int>(arg);
    return p;
}

double cross_entropy(const Eigen::VectorXd& z, int label) {
    const double m = z.maxCoeff();
    return m + std::log((z.array() - m).exp().sum()) - z[label];
}

void check_labels(const NetworkSpec& spec, const BatchView& batch) {
    if (batch.labels.size() != batch.inputs.size()) throw ConfigError("labels and inputs differ in length");
    for (int y : batch.labels)
        if (y < 0 || static_cast<std::size_t>(y) >= spec.classes)
            throw ConfigError("label " + std::to_string(y) + " outside [0, " + std::to_string(spec.classes) + ")");
}

void check_logits(const Eigen::MatrixXd& z) {
    if (!z.allFinite()) throw DivergenceError("non-finite activation in forward pass");
}

void fill_he_normal(Eigen::MatrixXd& w, std::size_t fan_in, Xoshiro256ss& rng) {
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (Index r = 0; r < w.rows(); ++r)
        for (Index c = 0; c < w.cols(); ++c) w(r, c) = sd * rng.normal();
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, sep)) {
        const auto b = item.find_first_not_of(' ');
        const auto e = item.find_last_not_of(' ');
        out.push_back(b == std::string::npos ? std::string{} : item.substr(b, e - b + 1));
    }
    return out;
}

}  // namespace

// --- NetworkSpec -------------------------------------------------------------

void NetworkSpec::validate() const {
    if (input.channels == 0 || input.height == 0 || input.width == 0)
        throw ConfigError("network input dimensions must be positive");
    std::size_t h = input.height, w = input.width;
    for (std::size_t l = 0; l < conv_channels.size(); ++l) {
        if (conv_channels[l] == 0) throw ConfigError("conv block " + std::to_string(l) + " has zero channels");
        if (h % 2 != 0 || w % 2 != 0 || h < 2 || w < 2)
            throw ConfigError("conv block " + std::to_string(l) + " sees odd spatial size " + std::to_string(h) + "x" +
                              std::to_string(w) + "; 2x2 pooling needs even sizes");
        h /= 2;
        w /= 2;
    }
    for (auto width : hidden)
        if (width == 0) throw ConfigError("hidden layer width must be positive");
    if (classes < 2) throw ConfigError("network needs at least two classes");
}

Shape3 NetworkSpec::conv_output() const {
    Shape3 s = input;
    for (auto c : conv_channels) s = {c, s.height / 2, s.width / 2};
    return s;
}

std::size_t NetworkSpec::parameter_count() const {
    std::size_t n = 0, in = input.channels;
    for (auto c : conv_channels) {
        n += c * kTaps * in + c;
        in = c;
    }
    in = flatten_width();
    for (auto width : hidden) {
        n += width * in + width;
        in = width;
    }
    return n + classes * in + classes;
}

std::string NetworkSpec::describe() const {
    std::ostringstream out;
    out << "input " << input.channels << "x" << input.height << "x" << input.width;
    for (auto c : conv_channels) out << "; conv " << c;
    for (auto width : hidden) out << "; dense " << width;
    out << "; dense " << classes;
    return out.str();
}

NetworkSpec NetworkSpec::parse(const std::string& text) {
    const auto parts = split(text, ';');
    if (parts.size() < 2) throw ConfigError("network descriptor too short: '" + text + "'");
    NetworkSpec spec;
    spec.conv_channels.clear();
    spec.hidden.clear();
    std::vector<std::size_t> dense;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        std::istringstream in(parts[i]);
        std::string kind;
        in >> kind;
        if (i == 0) {
            if (kind != "input") throw ConfigError("network descriptor must start with 'input'");
            std::string dims;
            in >> dims;
            const auto d = split(dims, 'x');
            if (d.size() != 3) throw ConfigError("bad input shape '" + dims + "'");
            spec.input = {std::stoul(d[0]), std::stoul(d[1]), std::stoul(d[2])};
            continue;
        }
        std::size_t width = 0;
        if (!(in >> width)) throw ConfigError("bad layer entry '" + parts[i] + "'");
        if (kind == "conv") {
            if (!dense.empty()) throw ConfigError("conv layer after dense layer in descriptor");
            spec.conv_channels.push_back(width);
        } else if (kind == "dense") {
            dense.push_back(width);
        } else {
            throw ConfigError("unknown layer kind '" + kind + "'");
        }
    }
    if (dense.empty()) throw ConfigError("network descriptor has no output layer");
    spec.classes = dense.back();
    spec.hidden.assign(dense.begin(), dense.end() - 1);
    spec.validate();
    return spec;
}

// --- Parameters ---------------------------------------------------------------

Parameters Parameters::zeros_like() const {
    Parameters out;
    for (const auto* group : {&conv, &dense}) {
        auto& dst = group == &conv ? out.conv : out.dense;
        for (const auto& layer : *group)
            dst.push_back({Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()),
                           Eigen::VectorXd::Zero(layer.bias.size())});
    }
    return out;
}

std::size_t Parameters::count() const {
    std::size_t n = 0;
    for (const auto& b : buffers()) n += b.size();
    return n;
}

std::vector<std::span<double>> Parameters::buffers() {
    std::vector<std::span<double>> out;
    for (auto* group : {&conv, &dense})
        for (auto& layer : *group) {
            out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
            out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
        }
    return out;
}

std::vector<std::span<const double>> Parameters::buffers() const {
    std::vector<std::span<const double>> out;
    for (const auto* group : {&conv, &dense})
        for (const auto& layer : *group) {
            out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
            out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
        }
    return out;
}

bool Parameters::all_finite() const {
    for (const auto& b : buffers())
        for (double v : b)
            if (!std::isfinite(v)) return false;
    return true;
}

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("epochs must be at least 1");
    if (batch_size < 1) throw ConfigError("batch size must be at least 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("learning rate must be finite and non-negative");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon > 0.0))
        throw ConfigError("optimizer coefficients out of range");
}

// --- forward / backward ---------------------------------------------------------

NetworkState init_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    Xoshiro256ss rng(seed);
    NetworkState state;
    state.rng_seed = seed;
    std::size_t in = spec.input.channels;
    for (auto c : spec.conv_channels) {
        LayerParams layer{Eigen::MatrixXd(idx(c), idx(kTaps * in)), Eigen::VectorXd::Zero(idx(c))};
        fill_he_normal(layer.weight, kTaps * in, rng);
        state.params.conv.push_back(std::move(layer));
        in = c;
    }
    in = spec.flatten_width();
    std::vector<std::size_t> widths = spec.hidden;
    widths.push_back(spec.classes);
    for (auto width : widths) {
        LayerParams layer{Eigen::MatrixXd(idx(width), idx(in)), Eigen::VectorXd::Zero(idx(width))};
        fill_he_normal(layer.weight, in, rng);
        state.params.dense.push_back(std::move(layer));
        in = width;
    }
    state.moment1 = state.params.zeros_like();
    state.moment2 = state.params.zeros_like();
    return state;
}

Eigen::MatrixXd logits(const NetworkState& state, const NetworkSpec& spec, std::span<const Volume> inputs) {
    check_inputs(spec, inputs);
    Eigen::MatrixXd z = dense_forward(state.params, flatten_batch(state.params, spec, inputs, nullptr), nullptr);
    check_logits(z);
    return z;
}

std::vector<Prediction> forward(const NetworkState& state, const NetworkSpec& spec, std::span<const Volume> inputs) {
    std::vector<Prediction> out;
    out.reserve(inputs.size());
    for (std::size_t start = 0; start < inputs.size(); start += kEvalChunk) {
        const auto chunk = inputs.subspan(start, std::min(kEvalChunk, inputs.size() - start));
        const Eigen::MatrixXd z = logits(state, spec, chunk);
        for (Index i = 0; i < z.cols(); ++i) out.push_back(softmax(z.col(i)));
    }
    return out;
}

double loss(const NetworkState& state, const NetworkSpec& spec, const BatchView& batch) {
    check_labels(spec, batch);
    if (batch.size() == 0) throw ConfigError("loss of an empty batch");
    const Eigen::MatrixXd z = logits(state, spec, batch.inputs);
    double total = 0.0;
    for (Index i = 0; i < z.cols(); ++i) total += cross_entropy(z.col(i), batch.labels[static_cast<std::size_t>(i)]);
    return total / static_cast<double>(batch.size());
}

LossAndGrads loss_and_grads(const NetworkState& state, const NetworkSpec& spec, const BatchView& batch) {
    check_inputs(spec, batch.inputs);
    check_labels(spec, batch);
    if (batch.size() == 0) throw ConfigError("loss_and_grads on an empty batch");
    const auto& params = state.params;
    const auto n = batch.size();
    const double inv_n = 1.0 / static_cast<double>(n);

    // Per-sample buffers, reused across calls.
    thread_local std::vector<std::vector<ConvCache>> conv_caches;
    DenseCache dense_cache;
    const Eigen::MatrixXd z = dense_forward(params, flatten_batch(params, spec, batch.inputs, &conv_caches), &dense_cache);
    check_logits(z);

    LossAndGrads out;
    out.grads = params.zeros_like();
    Eigen::MatrixXd delta(z.rows(), z.cols());
    for (Index i = 0; i < z.cols(); ++i) {
        const int label = batch.labels[static_cast<std::size_t>(i)];
        out.loss += cross_entropy(z.col(i), label);
        Prediction p = softmax(z.col(i));
        delta.col(i) = p.probabilities;
        delta(label, i) -= 1.0;
        out.predictions.push_back(std::move(p));
    }
    out.loss *= inv_n;
    if (!std::isfinite(out.loss)) throw DivergenceError("non-finite loss");
    delta *= inv_n;

    // Dense layers, last to first.
    for (std::size_t l = params.dense.size(); l-- > 0;) {
        auto& g = out.grads.dense[l];
        g.weight.noalias() = delta * dense_cache.inputs[l].transpose();
        g.bias = delta.rowwise().sum();
        Eigen::MatrixXd back = params.dense[l].weight.transpose() * delta;
        if (l > 0) back = back.cwiseProduct((dense_cache.pre[l - 1].array() > 0.0).cast<double>().matrix());
        delta = std::move(back);
    }

    // delta is now d(loss)/d(flattened conv output), one column per sample.
    if (params.conv.empty()) return out;
    const Shape3 last = spec.conv_output();
    Eigen::MatrixXd d_act, d_relu, d_cols;
    for (std::size_t i = 0; i < n; ++i) {
        d_act = Eigen::Map<const Eigen::MatrixXd>(delta.col(idx(i)).data(), idx(last.channels),
                                                  idx(last.height * last.width));
        for (std::size_t l = params.conv.size(); l-- > 0;) {
            const auto& cache = conv_caches[i][l];
            const auto out_c = static_cast<std::size_t>(cache.pre.rows());
            d_relu.setZero(cache.pre.rows(), cache.pre.cols());
            for (Index q = 0; q < d_act.cols(); ++q)
                for (std::size_t o = 0; o < out_c; ++o) {
                    const auto p = cache.argmax[static_cast<std::size_t>(q) * out_c + o];
                    if (cache.pre(idx(o), p) > 0.0) d_relu(idx(o), p) = d_act(idx(o), q);
                }
            auto& g = out.grads.conv[l];
            g.weight.noalias() += d_relu * cache.cols.transpose();
            g.bias += d_relu.rowwise().sum();
            if (l > 0) {
                d_cols.noalias() = params.conv[l].weight.transpose() * d_relu;
                col2im(d_cols, static_cast<std::size_t>(params.conv[l].weight.cols()) / kTaps, cache.height,
                       cache.width, d_act);
            }
        }
    }
    return out;
}

void apply_update(NetworkState& state, const Parameters& grads, const TrainConfig& config) {
    ++state.steps;
    auto params = state.params.buffers();
    auto m1 = state.moment1.buffers();
    auto m2 = state.moment2.buffers();
    const auto g = grads.buffers();
    if (g.size() != params.size()) throw ConfigError("gradient set does not match parameters");

    const double lr = config.learning_rate;
    if (config.optimizer == OptimizerKind::Adam) {
        const double t = static_cast<double>(state.steps);
        const double c1 = 1.0 - std::pow(config.beta1, t);
        const double c2 = 1.0 - std::pow(config.beta2, t);
        for (std::size_t b = 0; b < params.size(); ++b)
            for (std::size_t k = 0; k < params[b].size(); ++k) {
                m1[b][k] = config.beta1 * m1[b][k] + (1.0 - config.beta1) * g[b][k];
                m2[b][k] = config.beta2 * m2[b][k] + (1.0 - config.beta2) * g[b][k] * g[b][k];
                params[b][k] -= lr * (m1[b][k] / c1) / (std::sqrt(m2[b][k] / c2) + config.epsilon);
            }
    } else {
        for (std::size_t b = 0; b < params.size(); ++b)
            for (std::size_t k = 0; k < params[b].size(); ++k) {
                m1[b][k] = config.beta1 * m1[b][k] + g[b][k];
                params[b][k] -= lr * m1[b][k];
            }
    }
    if (!state.params.all_finite()) throw DivergenceError("non-finite parameter after optimizer step");
}

Evaluation evaluate(const NetworkState& state, const NetworkSpec& spec, const BatchView& data) {
    if (data.size() == 0) throw ConfigError("evaluate on an empty dataset");
    check_labels(spec, data);
    Evaluation ev;
    ev.count = data.size();
    std::size_t correct = 0;
    double total = 0.0;
    for (std::size_t start = 0; start < data.size(); start += kEvalChunk) {
        const std::size_t len = std::min(kEvalChunk, data.size() - start);
        const Eigen::MatrixXd z = logits(state, spec, data.inputs.subspan(start, len));
        for (Index i = 0; i < z.cols(); ++i) {
            const int label = data.labels[start + static_cast<std::size_t>(i)];
            total += cross_entropy(z.col(i), label);
            if (softmax(z.col(i)).label == label) ++correct;
        }
    }
    ev.accuracy = static_cast<double>(correct) / static_cast<double>(ev.count);
    ev.loss = total / static_cast<double>(ev.count);
    return ev;
}

TrainResult train(NetworkState state, const NetworkSpec& spec, const TrainConfig& config, const BatchView& train_set,
                  const BatchView& validation) {
    config.validate();
    spec.validate();
    check_labels(spec, train_set);
    if (train_set.size() == 0) throw ConfigError("empty training set");

    TrainResult result;
    Xoshiro256ss rng(config.seed);
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<Volume> batch_inputs;
    std::vector<int> batch_labels;

    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double total = 0.0;
        try {
            for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
                const std::size_t end = std::min(order.size(), start + config.batch_size);
                batch_inputs.clear();
                batch_labels.clear();
                for (std::size_t k = start; k < end; ++k) {
                    batch_inputs.push_back(train_set.inputs[order[k]]);
                    batch_labels.push_back(train_set.labels[order[k]]);
                }
                auto lg = loss_and_grads(state, spec, {batch_inputs, batch_labels});
                total += lg.loss * static_cast<double>(end - start);
                apply_update(state, lg.grads, config);
            }
            EpochMetrics m;
            m.epoch = epoch;
            m.train_loss = total / static_cast<double>(order.size());
            if (validation.size() > 0) {
                const auto ev = evaluate(state, spec, validation);
                m.val_loss = ev.loss;
                m.val_accuracy = ev.accuracy;
            }
            result.history.push_back(m);
        } catch (const DivergenceError& e) {
            throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch),
                                  static_cast<int>(epoch));
        }
    }
    result.state = std::move(state);
    return result;
}

std::uint64_t parameter_hash(const Parameters& params) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (const auto& b : params.buffers())
        for (double v : b) {
            const auto bits = std::bit_cast<std::uint64_t>(v);
            for (int k = 0; k < 8; ++k) {
                h ^= (bits >> (8 * k)) & 0xFFu;
                h *= 0x100000001b3ull;
            }
        }
    return h;
}

// --- checkpoints ----------------------------------------------------------------

void save_checkpoint(const NetworkState& state, const NetworkSpec& spec, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    const std::string desc = spec.describe();
    binio::write_magic(out, kCheckpointMagic);
    binio::write_u64(out, desc.size());
    out.write(desc.data(), static_cast<std::streamsize>(desc.size()));
    binio::write_u64(out, state.rng_seed);

    binio::write_u64(out, 2 * (state.params.conv.size() + state.params.dense.size()));
    auto write_matrix = [&](const auto& m) {
        binio::write_u64(out, static_cast<std::uint64_t>(m.rows()));
        binio::write_u64(out, static_cast<std::uint64_t>(m.cols()));
        for (Index r = 0; r < m.rows(); ++r)
            for (Index c = 0; c < m.cols(); ++c) binio::write_f64(out, m(r, c));
    };
    for (const auto* group : {&state.params.conv, &state.params.dense})
        for (const auto& layer : *group) {
            write_matrix(layer.weight);
            write_matrix(layer.bias);
        }
    if (!out) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    binio::expect_magic(in, kCheckpointMagic);
    const auto desc_len = binio::read_u64(in);
    if (desc_len > (1u << 20)) throw IoError("checkpoint descriptor too long");
    std::string desc(desc_len, '\0');
    if (!in.read(desc.data(), static_cast<std::streamsize>(desc_len))) throw IoError("truncated checkpoint");

    Checkpoint ck;
    ck.spec = NetworkSpec::parse(desc);
    ck.state = init_network(ck.spec, 0);
    ck.state.rng_seed = binio::read_u64(in);
    const auto tensors = binio::read_u64(in);
    if (tensors != 2 * (ck.state.params.conv.size() + ck.state.params.dense.size()))
        throw IoError("checkpoint tensor count does not match its descriptor");

    auto read_matrix = [&](auto& m) {
        const auto rows = binio::read_u64(in);
        const auto cols = binio::read_u64(in);
        if (rows != static_cast<std::uint64_t>(m.rows()) || cols != static_cast<std::uint64_t>(m.cols()))
            throw IoError("checkpoint tensor shape does not match its descriptor");
        for (Index r = 0; r < m.rows(); ++r)
            for (Index c = 0; c < m.cols(); ++c) m(r, c) = binio::read_f64(in);
    };
    for (auto* group : {&ck.state.params.conv, &ck.state.params.dense})
        for (auto& layer : *group) {
            read_matrix(layer.weight);
            read_matrix(layer.bias);
        }
    if (in.peek() != std::char_traits<char>::eof()) throw IoError("trailing bytes in checkpoint");
    ck.state.moment1 = ck.state.params.zeros_like();
    ck.state.moment2 = ck.state.params.zeros_like();
    return ck;
}

}  // namespace cslnet::nn
