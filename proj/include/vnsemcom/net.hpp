#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vnsemcom/errors.hpp"
#include "vnsemcom/rng.hpp"
#include "vnsemcom/tensor.hpp"

namespace vnsemcom {

enum class Activation { Identity, Relu, Tanh, Sigmoid, Softmax };

inline Activation activation_from_string(std::string_view s) {
    if (s == "identity") return Activation::Identity;
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "sigmoid") return Activation::Sigmoid;
    if (s == "softmax") return Activation::Softmax;
    throw ConfigError("unknown activation: " + std::string(s));
}

enum class LossKind { Mse, CrossEntropy };

inline LossKind loss_kind_from_string(std::string_view s) {
    if (s == "mse") return LossKind::Mse;
    if (s == "cross_entropy") return LossKind::CrossEntropy;
    throw ConfigError("unknown loss kind: " + std::string(s));
}

struct Layer {
    Tensor weights; // [out x in]
    Tensor bias;    // [out]
    Activation act = Activation::Identity;

    std::size_t in_dim() const { return weights.shape[1]; }
    std::size_t out_dim() const { return weights.shape[0]; }
};

/// Fully-connected feed-forward network. Immutable after construction;
/// training produces new nets via sgd_step. Parameter flattening order is
/// layer by layer, weights row-major then bias.
class DenseNet {
public:
    DenseNet() = default;

    explicit DenseNet(std::vector<Layer> layers) : layers_(std::move(layers)) {
        for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
            if (layers_[i].out_dim() != layers_[i + 1].in_dim()) {
                throw DimensionError("layer " + std::to_string(i) + " out dim " +
                                     std::to_string(layers_[i].out_dim()) +
                                     " does not chain into layer " + std::to_string(i + 1) +
                                     " in dim " + std::to_string(layers_[i + 1].in_dim()));
            }
        }
        for (const Layer& l : layers_) {
            if (l.weights.shape.size() != 2 || l.bias.size() != l.out_dim()) {
                throw DimensionError("layer weights must be [out x in] with matching bias");
            }
        }
    }

    /// Initialize with uniform draws in [-1/sqrt(fan_in), +1/sqrt(fan_in)]
    /// for both weights and biases.
    static DenseNet init(std::span<const std::size_t> dims,
                         std::span<const Activation> acts, RngStream& rng) {
        if (dims.size() < 2 || acts.size() != dims.size() - 1) {
            throw ConfigError("DenseNet::init needs k+1 dims and k activations");
        }
        std::vector<Layer> layers;
        layers.reserve(acts.size());
        for (std::size_t l = 0; l < acts.size(); ++l) {
            const std::size_t in = dims[l], out = dims[l + 1];
            const double bound = 1.0 / std::sqrt(static_cast<double>(in));
            Layer layer;
            layer.weights = Tensor::zeros({out, in});
            layer.bias = Tensor::zeros({out});
            for (double& w : layer.weights.data) w = rng.uniform(-bound, bound);
            for (double& b : layer.bias.data) b = rng.uniform(-bound, bound);
            layer.act = acts[l];
            layers.push_back(std::move(layer));
        }
        return DenseNet(std::move(layers));
    }

    const std::vector<Layer>& layers() const { return layers_; }
    bool empty() const { return layers_.empty(); }
    std::size_t input_dim() const { return layers_.front().in_dim(); }
    std::size_t output_dim() const { return layers_.back().out_dim(); }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (const Layer& l : layers_) n += l.weights.size() + l.bias.size();
        return n;
    }

    Tensor params() const {
        Tensor flat = Tensor::zeros({param_count()});
        std::size_t k = 0;
        for (const Layer& l : layers_) {
            for (double w : l.weights.data) flat[k++] = w;
            for (double b : l.bias.data) flat[k++] = b;
        }
        return flat;
    }

    void set_params(const Tensor& flat) {
        if (flat.size() != param_count()) {
            throw DimensionError("param vector length " + std::to_string(flat.size()) +
                                 " != param_count " + std::to_string(param_count()));
        }
        std::size_t k = 0;
        for (Layer& l : layers_) {
            for (double& w : l.weights.data) w = flat[k++];
            for (double& b : l.bias.data) b = flat[k++];
        }
    }

private:
    std::vector<Layer> layers_;
};

namespace detail {

// Saturating activations are nudged off the exact interval endpoints so
// tanh stays inside (-1,1) and sigmoid inside (0,1) even where the double
// result would round to the boundary.
inline constexpr double kBelowOne = 1.0 - 1e-15;

inline void apply_activation(Activation act, Tensor& batch) {
    switch (act) {
    case Activation::Identity:
        break;
    case Activation::Relu:
        for (double& v : batch.data) v = v > 0.0 ? v : 0.0;
        break;
    case Activation::Tanh:
        for (double& v : batch.data) {
            v = std::tanh(v);
            if (v >= 1.0) v = kBelowOne;
            if (v <= -1.0) v = -kBelowOne;
        }
        break;
    case Activation::Sigmoid:
        for (double& v : batch.data) {
            if (v >= 0.0) {
                v = 1.0 / (1.0 + std::exp(-v));
            } else {
                const double e = std::exp(v);
                v = e / (1.0 + e);
            }
            if (v >= 1.0) v = kBelowOne;
            if (v <= 0.0) v = 1.0 - kBelowOne;
        }
        break;
    case Activation::Softmax:
        for (std::size_t r = 0; r < batch.rows(); ++r) {
            const std::size_t c0 = r * batch.cols();
            double mx = batch[c0];
            for (std::size_t c = 1; c < batch.cols(); ++c)
                mx = std::max(mx, batch[c0 + c]);
            double sum = 0.0;
            for (std::size_t c = 0; c < batch.cols(); ++c) {
                batch[c0 + c] = std::exp(batch[c0 + c] - mx);
                sum += batch[c0 + c];
            }
            for (std::size_t c = 0; c < batch.cols(); ++c) batch[c0 + c] /= sum;
        }
        break;
    }
}

// d(post)/d(pre) pulled back onto an incoming gradient, in place.
inline void activation_vjp(Activation act, const Tensor& pre, const Tensor& post,
                           Tensor& grad) {
    switch (act) {
    case Activation::Identity:
        break;
    case Activation::Relu:
        for (std::size_t i = 0; i < grad.size(); ++i)
            if (pre[i] <= 0.0) grad[i] = 0.0;
        break;
    case Activation::Tanh:
        for (std::size_t i = 0; i < grad.size(); ++i)
            grad[i] *= 1.0 - post[i] * post[i];
        break;
    case Activation::Sigmoid:
        for (std::size_t i = 0; i < grad.size(); ++i)
            grad[i] *= post[i] * (1.0 - post[i]);
        break;
    case Activation::Softmax:
        for (std::size_t r = 0; r < grad.rows(); ++r) {
            const std::size_t c0 = r * grad.cols();
            double dot = 0.0;
            for (std::size_t c = 0; c < grad.cols(); ++c)
                dot += grad[c0 + c] * post[c0 + c];
            for (std::size_t c = 0; c < grad.cols(); ++c)
                grad[c0 + c] = post[c0 + c] * (grad[c0 + c] - dot);
        }
        break;
    }
}

} // namespace detail

/// Per-layer activations kept for the backward pass.
struct ForwardTrace {
    Tensor input;             // [batch x in]
    std::vector<Tensor> pre;  // pre-activation per layer
    std::vector<Tensor> post; // post-activation per layer
    bool input_was_flat = false;

    const Tensor& output() const { return post.back(); }
};

namespace detail {

inline Tensor as_batch(const DenseNet& net, const Tensor& input, bool& was_flat) {
    was_flat = input.shape.size() != 2;
    const std::size_t in_dim = net.input_dim();
    if (was_flat) {
        if (input.size() != in_dim) {
            throw DimensionError("input shape " + shape_string(input) +
                                 " does not match first layer in dim [" +
                                 std::to_string(in_dim) + "]");
        }
        return Tensor::from({1, in_dim}, input.data);
    }
    if (input.shape[1] != in_dim) {
        throw DimensionError("input shape " + shape_string(input) +
                             " does not match first layer in dim [" +
                             std::to_string(in_dim) + "]");
    }
    return input;
}

} // namespace detail

inline ForwardTrace forward_trace(const DenseNet& net, const Tensor& input) {
    ForwardTrace trace;
    trace.input = detail::as_batch(net, input, trace.input_was_flat);
    const std::size_t batch = trace.input.rows();
    const Tensor* x = &trace.input;
    for (const Layer& layer : net.layers()) {
        Tensor pre = Tensor::zeros({batch, layer.out_dim()});
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < layer.out_dim(); ++o) {
                double acc = layer.bias[o];
                const std::size_t w0 = o * layer.in_dim();
                const std::size_t x0 = b * layer.in_dim();
                for (std::size_t i = 0; i < layer.in_dim(); ++i)
                    acc += layer.weights[w0 + i] * x->data[x0 + i];
                pre.at(b, o) = acc;
            }
        }
        Tensor post = pre;
        detail::apply_activation(layer.act, post);
        trace.pre.push_back(std::move(pre));
        trace.post.push_back(std::move(post));
        x = &trace.post.back();
    }
    return trace;
}

/// Pure forward pass. 1-D input gives a 1-D output, [batch x in] gives
/// [batch x out].
inline Tensor forward(const DenseNet& net, const Tensor& input) {
    ForwardTrace trace = forward_trace(net, input);
    Tensor out = trace.output();
    if (trace.input_was_flat) out.shape = {out.size()};
    return out;
}

struct Pullback {
    Tensor param_grads; // flat, same layout as DenseNet::params()
    Tensor input_grads; // [batch x in]
};

/// Backpropagate an arbitrary output gradient through the traced forward
/// pass. The returned input gradient lets nets compose into larger
/// differentiable pipelines.
inline Pullback backward_from(const DenseNet& net, const ForwardTrace& trace,
                              const Tensor& output_grad) {
    const auto& layers = net.layers();
    if (output_grad.size() != trace.post.back().size()) {
        throw DimensionError("output grad shape " + shape_string(output_grad) +
                             " does not match net output " +
                             shape_string(trace.post.back()));
    }
    const std::size_t batch = trace.input.rows();
    Pullback result;
    result.param_grads = Tensor::zeros({net.param_count()});

    Tensor grad = output_grad;
    grad.shape = {batch, layers.back().out_dim()};

    std::size_t offset = net.param_count();
    for (std::size_t li = layers.size(); li-- > 0;) {
        const Layer& layer = layers[li];
        detail::activation_vjp(layer.act, trace.pre[li], trace.post[li], grad);

        const Tensor& layer_in = li == 0 ? trace.input : trace.post[li - 1];
        offset -= layer.weights.size() + layer.bias.size();
        double* wgrad = result.param_grads.data.data() + offset;
        double* bgrad = wgrad + layer.weights.size();

        Tensor next_grad = Tensor::zeros({batch, layer.in_dim()});
        for (std::size_t b = 0; b < batch; ++b) {
            for (std::size_t o = 0; o < layer.out_dim(); ++o) {
                const double g = grad.at(b, o);
                const std::size_t w0 = o * layer.in_dim();
                const std::size_t x0 = b * layer.in_dim();
                bgrad[o] += g;
                for (std::size_t i = 0; i < layer.in_dim(); ++i) {
                    wgrad[w0 + i] += g * layer_in.data[x0 + i];
                    next_grad.data[x0 + i] += g * layer.weights[w0 + i];
                }
            }
        }
        grad = std::move(next_grad);
    }
    result.input_grads = std::move(grad);
    return result;
}

struct LossGrad {
    double loss = 0.0;
    Tensor grad; // d loss / d output
};

/// Mean-squared error over all elements (batch and feature dims).
inline LossGrad mse_loss(const Tensor& output, const Tensor& target) {
    if (output.size() != target.size()) {
        throw DimensionError("mse output size " + std::to_string(output.size()) +
                             " != target size " + std::to_string(target.size()));
    }
    LossGrad lg;
    lg.grad = Tensor::zeros(output.shape.empty() ? std::vector<std::size_t>{output.size()}
                                                 : output.shape);
    const double n = static_cast<double>(output.size());
    for (std::size_t i = 0; i < output.size(); ++i) {
        const double d = output[i] - target[i];
        lg.loss += d * d;
        lg.grad[i] = 2.0 * d / n;
    }
    lg.loss /= n;
    return lg;
}

/// Cross entropy against target rows (one-hot or soft), mean over batch.
inline LossGrad cross_entropy_loss(const Tensor& output, const Tensor& target) {
    if (output.size() != target.size()) {
        throw DimensionError("cross entropy output size " + std::to_string(output.size()) +
                             " != target size " + std::to_string(target.size()));
    }
    constexpr double kTiny = 1e-12;
    LossGrad lg;
    lg.grad = Tensor::zeros(output.shape.empty() ? std::vector<std::size_t>{output.size()}
                                                 : output.shape);
    const double batch = static_cast<double>(output.rows());
    for (std::size_t i = 0; i < output.size(); ++i) {
        lg.loss -= target[i] * std::log(output[i] + kTiny);
        lg.grad[i] = -target[i] / ((output[i] + kTiny) * batch);
    }
    lg.loss /= batch;
    return lg;
}

struct BackwardResult {
    double loss = 0.0;
    Tensor grads; // flat, length param_count
};

/// Loss and exact parameter gradients for one batch.
inline BackwardResult backward(const DenseNet& net, const Tensor& input,
                               LossKind loss_kind, const Tensor& target) {
    ForwardTrace trace = forward_trace(net, input);
    const Tensor& out = trace.output();
    if (target.size() % net.output_dim() != 0 ||
        target.size() / net.output_dim() != trace.input.rows()) {
        throw DimensionError("target batch size does not match input batch size");
    }
    LossGrad lg = loss_kind == LossKind::Mse ? mse_loss(out, target)
                                             : cross_entropy_loss(out, target);
    Pullback pb = backward_from(net, trace, lg.grad);
    return BackwardResult{lg.loss, std::move(pb.param_grads)};
}

/// One plain SGD step: every parameter p becomes p - lr * g.
inline DenseNet sgd_step(const DenseNet& net, const Tensor& grads, double lr) {
    if (grads.size() != net.param_count()) {
        throw DimensionError("grad length " + std::to_string(grads.size()) +
                             " != param_count " + std::to_string(net.param_count()));
    }
    if (lr < 0.0) throw ConfigError("learning rate must be >= 0");
    DenseNet stepped = net;
    Tensor p = stepped.params();
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * grads[i];
    stepped.set_params(p);
    return stepped;
}

inline Tensor one_hot(int label, std::size_t class_count) {
    Tensor t = Tensor::zeros({class_count});
    t[static_cast<std::size_t>(label)] = 1.0;
    return t;
}

inline Tensor one_hot_rows(std::span<const int> labels, std::size_t class_count) {
    Tensor t = Tensor::zeros({labels.size(), class_count});
    for (std::size_t i = 0; i < labels.size(); ++i)
        t.at(i, static_cast<std::size_t>(labels[i])) = 1.0;
    return t;
}

} // namespace vnsemcom
