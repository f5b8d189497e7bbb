#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "vnsemcom/dataset.hpp"
#include "vnsemcom/errors.hpp"
#include "vnsemcom/net.hpp"
#include "vnsemcom/rng.hpp"
#include "vnsemcom/tensor.hpp"

namespace vnsemcom {

struct ClassifierTrainConfig {
    int epochs = 20;
    double lr = 1.0;
    std::size_t hidden = 32;
    std::size_t batch = 16;
};

inline DenseNet make_classifier(std::size_t input_dim, std::size_t class_count,
                                std::size_t hidden, RngStream& rng) {
    const std::size_t dims[] = {input_dim, hidden, class_count};
    const Activation acts[] = {Activation::Relu, Activation::Softmax};
    return DenseNet::init(dims, acts, rng);
}

/// Minibatch SGD with cross entropy over (images, labels).
inline void train_classifier_inplace(DenseNet& net, const Tensor& images,
                                     std::span<const int> labels, std::size_t class_count,
                                     int epochs, double lr, std::size_t batch,
                                     RngStream& rng) {
    const std::size_t n = labels.size();
    const std::size_t d = images.cols();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t b = std::min(batch, n - start);
            Tensor x = Tensor::zeros({b, d});
            Tensor t = Tensor::zeros({b, class_count});
            for (std::size_t k = 0; k < b; ++k) {
                const std::size_t idx = order[start + k];
                for (std::size_t j = 0; j < d; ++j) x.at(k, j) = images.at(idx, j);
                t.at(k, static_cast<std::size_t>(labels[idx])) = 1.0;
            }
            BackwardResult br = backward(net, x, LossKind::CrossEntropy, t);
            if (!std::isfinite(br.loss)) {
                throw TrainingError("classifier training diverged at epoch " +
                                    std::to_string(epoch));
            }
            net = sgd_step(net, br.grads, lr);
        }
    }
}

inline int predict_class(const DenseNet& net, const Tensor& image) {
    const Tensor probs = forward(net, image);
    return static_cast<int>(argmax(probs.data));
}

inline double classifier_accuracy(const DenseNet& net, const Tensor& images,
                                  std::span<const int> labels) {
    if (labels.empty()) return 0.0;
    const Tensor probs = forward(net, images);
    std::size_t hits = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (static_cast<int>(argmax(probs.row(i))) == labels[i]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(labels.size());
}

} // namespace vnsemcom
