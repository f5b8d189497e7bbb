#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "vnsemcom/channel.hpp"
#include "vnsemcom/dataset.hpp"
#include "vnsemcom/errors.hpp"
#include "vnsemcom/net.hpp"
#include "vnsemcom/rng.hpp"
#include "vnsemcom/ssim.hpp"
#include "vnsemcom/tensor.hpp"

namespace vnsemcom {

/// Semantic encoder-decoder pair. The encoder compresses an image to a
/// latent vector, the decoder reconstructs from it.
struct SemanticCodec {
    DenseNet encoder; // image_dim -> latent_dim
    DenseNet decoder; // latent_dim -> image_dim
    std::size_t latent_dim = 0;
    int image_side = 0;

    std::size_t image_dim() const {
        return static_cast<std::size_t>(image_side) * image_side;
    }
    std::size_t param_count() const {
        return encoder.param_count() + decoder.param_count();
    }

    Tensor encode(const Tensor& x) const { return forward(encoder, x); }
    Tensor decode(const Tensor& z) const { return forward(decoder, z); }

    Tensor params() const {
        Tensor pe = encoder.params(), pd = decoder.params();
        Tensor flat = Tensor::zeros({pe.size() + pd.size()});
        std::copy(pe.data.begin(), pe.data.end(), flat.data.begin());
        std::copy(pd.data.begin(), pd.data.end(),
                  flat.data.begin() + static_cast<std::ptrdiff_t>(pe.size()));
        return flat;
    }

    void set_params(const Tensor& flat) {
        const std::size_t ne = encoder.param_count();
        if (flat.size() != param_count()) {
            throw DimensionError("codec param vector length mismatch");
        }
        Tensor pe = Tensor::zeros({ne}), pd = Tensor::zeros({flat.size() - ne});
        std::copy_n(flat.data.begin(), ne, pe.data.begin());
        std::copy(flat.data.begin() + static_cast<std::ptrdiff_t>(ne), flat.data.end(),
                  pd.data.begin());
        encoder.set_params(pe);
        decoder.set_params(pd);
    }
};

struct CodecTrainConfig {
    int epochs = 40;
    double lr = 2.0;
    std::size_t latent_dim = 16;
    std::size_t hidden = 64;
    std::size_t batch = 16;
    // Latent noise augmentation: per sample the latent is perturbed by
    // Gaussian noise with std drawn uniformly in [0, latent_noise * rms(z)],
    // which trains the decoder to denoise across channel conditions.
    double latent_noise = 0.35;
};

inline SemanticCodec make_codec(int image_side, const CodecTrainConfig& cfg,
                                RngStream& rng) {
    const std::size_t dim = static_cast<std::size_t>(image_side) * image_side;
    if (cfg.latent_dim >= dim) throw ConfigError("latent_dim must be < image_dim");
    SemanticCodec codec;
    codec.latent_dim = cfg.latent_dim;
    codec.image_side = image_side;
    const std::size_t enc_dims[] = {dim, cfg.hidden, cfg.latent_dim};
    const Activation enc_acts[] = {Activation::Tanh, Activation::Identity};
    const std::size_t dec_dims[] = {cfg.latent_dim, cfg.hidden, dim};
    const Activation dec_acts[] = {Activation::Relu, Activation::Sigmoid};
    codec.encoder = DenseNet::init(enc_dims, enc_acts, rng);
    codec.decoder = DenseNet::init(dec_dims, dec_acts, rng);
    return codec;
}

inline double reconstruction_mse(const SemanticCodec& codec, const SyntheticDataset& data) {
    const Tensor out = forward(codec.decoder, forward(codec.encoder, data.images));
    const Tensor& tgt = data.targets.empty() ? data.images : data.targets;
    double acc = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = out[i] - tgt[i];
        acc += d * d;
    }
    return acc / static_cast<double>(out.size());
}

inline double mean_train_ssim(const SemanticCodec& codec, const SyntheticDataset& data) {
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Tensor x = data.image(i);
        Tensor rec = codec.decode(codec.encode(x));
        clip01(rec);
        acc += ssim(rec, x);
    }
    return acc / static_cast<double>(data.size());
}

/// Minibatch SGD over the autoencoder; shared by centralized training and
/// federated local updates. Epoch count may be zero (no-op).
inline void train_autoencoder_inplace(SemanticCodec& codec, const SyntheticDataset& data,
                                      int epochs, double lr, std::size_t batch,
                                      double latent_noise, RngStream& rng) {
    const std::size_t n = data.size();
    const std::size_t d = data.image_dim();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) {
            std::swap(order[i - 1], order[rng.index(i)]);
        }
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t b = std::min(batch, n - start);
            Tensor x = Tensor::zeros({b, d});
            Tensor t = Tensor::zeros({b, d});
            for (std::size_t k = 0; k < b; ++k) {
                const std::size_t idx = order[start + k];
                for (std::size_t j = 0; j < d; ++j) {
                    x.at(k, j) = data.images.at(idx, j);
                    t.at(k, j) = data.targets.empty() ? data.images.at(idx, j)
                                                      : data.targets.at(idx, j);
                }
            }
            ForwardTrace te = forward_trace(codec.encoder, x);
            Tensor z = te.output();
            if (latent_noise > 0.0) {
                double rms = 0.0;
                for (double v : z.data) rms += v * v;
                rms = std::sqrt(rms / static_cast<double>(z.size()));
                for (std::size_t r = 0; r < z.rows(); ++r) {
                    const double scale = rng.uniform01() * latent_noise * rms;
                    for (std::size_t c = 0; c < z.cols(); ++c)
                        z.at(r, c) += scale * rng.standard_normal();
                }
            }
            ForwardTrace td = forward_trace(codec.decoder, z);
            LossGrad lg = mse_loss(td.output(), t);
            if (!std::isfinite(lg.loss)) {
                throw TrainingError("autoencoder training diverged at epoch " +
                                    std::to_string(epoch));
            }
            Pullback pd = backward_from(codec.decoder, td, lg.grad);
            Pullback pe = backward_from(codec.encoder, te, pd.input_grads);
            codec.decoder = sgd_step(codec.decoder, pd.param_grads, lr);
            codec.encoder = sgd_step(codec.encoder, pe.param_grads, lr);
        }
    }
}

/// Centralized codec training (the federated path reuses the same inner
/// loop through local updates).
inline SemanticCodec train_codec(const SyntheticDataset& train, const CodecTrainConfig& cfg,
                                 RngStream& rng) {
    if (cfg.epochs < 1) throw ConfigError("train_codec needs epochs >= 1");
    SemanticCodec codec = make_codec(train.image_side(), cfg, rng);
    train_autoencoder_inplace(codec, train, cfg.epochs, cfg.lr, cfg.batch,
                              cfg.latent_noise, rng);
    return codec;
}

/// 8-bit affine quantize/dequantize round trip over one latent tensor.
inline Tensor quantize_latent8(const Tensor& z) {
    double lo = z[0], hi = z[0];
    for (double v : z.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    Tensor out = z;
    if (hi <= lo) return out;
    const double scale = (hi - lo) / 255.0;
    for (double& v : out.data) {
        const auto q = std::clamp(static_cast<int>(std::lround((v - lo) / scale)), 0, 255);
        v = lo + q * scale;
    }
    return out;
}

/// Mean SSIM of decode(transmit(encode(x))) against x over a dataset.
/// One block-fading realization per image.
inline double end_to_end_ssim(const SemanticCodec& codec, const ChannelParams& ch,
                              const SyntheticDataset& data, RngStream& rng,
                              bool quantize_latents = false) {
    double acc = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const Tensor x = data.image(i);
        Tensor z = codec.encode(x);
        if (quantize_latents) z = quantize_latent8(z);
        TransmitResult tr = transmit(z, ch, rng);
        Tensor rec = codec.decode(tr.received);
        clip01(rec);
        acc += ssim(rec, x);
    }
    return acc / static_cast<double>(data.size());
}

struct OverheadReport {
    std::uint64_t raw_bytes = 0;
    std::uint64_t semantic_bytes = 0;
    double ratio = 0.0;
};

/// Byte accounting for the semantic-vs-raw transmission comparison:
/// 8-bit pixels against 8-bit quantized latents.
inline OverheadReport overhead_ratio(const SemanticCodec& codec, std::uint64_t frames) {
    if (frames < 1) throw ConfigError("overhead_ratio needs frames >= 1");
    OverheadReport r;
    r.raw_bytes = frames * codec.image_dim();
    r.semantic_bytes = frames * codec.latent_dim;
    r.ratio = static_cast<double>(codec.image_dim()) / static_cast<double>(codec.latent_dim);
    return r;
}

} // namespace vnsemcom
