#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "vnsemcom/channel.hpp"
#include "vnsemcom/classify.hpp"
#include "vnsemcom/codec.hpp"
#include "vnsemcom/dataset.hpp"
#include "vnsemcom/errors.hpp"
#include "vnsemcom/net.hpp"
#include "vnsemcom/rng.hpp"
#include "vnsemcom/ssim.hpp"
#include "vnsemcom/tensor.hpp"

namespace vnsemcom {

/// Total, deterministic class-pairing rule choosing the decoy class for
/// each original class.
struct CamoPolicy {
    std::vector<int> pairing; // pairing[original_class] = camouflage class

    static CamoPolicy next_class(int class_count) {
        CamoPolicy p;
        p.pairing.resize(static_cast<std::size_t>(class_count));
        for (int c = 0; c < class_count; ++c)
            p.pairing[static_cast<std::size_t>(c)] = (c + 1) % class_count;
        return p;
    }

    int camo_class(int original_class) const {
        return pairing.at(static_cast<std::size_t>(original_class));
    }
};

/// Camouflage transmission state: a frozen base codec, an independent
/// camouflage encoder with the base encoder's architecture, and a noise
/// generator conditioned on the decoy latent plus both channels' CSI.
/// Every emitted perturbation satisfies |delta|_inf <= epsilon by
/// construction (epsilon * tanh of the generator output).
struct CamouflagePipeline {
    SemanticCodec base; // frozen throughout camouflage training
    DenseNet camo_encoder;
    DenseNet noise_gen;
    ChannelParams legit_ch;
    ChannelParams eaves_ch;
    double epsilon = 0.0;
    CamoPolicy policy;
    double final_legit_loss = 0.0;
    double final_eaves_loss = 0.0;
};

struct JudgeClassifier {
    DenseNet net; // image_dim -> class_count, softmax output
};

struct JudgeConfig {
    int epochs = 30;
    double lr = 1.0;
    std::size_t hidden = 32;
    std::size_t batch = 16;
    double holdout_fraction = 0.25;
    double accuracy_floor = 0.9;
};

/// Train the misleading-rate judge and verify it clears the accuracy floor
/// on a held-out split of the provided data.
inline JudgeClassifier train_judge(const SyntheticDataset& data, const JudgeConfig& cfg,
                                   RngStream& rng) {
    const std::size_t n = data.size();
    const auto holdout =
        static_cast<std::size_t>(std::floor(cfg.holdout_fraction * static_cast<double>(n)));
    if (holdout == 0 || holdout >= n) {
        throw ConfigError("judge holdout fraction leaves an empty split");
    }
    const SyntheticDataset train_split = data.slice(0, n - holdout);
    const SyntheticDataset held = data.slice(n - holdout, holdout);

    JudgeClassifier judge;
    judge.net = make_classifier(data.image_dim(), static_cast<std::size_t>(data.class_count),
                                cfg.hidden, rng);
    train_classifier_inplace(judge.net, train_split.images, train_split.labels,
                             static_cast<std::size_t>(data.class_count), cfg.epochs, cfg.lr,
                             cfg.batch, rng);
    const double acc = classifier_accuracy(judge.net, held.images, held.labels);
    if (acc < cfg.accuracy_floor) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "judge held-out accuracy %.3f below floor %.3f; raise epochs or "
                      "hidden units in the judge config",
                      acc, cfg.accuracy_floor);
        throw CalibrationError(buf);
    }
    return judge;
}

namespace detail {

inline Tensor generator_input(const CamouflagePipeline& pipe, std::span<const double> zc) {
    const Tensor legit = csi_features(pipe.legit_ch);
    const Tensor eaves = csi_features(pipe.eaves_ch);
    return concat(zc, legit.data, eaves.data);
}

} // namespace detail

/// Perturbed latent for one transmission:
/// z' = encode(x_original) + epsilon * tanh(noise_gen(camo_latent, CSI)).
inline Tensor craft(const CamouflagePipeline& pipe, const Tensor& x_original,
                    const Tensor& x_camouflage) {
    Tensor z = forward(pipe.base.encoder, x_original);
    const Tensor zc = forward(pipe.camo_encoder, x_camouflage);
    const Tensor u = forward(pipe.noise_gen, detail::generator_input(pipe, zc.data));
    for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] += pipe.epsilon * std::tanh(u[i]);
    }
    return z;
}

struct CamoTrainConfig {
    int epochs = 60;
    double lr = 0.5;
    std::size_t batch = 16;
    double lambda = 1.0;  // weight of the eavesdropper camouflage term
    double epsilon = 0.0; // <= 0 selects 0.5 * mean per-dimension latent std
    std::size_t gen_hidden = 48;
};

/// Default perturbation budget: half the mean per-dimension latent
/// standard deviation of the base codec on the training set.
inline double default_epsilon(const SemanticCodec& base, const SyntheticDataset& train) {
    const Tensor z = forward(base.encoder, train.images);
    const std::size_t n = z.rows(), d = z.cols();
    double acc = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
        double m = 0.0, s = 0.0;
        for (std::size_t r = 0; r < n; ++r) m += z.at(r, c);
        m /= static_cast<double>(n);
        for (std::size_t r = 0; r < n; ++r) {
            const double dd = z.at(r, c) - m;
            s += dd * dd;
        }
        acc += std::sqrt(s / static_cast<double>(n));
    }
    return 0.5 * acc / static_cast<double>(d);
}

/// Joint training of the camouflage encoder and the noise generator with
/// the base codec frozen. Loss per sample:
///   mse(decode(transmit_legit(z')), x_original)
///   + lambda * mse(decode(transmit_eaves(z')), x_camouflage)
/// with fresh channel realizations and decoy exemplars every minibatch.
inline CamouflagePipeline train_camouflage(const SemanticCodec& base,
                                           const SyntheticDataset& train,
                                           const CamoPolicy& policy, ChannelParams legit,
                                           ChannelParams eaves, const CamoTrainConfig& cfg,
                                           RngStream& rng) {
    if (static_cast<int>(policy.pairing.size()) != train.class_count) {
        throw ConfigError("camo policy must pair every generator class");
    }
    CamouflagePipeline pipe;
    pipe.base = base;
    pipe.legit_ch = legit;
    pipe.eaves_ch = eaves;
    pipe.policy = policy;
    pipe.epsilon = cfg.epsilon > 0.0 ? cfg.epsilon : default_epsilon(base, train);

    // camouflage encoder mirrors the base encoder's architecture
    std::vector<std::size_t> enc_dims{base.encoder.input_dim()};
    std::vector<Activation> enc_acts;
    for (const Layer& l : base.encoder.layers()) {
        enc_dims.push_back(l.out_dim());
        enc_acts.push_back(l.act);
    }
    pipe.camo_encoder = DenseNet::init(enc_dims, enc_acts, rng);

    const std::size_t latent = base.latent_dim;
    const std::size_t gen_dims[] = {latent + 2 * kCsiFeatureDim, cfg.gen_hidden, latent};
    const Activation gen_acts[] = {Activation::Tanh, Activation::Identity};
    pipe.noise_gen = DenseNet::init(gen_dims, gen_acts, rng);

    // indices per class for decoy exemplar draws
    std::vector<std::vector<std::size_t>> by_class(
        static_cast<std::size_t>(train.class_count));
    for (std::size_t i = 0; i < train.size(); ++i) {
        by_class[static_cast<std::size_t>(train.labels[i])].push_back(i);
    }
    for (int c = 0; c < train.class_count; ++c) {
        if (by_class[static_cast<std::size_t>(policy.camo_class(c))].empty()) {
            throw ConfigError("no training exemplars for camouflage class " +
                              std::to_string(policy.camo_class(c)));
        }
    }

    const std::size_t n = train.size();
    const std::size_t d = train.image_dim();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    const Tensor csi_l = csi_features(legit);
    const Tensor csi_e = csi_features(eaves);
    const std::size_t gin_dim = latent + 2 * kCsiFeatureDim;

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
        double epoch_legit = 0.0, epoch_eaves = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch) {
            const std::size_t b = std::min(cfg.batch, n - start);
            Tensor x_orig = Tensor::zeros({b, d});
            Tensor x_camo = Tensor::zeros({b, d});
            for (std::size_t k = 0; k < b; ++k) {
                const std::size_t idx = order[start + k];
                const auto& pool =
                    by_class[static_cast<std::size_t>(policy.camo_class(train.labels[idx]))];
                const std::size_t ex = pool[rng.index(pool.size())];
                for (std::size_t j = 0; j < d; ++j) {
                    x_orig.at(k, j) = train.images.at(idx, j);
                    x_camo.at(k, j) = train.images.at(ex, j);
                }
            }

            const Tensor z_orig = forward(pipe.base.encoder, x_orig);
            ForwardTrace tce = forward_trace(pipe.camo_encoder, x_camo);
            Tensor gin = Tensor::zeros({b, gin_dim});
            for (std::size_t k = 0; k < b; ++k) {
                for (std::size_t j = 0; j < latent; ++j)
                    gin.at(k, j) = tce.output().at(k, j);
                for (std::size_t j = 0; j < kCsiFeatureDim; ++j) {
                    gin.at(k, latent + j) = csi_l[j];
                    gin.at(k, latent + kCsiFeatureDim + j) = csi_e[j];
                }
            }
            ForwardTrace tng = forward_trace(pipe.noise_gen, gin);
            const Tensor& u = tng.output();

            Tensor z_prime = z_orig;
            Tensor tanh_u = u;
            for (std::size_t i2 = 0; i2 < tanh_u.size(); ++i2) {
                tanh_u[i2] = std::tanh(u[i2]);
                z_prime.data[i2] += pipe.epsilon * tanh_u[i2];
            }

            // per-sample block fading; noise realizations enter the loss
            // as sampled constants
            Tensor z_legit = Tensor::zeros({b, latent});
            Tensor z_eaves = Tensor::zeros({b, latent});
            for (std::size_t k = 0; k < b; ++k) {
                Tensor row = Tensor::zeros({latent});
                for (std::size_t j = 0; j < latent; ++j) row[j] = z_prime.at(k, j);
                const Tensor rl = transmit(row, legit, rng).received;
                const Tensor re = transmit(row, eaves, rng).received;
                for (std::size_t j = 0; j < latent; ++j) {
                    z_legit.at(k, j) = rl[j];
                    z_eaves.at(k, j) = re[j];
                }
            }

            ForwardTrace tdl = forward_trace(pipe.base.decoder, z_legit);
            ForwardTrace tde = forward_trace(pipe.base.decoder, z_eaves);
            LossGrad ll = mse_loss(tdl.output(), x_orig);
            LossGrad le = mse_loss(tde.output(), x_camo);
            if (!std::isfinite(ll.loss) || !std::isfinite(le.loss)) {
                throw TrainingError("camouflage training diverged at epoch " +
                                    std::to_string(epoch));
            }
            epoch_legit += ll.loss;
            epoch_eaves += le.loss;
            ++batches;

            Pullback pl = backward_from(pipe.base.decoder, tdl, ll.grad);
            Pullback pe = backward_from(pipe.base.decoder, tde, le.grad);
            Tensor du = Tensor::zeros({b, latent});
            for (std::size_t i2 = 0; i2 < du.size(); ++i2) {
                const double dz = pl.input_grads[i2] + cfg.lambda * pe.input_grads[i2];
                du[i2] = dz * pipe.epsilon * (1.0 - tanh_u[i2] * tanh_u[i2]);
            }
            Pullback pg = backward_from(pipe.noise_gen, tng, du);
            Tensor dzc = Tensor::zeros({b, latent});
            for (std::size_t k = 0; k < b; ++k)
                for (std::size_t j = 0; j < latent; ++j)
                    dzc.at(k, j) = pg.input_grads.at(k, j);
            Pullback pc = backward_from(pipe.camo_encoder, tce, dzc);

            pipe.noise_gen = sgd_step(pipe.noise_gen, pg.param_grads, cfg.lr);
            pipe.camo_encoder = sgd_step(pipe.camo_encoder, pc.param_grads, cfg.lr);
        }
        pipe.final_legit_loss = epoch_legit / static_cast<double>(batches);
        pipe.final_eaves_loss = epoch_eaves / static_cast<double>(batches);
    }
    return pipe;
}

/// Untrained control pipeline (fresh generator, explicit budget), used to
/// show the camouflage effect comes from training rather than plumbing.
inline CamouflagePipeline make_untrained_pipeline(const SemanticCodec& base,
                                                  const CamoPolicy& policy,
                                                  ChannelParams legit, ChannelParams eaves,
                                                  double epsilon, std::size_t gen_hidden,
                                                  RngStream& rng) {
    CamouflagePipeline pipe;
    pipe.base = base;
    pipe.legit_ch = legit;
    pipe.eaves_ch = eaves;
    pipe.policy = policy;
    pipe.epsilon = epsilon;
    std::vector<std::size_t> enc_dims{base.encoder.input_dim()};
    std::vector<Activation> enc_acts;
    for (const Layer& l : base.encoder.layers()) {
        enc_dims.push_back(l.out_dim());
        enc_acts.push_back(l.act);
    }
    pipe.camo_encoder = DenseNet::init(enc_dims, enc_acts, rng);
    const std::size_t latent = base.latent_dim;
    const std::size_t gen_dims[] = {latent + 2 * kCsiFeatureDim, gen_hidden, latent};
    const Activation gen_acts[] = {Activation::Tanh, Activation::Identity};
    pipe.noise_gen = DenseNet::init(gen_dims, gen_acts, rng);
    return pipe;
}

namespace detail {

inline std::vector<std::vector<std::size_t>> class_index(const SyntheticDataset& data) {
    std::vector<std::vector<std::size_t>> by_class(
        static_cast<std::size_t>(data.class_count));
    for (std::size_t i = 0; i < data.size(); ++i)
        by_class[static_cast<std::size_t>(data.labels[i])].push_back(i);
    return by_class;
}

} // namespace detail

/// Fraction of decodes over the given channel that the judge classifies as
/// the decoy class, over every (image, trial) pair with fresh exemplars
/// and fading.
inline double camo_class_rate(const CamouflagePipeline& pipe, const JudgeClassifier& judge,
                              const SyntheticDataset& test, int trials_per_image,
                              const ChannelParams& channel, RngStream& rng) {
    if (trials_per_image < 1) throw ConfigError("trials_per_image must be >= 1");
    const auto by_class = detail::class_index(test);
    std::size_t hits = 0, total = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const Tensor x = test.image(i);
        const int camo_class = pipe.policy.camo_class(test.labels[i]);
        const auto& pool = by_class[static_cast<std::size_t>(camo_class)];
        if (pool.empty()) continue;
        for (int t = 0; t < trials_per_image; ++t) {
            const Tensor exemplar = test.image(pool[rng.index(pool.size())]);
            const Tensor z = craft(pipe, x, exemplar);
            Tensor rec = forward(pipe.base.decoder, transmit(z, channel, rng).received);
            clip01(rec);
            if (predict_class(judge.net, rec) == camo_class) ++hits;
            ++total;
        }
    }
    return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

/// The misleading rate: decoy-class rate of the eavesdropper's decodes.
inline double misleading_rate(const CamouflagePipeline& pipe, const JudgeClassifier& judge,
                              const SyntheticDataset& test, int trials_per_image,
                              RngStream& rng) {
    return camo_class_rate(pipe, judge, test, trials_per_image, pipe.eaves_ch, rng);
}

struct FidelityReport {
    double mean_ssim = 0.0;
    double accuracy = 0.0; // judge accuracy against the original class
};

/// Legitimate-path quality of the same perturbed transmissions, measured
/// against the original image and class.
inline FidelityReport legitimate_fidelity(const CamouflagePipeline& pipe,
                                          const JudgeClassifier& judge,
                                          const SyntheticDataset& test, int trials_per_image,
                                          RngStream& rng) {
    if (trials_per_image < 1) throw ConfigError("trials_per_image must be >= 1");
    const auto by_class = detail::class_index(test);
    FidelityReport report;
    std::size_t total = 0, hits = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        const Tensor x = test.image(i);
        const auto& pool =
            by_class[static_cast<std::size_t>(pipe.policy.camo_class(test.labels[i]))];
        if (pool.empty()) continue;
        for (int t = 0; t < trials_per_image; ++t) {
            const Tensor exemplar = test.image(pool[rng.index(pool.size())]);
            const Tensor z = craft(pipe, x, exemplar);
            Tensor rec = forward(pipe.base.decoder, transmit(z, pipe.legit_ch, rng).received);
            clip01(rec);
            report.mean_ssim += ssim(rec, x);
            if (predict_class(judge.net, rec) == test.labels[i]) ++hits;
            ++total;
        }
    }
    if (total > 0) {
        report.mean_ssim /= static_cast<double>(total);
        report.accuracy = static_cast<double>(hits) / static_cast<double>(total);
    }
    return report;
}

} // namespace vnsemcom
