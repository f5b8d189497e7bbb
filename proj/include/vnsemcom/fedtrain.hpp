#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vnsemcom/codec.hpp"
#include "vnsemcom/dataset.hpp"
#include "vnsemcom/errors.hpp"
#include "vnsemcom/net.hpp"
#include "vnsemcom/rng.hpp"
#include "vnsemcom/ssim.hpp"
#include "vnsemcom/tensor.hpp"

namespace vnsemcom {

/// One client's contribution for a round: the parameter delta between its
/// locally trained model and the global model it started from.
struct GradientUpdate {
    std::string client_id;
    int round = 0;
    Tensor delta;
    std::size_t sample_count = 1;
};

/// Aggregator-side evaluation of one candidate model, one mean SSIM per
/// class plus the overall mean.
struct ScoreVector {
    std::string client_id;
    Tensor per_class_ssim;
    double mean_score = 0.0;
};

enum class AttackKind { None, Untargeted, Targeted, LabelFlip };

inline AttackKind attack_kind_from_string(std::string_view s) {
    if (s == "none") return AttackKind::None;
    if (s == "untargeted") return AttackKind::Untargeted;
    if (s == "targeted") return AttackKind::Targeted;
    if (s == "label_flip") return AttackKind::LabelFlip;
    throw ConfigError("unknown attack kind: " + std::string(s));
}

inline std::string to_string(AttackKind k) {
    switch (k) {
    case AttackKind::None: return "none";
    case AttackKind::Untargeted: return "untargeted";
    case AttackKind::Targeted: return "targeted";
    case AttackKind::LabelFlip: return "label_flip";
    }
    return "?";
}

/// Adversary placement is floor(fraction * client_count) clients at the
/// lowest indices.
struct AttackSpec {
    AttackKind kind = AttackKind::None;
    double fraction = 0.0;
    double strength = 2.0;
    int target_class = 0;
    int substitute_class = 1;
    int flip_from = 0;
    int flip_to = 1;

    std::size_t adversary_count(std::size_t client_count) const {
        return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(client_count)));
    }

    void validate() const {
        if (fraction < 0.0 || fraction > 1.0)
            throw ConfigError("attack fraction must lie in [0,1]");
        if (kind == AttackKind::Untargeted && strength <= 0.0)
            throw ConfigError("untargeted attack strength must be > 0");
    }
};

struct LocalTrainConfig {
    int epochs = 1;
    double lr = 2.0;
    std::size_t batch = 16;
    double latent_noise = 0.35;
};

/// Train a copy of the global codec on the client shard and return the
/// parameter delta. Zero epochs gives an all-zero delta.
inline GradientUpdate local_update(const SemanticCodec& global, const SyntheticDataset& shard,
                                   const LocalTrainConfig& cfg, std::string client_id,
                                   int round, RngStream& rng) {
    if (shard.size() == 0) throw ConfigError("local_update: shard is empty");
    SemanticCodec local = global;
    try {
        train_autoencoder_inplace(local, shard, cfg.epochs, cfg.lr, cfg.batch,
                                  cfg.latent_noise, rng);
    } catch (const TrainingError& e) {
        throw TrainingError("client " + client_id + ": " + e.what());
    }
    const Tensor before = global.params();
    const Tensor after = local.params();
    GradientUpdate u;
    u.client_id = std::move(client_id);
    u.round = round;
    u.sample_count = shard.size();
    u.delta = Tensor::zeros({before.size()});
    for (std::size_t i = 0; i < before.size(); ++i) u.delta[i] = after[i] - before[i];
    return u;
}

/// Replace the delta with Gaussian noise scaled to strength times the
/// honest delta's elementwise standard deviation.
inline GradientUpdate poison_untargeted(const GradientUpdate& honest, double strength,
                                        RngStream& rng) {
    if (strength <= 0.0) throw ConfigError("poison_untargeted: strength must be > 0");
    const double sd = std::sqrt(variance(honest.delta.data));
    GradientUpdate poisoned = honest;
    for (double& v : poisoned.delta.data) v = strength * sd * rng.standard_normal();
    return poisoned;
}

/// Keep inputs of the target class but swap their reconstruction targets
/// for a substitute-class exemplar (the shard's first such image).
inline SyntheticDataset poison_targeted(const SyntheticDataset& shard, int target_class,
                                        int substitute_class) {
    if (target_class < 0 || target_class >= shard.class_count ||
        substitute_class < 0 || substitute_class >= shard.class_count) {
        throw ConfigError("poison_targeted: class id outside generator's class range");
    }
    const bool has_target = std::find(shard.labels.begin(), shard.labels.end(),
                                      target_class) != shard.labels.end();
    if (!has_target) return shard;

    std::size_t exemplar = shard.size();
    for (std::size_t i = 0; i < shard.size(); ++i) {
        if (shard.labels[i] == substitute_class) {
            exemplar = i;
            break;
        }
    }
    if (exemplar == shard.size()) {
        throw ConfigError("poison_targeted: no substitute_class exemplar in shard");
    }

    SyntheticDataset poisoned = shard;
    if (poisoned.targets.empty()) poisoned.targets = poisoned.images;
    const std::size_t d = shard.image_dim();
    for (std::size_t i = 0; i < shard.size(); ++i) {
        if (shard.labels[i] != target_class) continue;
        for (std::size_t j = 0; j < d; ++j)
            poisoned.targets.at(i, j) = shard.images.at(exemplar, j);
    }
    return poisoned;
}

/// Sample-count-weighted mean of deltas.
inline Tensor fedavg(std::span<const GradientUpdate> updates) {
    if (updates.empty()) throw ConfigError("fedavg: no updates");
    const std::size_t len = updates.front().delta.size();
    double total = 0.0;
    for (const auto& u : updates) {
        if (u.delta.size() != len) {
            throw DimensionError("fedavg: delta length " + std::to_string(u.delta.size()) +
                                 " != " + std::to_string(len));
        }
        total += static_cast<double>(u.sample_count);
    }
    Tensor out = Tensor::zeros({len});
    for (const auto& u : updates) {
        const double w = static_cast<double>(u.sample_count) / total;
        for (std::size_t i = 0; i < len; ++i) out[i] += w * u.delta[i];
    }
    return out;
}

inline std::size_t krum_index(std::span<const GradientUpdate> updates, std::size_t f) {
    const std::size_t n = updates.size();
    if (n < f + 3) {
        throw ConfigError("krum needs n >= f + 3, got n=" + std::to_string(n) +
                          " f=" + std::to_string(f));
    }
    std::vector<std::vector<double>> dist(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            if (updates[i].delta.size() != updates[j].delta.size()) {
                throw DimensionError("krum: delta lengths differ");
            }
            double d2 = 0.0;
            for (std::size_t k = 0; k < updates[i].delta.size(); ++k) {
                const double d = updates[i].delta[k] - updates[j].delta[k];
                d2 += d * d;
            }
            dist[i][j] = dist[j][i] = d2;
        }
    }
    const std::size_t neighbors = n - f - 2;
    std::size_t best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> others;
        others.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
            if (j != i) others.push_back(dist[i][j]);
        std::sort(others.begin(), others.end());
        double score = 0.0;
        for (std::size_t k = 0; k < neighbors; ++k) score += others[k];
        if (score < best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

/// Krum selection: the delta minimizing the summed squared distance to its
/// n - f - 2 nearest other deltas, ties broken toward the lowest index.
inline Tensor krum(std::span<const GradientUpdate> updates, std::size_t f) {
    return updates[krum_index(updates, f)].delta;
}

/// Evaluate candidate models (global + delta) on the evaluation set and
/// score each with per-class mean SSIM.
inline std::vector<ScoreVector> score_updates(const SemanticCodec& global,
                                              std::span<const GradientUpdate> updates,
                                              const SyntheticDataset& eval_set) {
    const std::size_t classes = static_cast<std::size_t>(eval_set.class_count);
    std::vector<ScoreVector> scores;
    scores.reserve(updates.size());
    const Tensor base = global.params();
    for (const auto& u : updates) {
        if (u.delta.size() != base.size()) {
            throw DimensionError("score_updates: delta length does not match model");
        }
        SemanticCodec candidate = global;
        Tensor p = base;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] += u.delta[i];
        candidate.set_params(p);

        Tensor per_class = Tensor::zeros({classes});
        std::vector<std::size_t> counts(classes, 0);
        for (std::size_t i = 0; i < eval_set.size(); ++i) {
            const Tensor x = eval_set.image(i);
            Tensor rec = candidate.decode(candidate.encode(x));
            clip01(rec);
            const auto cls = static_cast<std::size_t>(eval_set.labels[i]);
            per_class[cls] += ssim(rec, x);
            ++counts[cls];
        }
        double total = 0.0;
        for (std::size_t c = 0; c < classes; ++c) {
            if (counts[c]) per_class[c] /= static_cast<double>(counts[c]);
            total += per_class[c];
        }
        scores.push_back({u.client_id, std::move(per_class),
                          total / static_cast<double>(classes)});
    }
    return scores;
}

inline constexpr double kDefaultTauSep = 0.05;

/// Two-means clustering over per-class score vectors, seeded with the
/// min-mean and max-mean vectors. The higher-scoring cluster is kept; if
/// the final centers sit closer than tau_sep, everyone is kept (no-attack
/// safety valve).
inline std::vector<std::string> cluster_filter(std::span<const ScoreVector> scores,
                                               double tau_sep = kDefaultTauSep) {
    if (scores.size() < 2) throw ConfigError("cluster_filter needs at least 2 scores");
    const std::size_t dim = scores.front().per_class_ssim.size();
    std::size_t lo = 0, hi = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i].mean_score < scores[lo].mean_score) lo = i;
        if (scores[i].mean_score > scores[hi].mean_score) hi = i;
    }
    std::vector<double> c0(scores[hi].per_class_ssim.data);
    std::vector<double> c1(scores[lo].per_class_ssim.data);

    auto dist2 = [&](const Tensor& v, const std::vector<double>& c) {
        double d2 = 0.0;
        for (std::size_t k = 0; k < dim; ++k) {
            const double d = v[k] - c[k];
            d2 += d * d;
        }
        return d2;
    };

    std::vector<int> assign(scores.size(), 0);
    for (int iter = 0; iter < 32; ++iter) {
        bool changed = false;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            const int a = dist2(scores[i].per_class_ssim, c0) <=
                                  dist2(scores[i].per_class_ssim, c1)
                              ? 0
                              : 1;
            if (a != assign[i]) {
                assign[i] = a;
                changed = true;
            }
        }
        std::vector<double> n0(dim, 0.0), n1(dim, 0.0);
        std::size_t k0 = 0, k1 = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            auto& acc = assign[i] == 0 ? n0 : n1;
            for (std::size_t k = 0; k < dim; ++k) acc[k] += scores[i].per_class_ssim[k];
            (assign[i] == 0 ? k0 : k1)++;
        }
        if (k0 == 0 || k1 == 0) break; // degenerate split, separation guard decides
        for (std::size_t k = 0; k < dim; ++k) {
            n0[k] /= static_cast<double>(k0);
            n1[k] /= static_cast<double>(k1);
        }
        c0 = std::move(n0);
        c1 = std::move(n1);
        if (!changed) break;
    }

    double sep2 = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
        const double d = c0[k] - c1[k];
        sep2 += d * d;
    }
    const bool keep_all = std::sqrt(sep2) < tau_sep;

    double m0 = 0.0, m1 = 0.0;
    std::size_t k0 = 0, k1 = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (assign[i] == 0) {
            m0 += scores[i].mean_score;
            ++k0;
        } else {
            m1 += scores[i].mean_score;
            ++k1;
        }
    }
    const int winner = k0 == 0 ? 1
                     : k1 == 0 ? 0
                     : (m0 / static_cast<double>(k0) >= m1 / static_cast<double>(k1) ? 0 : 1);

    std::vector<std::string> kept;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        if (keep_all || assign[i] == winner) kept.push_back(scores[i].client_id);
    }
    return kept;
}

/// Score, filter, then weight the kept deltas by max(mean_score, 0)
/// normalized to sum one (uniform fallback when every kept score is <= 0).
inline Tensor robust_aggregate(const SemanticCodec& global,
                               std::span<const GradientUpdate> updates,
                               const SyntheticDataset& eval_set,
                               double tau_sep = kDefaultTauSep) {
    const std::vector<ScoreVector> scores = score_updates(global, updates, eval_set);
    std::vector<std::string> kept =
        updates.size() < 2 ? std::vector<std::string>{updates.front().client_id}
                           : cluster_filter(scores, tau_sep);

    std::map<std::string, double> score_of;
    for (const auto& s : scores) score_of[s.client_id] = s.mean_score;

    double total = 0.0;
    for (const auto& id : kept) total += std::max(score_of[id], 0.0);

    const std::size_t len = updates.front().delta.size();
    Tensor out = Tensor::zeros({len});
    for (const auto& u : updates) {
        const bool is_kept = std::find(kept.begin(), kept.end(), u.client_id) != kept.end();
        if (!is_kept) continue;
        const double w = total > 0.0 ? std::max(score_of[u.client_id], 0.0) / total
                                     : 1.0 / static_cast<double>(kept.size());
        for (std::size_t i = 0; i < len; ++i) out[i] += w * u.delta[i];
    }
    return out;
}

enum class AggregationMechanism { FedAvg, Krum, Robust };

inline AggregationMechanism federation_mechanism_from_string(std::string_view s) {
    if (s == "fedavg") return AggregationMechanism::FedAvg;
    if (s == "krum") return AggregationMechanism::Krum;
    if (s == "robust") return AggregationMechanism::Robust;
    throw ConfigError("unknown federation mechanism: " + std::string(s));
}

struct FederationConfig {
    std::uint64_t master_seed = 7;
    std::size_t client_count = 10;
    int rounds = 20;
    AggregationMechanism mechanism = AggregationMechanism::Robust;
    AttackSpec attack;
    std::string generator = "shapes16";
    std::size_t shard_size = 32;
    std::size_t eval_size = 128;
    CodecTrainConfig codec;
    LocalTrainConfig local;
    std::size_t krum_f = 0; // 0 = assume the configured adversary count (min 1)
    double tau_sep = kDefaultTauSep;
};

struct FederationRound {
    int round = 0;
    double eval_ssim = 0.0;
    Tensor per_class_ssim;
    std::vector<std::string> kept;      // empty unless mechanism == Robust
    std::vector<ScoreVector> scores;    // empty unless mechanism == Robust
};

struct FederationResult {
    std::vector<FederationRound> rounds;
    SemanticCodec model;
    double final_ssim = 0.0;
    Tensor final_per_class_ssim;
};

inline double mean_eval_ssim(const SemanticCodec& codec, const SyntheticDataset& eval_set,
                             Tensor& per_class_out) {
    const auto classes = static_cast<std::size_t>(eval_set.class_count);
    per_class_out = Tensor::zeros({classes});
    std::vector<std::size_t> counts(classes, 0);
    for (std::size_t i = 0; i < eval_set.size(); ++i) {
        const Tensor x = eval_set.image(i);
        Tensor rec = codec.decode(codec.encode(x));
        clip01(rec);
        const auto cls = static_cast<std::size_t>(eval_set.labels[i]);
        per_class_out[cls] += ssim(rec, x);
        ++counts[cls];
    }
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) {
        if (counts[c]) per_class_out[c] /= static_cast<double>(counts[c]);
        total += per_class_out[c];
    }
    return total / static_cast<double>(classes);
}

/// Full federated loop: distribute, locally train (with the configured
/// attack applied to the adversary slots), aggregate, apply, evaluate.
inline FederationResult run_federation(const FederationConfig& cfg) {
    cfg.attack.validate();
    RngStream dataset_rng(cfg.master_seed, "dataset");
    RngStream eval_rng(cfg.master_seed, "eval");
    RngStream init_rng(cfg.master_seed, "init");
    RngStream attack_rng(cfg.master_seed, "attack");

    const SyntheticDataset train =
        make_dataset(cfg.generator, cfg.shard_size * cfg.client_count, dataset_rng);
    const SyntheticDataset eval_set = make_dataset(cfg.generator, cfg.eval_size, eval_rng);

    SemanticCodec global = make_codec(train.image_side(), cfg.codec, init_rng);

    const std::size_t adversaries = cfg.attack.adversary_count(cfg.client_count);
    std::vector<SyntheticDataset> shards;
    shards.reserve(cfg.client_count);
    for (std::size_t c = 0; c < cfg.client_count; ++c) {
        SyntheticDataset shard = train.slice(c * cfg.shard_size, cfg.shard_size);
        if (cfg.attack.kind == AttackKind::Targeted && c < adversaries) {
            shard = poison_targeted(shard, cfg.attack.target_class,
                                    cfg.attack.substitute_class);
        }
        shards.push_back(std::move(shard));
    }

    FederationResult result;
    for (int round = 0; round < cfg.rounds; ++round) {
        std::vector<GradientUpdate> updates;
        updates.reserve(cfg.client_count);
        for (std::size_t c = 0; c < cfg.client_count; ++c) {
            RngStream client_rng(cfg.master_seed,
                                 "client/" + std::to_string(c) + "/round/" +
                                     std::to_string(round));
            GradientUpdate u = local_update(global, shards[c], cfg.local,
                                            "veh" + std::to_string(c), round, client_rng);
            if (cfg.attack.kind == AttackKind::Untargeted && c < adversaries) {
                u = poison_untargeted(u, cfg.attack.strength, attack_rng);
            }
            updates.push_back(std::move(u));
        }

        FederationRound rr;
        rr.round = round;
        Tensor agg;
        switch (cfg.mechanism) {
        case AggregationMechanism::FedAvg:
            agg = fedavg(updates);
            break;
        case AggregationMechanism::Krum: {
            const std::size_t f = cfg.krum_f > 0 ? cfg.krum_f : std::max<std::size_t>(adversaries, 1);
            agg = krum(updates, f);
            break;
        }
        case AggregationMechanism::Robust: {
            rr.scores = score_updates(global, updates, eval_set);
            rr.kept = cluster_filter(rr.scores, cfg.tau_sep);
            double total = 0.0;
            std::map<std::string, double> score_of;
            for (const auto& s : rr.scores) score_of[s.client_id] = s.mean_score;
            for (const auto& id : rr.kept) total += std::max(score_of[id], 0.0);
            agg = Tensor::zeros({updates.front().delta.size()});
            for (const auto& u : updates) {
                if (std::find(rr.kept.begin(), rr.kept.end(), u.client_id) == rr.kept.end())
                    continue;
                const double w = total > 0.0
                                     ? std::max(score_of[u.client_id], 0.0) / total
                                     : 1.0 / static_cast<double>(rr.kept.size());
                for (std::size_t i = 0; i < agg.size(); ++i) agg[i] += w * u.delta[i];
            }
            break;
        }
        }

        Tensor p = global.params();
        for (std::size_t i = 0; i < p.size(); ++i) p[i] += agg[i];
        global.set_params(p);

        rr.eval_ssim = mean_eval_ssim(global, eval_set, rr.per_class_ssim);
        result.rounds.push_back(std::move(rr));
    }

    result.model = global;
    result.final_ssim = mean_eval_ssim(global, eval_set, result.final_per_class_ssim);
    return result;
}

} // namespace vnsemcom
