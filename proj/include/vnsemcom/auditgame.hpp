#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vnsemcom/classify.hpp"
#include "vnsemcom/dataset.hpp"
#include "vnsemcom/errors.hpp"
#include "vnsemcom/fedtrain.hpp"
#include "vnsemcom/rng.hpp"
#include "vnsemcom/tensor.hpp"

namespace vnsemcom {

/// Payoff constants of the audit game between one evaluatee (honest or
/// lazy task execution) and one assessor (audit or not).
struct AuditPayoffs {
    double c_high = 1.0;  // evaluatee cost of honest execution
    double c_low = 0.2;   // evaluatee cost of lazy execution
    double g = 2.0;       // evaluatee gain from an audited-honest outcome
    double f = 2.0;       // evaluatee loss from an audited-lazy outcome
    double c_audit = 0.2; // assessor audit cost
    double loss_l = 1.0;  // assessor loss from an undetected lazy result

    void validate() const {
        if (!(c_high > 0.0)) throw ConfigError("payoffs: c_high must be > 0");
        if (c_low < 0.0 || c_low > c_high)
            throw ConfigError("payoffs: need 0 <= c_low <= c_high");
        if (!(g > 0.0)) throw ConfigError("payoffs: g must be > 0");
        if (!(f > 0.0)) throw ConfigError("payoffs: f must be > 0");
        if (!(c_audit > 0.0)) throw ConfigError("payoffs: c_audit must be > 0");
        if (!(loss_l > 0.0)) throw ConfigError("payoffs: loss_l must be > 0");
    }
};

/// Expected evaluatee utility under audit probability p.
inline double evaluatee_utility(const AuditPayoffs& pay, bool honest, double p) {
    return honest ? -pay.c_high + p * pay.g : -pay.c_low - p * pay.f;
}

/// Expected assessor utility under honest probability q.
inline double assessor_utility(const AuditPayoffs& pay, bool audit, double q) {
    return audit ? -pay.c_audit : -(1.0 - q) * pay.loss_l;
}

enum class Regime { Interior, CornerAlwaysHonest, CornerNeverAudit, CornerNeverHonest };

inline std::string to_string(Regime r) {
    switch (r) {
    case Regime::Interior: return "interior";
    case Regime::CornerAlwaysHonest: return "corner_always_honest";
    case Regime::CornerNeverAudit: return "corner_never_audit";
    case Regime::CornerNeverHonest: return "corner_never_honest";
    }
    return "?";
}

struct EquilibriumPoint {
    double p_star = 0.0; // audit probability
    double q_star = 0.0; // honest probability
    Regime regime = Regime::Interior;
};

/// Mixed-strategy equilibrium of the audit game. Interior solution from
/// the two indifference conditions:
///   evaluatee: -c_high + p*g = -c_low - p*f  =>  p* = (c_high-c_low)/(g+f)
///   assessor:  -c_audit = -(1-q)*loss_l      =>  q* = 1 - c_audit/loss_l
/// Corners: equal execution costs make honesty dominant (audit pointless),
/// c_audit >= loss_l makes auditing dominated (lazy follows), and a cost
/// gap above g+f keeps the evaluatee lazy even under certain audit.
inline EquilibriumPoint equilibrium(const AuditPayoffs& pay) {
    pay.validate();
    if (pay.c_high == pay.c_low) {
        return {0.0, 1.0, Regime::CornerAlwaysHonest};
    }
    if (pay.c_audit >= pay.loss_l) {
        return {0.0, 0.0, Regime::CornerNeverAudit};
    }
    const double p_raw = (pay.c_high - pay.c_low) / (pay.g + pay.f);
    if (p_raw > 1.0) {
        return {1.0, 0.0, Regime::CornerNeverHonest};
    }
    return {p_raw, 1.0 - pay.c_audit / pay.loss_l, Regime::Interior};
}

struct BestResponseVerdict {
    bool pass = false;
    double max_gain_evaluatee = 0.0;
    double max_gain_assessor = 0.0;
};

/// Grid verification that no unilateral deviation from (p, q) improves
/// either player's expected utility by more than eps. Utilities come from
/// the explicit 2x2 expected-payoff table above.
inline BestResponseVerdict best_response_oracle(const AuditPayoffs& pay, double p, double q,
                                                double grid_step = 1e-3, double eps = 1e-6) {
    pay.validate();
    if (grid_step <= 0.0 || grid_step > 1e-3) {
        throw ConfigError("best_response_oracle: grid step must lie in (0, 1e-3]");
    }
    auto eval_mixed = [&](double audit_p, double honest_q) {
        return honest_q * evaluatee_utility(pay, true, audit_p) +
               (1.0 - honest_q) * evaluatee_utility(pay, false, audit_p);
    };
    auto assess_mixed = [&](double audit_p, double honest_q) {
        return audit_p * assessor_utility(pay, true, honest_q) +
               (1.0 - audit_p) * assessor_utility(pay, false, honest_q);
    };

    const double u_e = eval_mixed(p, q);
    const double u_a = assess_mixed(p, q);
    BestResponseVerdict v;
    const auto steps = static_cast<std::size_t>(std::ceil(1.0 / grid_step));
    for (std::size_t k = 0; k <= steps; ++k) {
        const double x = std::min(1.0, static_cast<double>(k) * grid_step);
        v.max_gain_evaluatee = std::max(v.max_gain_evaluatee, eval_mixed(p, x) - u_e);
        v.max_gain_assessor = std::max(v.max_gain_assessor, assess_mixed(x, q) - u_a);
    }
    v.pass = v.max_gain_evaluatee <= eps && v.max_gain_assessor <= eps;
    return v;
}

enum class EvaluateeStrategy { Rational, AlwaysHonest, AlwaysLazy, Mixed };

struct StrategySpec {
    EvaluateeStrategy kind = EvaluateeStrategy::Rational;
    double q = 1.0; // honest probability for Mixed
};

enum class TaskQuality { Honest, Lazy };

/// Pick honest or lazy execution. Rational players compare expected
/// utilities under the declared audit probability, ties going to honest.
inline TaskQuality evaluatee_decide(const StrategySpec& strategy, double declared_p,
                                    const AuditPayoffs& pay, RngStream& rng) {
    if (declared_p < 0.0 || declared_p > 1.0) {
        throw ConfigError("declared_p must lie in [0,1]");
    }
    switch (strategy.kind) {
    case EvaluateeStrategy::AlwaysHonest:
        return TaskQuality::Honest;
    case EvaluateeStrategy::AlwaysLazy:
        return TaskQuality::Lazy;
    case EvaluateeStrategy::Mixed:
        return rng.uniform01() < strategy.q ? TaskQuality::Honest : TaskQuality::Lazy;
    case EvaluateeStrategy::Rational:
    default:
        return evaluatee_utility(pay, true, declared_p) >=
                       evaluatee_utility(pay, false, declared_p)
                   ? TaskQuality::Honest
                   : TaskQuality::Lazy;
    }
}

enum class AuditOutcome { AuditedHonest, AuditedLazy, NotAudited };

inline char outcome_code(AuditOutcome o) {
    switch (o) {
    case AuditOutcome::AuditedHonest: return 'H';
    case AuditOutcome::AuditedLazy: return 'L';
    case AuditOutcome::NotAudited: return 'N';
    }
    return '?';
}

struct LedgerEvent {
    int round = 0;
    std::string vehicle_id;
    std::string assessor_id;
    AuditOutcome outcome = AuditOutcome::NotAudited;
    double trust_after = 0.0;

    bool operator==(const LedgerEvent&) const = default;

    auto sort_key() const { return std::tie(round, vehicle_id, assessor_id); }
};

struct TrustRecord {
    enum class Role { Evaluatee, Assessor };
    std::string vehicle_id;
    double trust = 0.5;
    int rounds_evaluated = 0;
    Role role = Role::Evaluatee;
};

/// Append-only replicated record of audit outcomes. The digest is an
/// FNV-1a hash of the canonical line serialization, so replicas agree
/// exactly when their event sequences agree.
class TrustLedger {
public:
    void append(LedgerEvent event) { events_.push_back(std::move(event)); }

    const std::vector<LedgerEvent>& events() const { return events_; }

    std::string serialize_events() const {
        std::string out;
        char buf[64];
        for (const LedgerEvent& e : events_) {
            std::snprintf(buf, sizeof(buf), "%.6f", e.trust_after);
            out += std::to_string(e.round) + "," + e.vehicle_id + "," + e.assessor_id +
                   "," + outcome_code(e.outcome) + "," + buf + "\n";
        }
        return out;
    }

    std::uint64_t digest() const { return detail::fnv1a64(serialize_events()); }

    /// Export format: one line per event plus a trailing `digest,<hex>` line.
    std::string export_text() const {
        char hex[32];
        std::snprintf(hex, sizeof(hex), "%016llx",
                      static_cast<unsigned long long>(digest()));
        return serialize_events() + "digest," + hex + "\n";
    }

private:
    std::vector<LedgerEvent> events_;
};

/// One audit round. Evaluatee i is assigned assessor i mod |assessors|;
/// every assessor audits each assigned evaluatee independently with the
/// declared probability. Audited-honest adds alpha, audited-lazy subtracts
/// beta (both clamped to [0,1]); unaudited trust is untouched. Draw order
/// per evaluatee is decide-then-audit, fixed by iteration order.
inline std::vector<LedgerEvent> run_audit_round(
    int round, std::span<const std::string> assessors, std::span<TrustRecord> evaluatees,
    std::span<const StrategySpec> strategies, double declared_p, const AuditPayoffs& pay,
    double alpha, double beta, RngStream& rng) {
    if (assessors.empty()) throw ConfigError("run_audit_round: no assessors");
    if (strategies.size() != evaluatees.size()) {
        throw ConfigError("run_audit_round: one strategy per evaluatee required");
    }
    if (declared_p < 0.0 || declared_p > 1.0) {
        throw ConfigError("declared_p must lie in [0,1]");
    }
    std::vector<LedgerEvent> events;
    events.reserve(evaluatees.size());
    for (std::size_t i = 0; i < evaluatees.size(); ++i) {
        TrustRecord& rec = evaluatees[i];
        const TaskQuality quality = evaluatee_decide(strategies[i], declared_p, pay, rng);
        const bool audited = rng.uniform01() < declared_p;
        AuditOutcome outcome = AuditOutcome::NotAudited;
        if (audited) {
            if (quality == TaskQuality::Honest) {
                outcome = AuditOutcome::AuditedHonest;
                rec.trust = std::min(1.0, rec.trust + alpha);
            } else {
                outcome = AuditOutcome::AuditedLazy;
                rec.trust = std::max(0.0, rec.trust - beta);
            }
        }
        rec.rounds_evaluated += 1;
        events.push_back({round, rec.vehicle_id, assessors[i % assessors.size()], outcome,
                          rec.trust});
    }
    return events;
}

/// Merge per-assessor event batches into the canonical ledger: total order
/// by (round, vehicle, assessor), exact duplicates collapsed, conflicting
/// events for one key rejected as equivocation.
inline TrustLedger sync_ledgers(std::span<const TrustLedger> assessor_ledgers) {
    std::vector<LedgerEvent> all;
    for (const TrustLedger& l : assessor_ledgers) {
        all.insert(all.end(), l.events().begin(), l.events().end());
    }
    std::sort(all.begin(), all.end(), [](const LedgerEvent& a, const LedgerEvent& b) {
        if (a.sort_key() != b.sort_key()) return a.sort_key() < b.sort_key();
        if (a.outcome != b.outcome) return a.outcome < b.outcome;
        return a.trust_after < b.trust_after;
    });
    TrustLedger canonical;
    for (std::size_t i = 0; i < all.size(); ++i) {
        if (i > 0 && all[i] == all[i - 1]) continue; // duplicate delivery
        if (i > 0 && all[i].sort_key() == all[i - 1].sort_key()) {
            throw EquivocationError("conflicting events from assessor " + all[i].assessor_id +
                                    " for vehicle " + all[i].vehicle_id + " in round " +
                                    std::to_string(all[i].round));
        }
        canonical.append(all[i]);
    }
    return canonical;
}

/// Promotion rule: an evaluatee becomes an assessor once it has been
/// evaluated for at least min_rounds rounds and its trust strictly exceeds
/// the threshold.
inline TrustRecord promote(const TrustRecord& record, double theta, int min_rounds) {
    if (record.role != TrustRecord::Role::Evaluatee) {
        throw ConfigError("promote expects an evaluatee record");
    }
    TrustRecord out = record;
    if (record.rounds_evaluated >= min_rounds && record.trust > theta) {
        out.role = TrustRecord::Role::Assessor;
    }
    return out;
}

/// Exclude clients at or below the trust floor, weight the rest by trust
/// normalized to sum one, and return the weighted sum of deltas.
inline Tensor trust_weighted_aggregate(std::span<const GradientUpdate> updates,
                                       const std::map<std::string, double>& trust,
                                       double tau_x) {
    if (updates.empty()) throw ConfigError("trust_weighted_aggregate: no updates");
    double total = 0.0;
    std::vector<double> weights(updates.size(), 0.0);
    for (std::size_t i = 0; i < updates.size(); ++i) {
        const auto it = trust.find(updates[i].client_id);
        if (it == trust.end()) {
            throw ConfigError("no trust record for client " + updates[i].client_id);
        }
        if (it->second > tau_x) {
            weights[i] = it->second;
            total += it->second;
        }
    }
    if (total <= 0.0) throw QuorumError("every client fell at or below the trust floor");
    Tensor out = Tensor::zeros({updates.front().delta.size()});
    for (std::size_t i = 0; i < updates.size(); ++i) {
        if (weights[i] == 0.0) continue;
        const double w = weights[i] / total;
        if (updates[i].delta.size() != out.size()) {
            throw DimensionError("trust_weighted_aggregate: delta lengths differ");
        }
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += w * updates[i].delta[k];
    }
    return out;
}

enum class TrustMechanism { AuditTrust, TrustNoAudit, Krum, None };

inline TrustMechanism trust_mechanism_from_string(std::string_view s) {
    if (s == "audit_trust") return TrustMechanism::AuditTrust;
    if (s == "trust_no_audit") return TrustMechanism::TrustNoAudit;
    if (s == "krum") return TrustMechanism::Krum;
    if (s == "none") return TrustMechanism::None;
    throw ConfigError("unknown trust mechanism: " + std::string(s));
}

struct TrustCampaignConfig {
    std::uint64_t master_seed = 7;
    std::size_t vehicle_count = 10;
    double untrustworthy_fraction = 0.2;
    int rounds = 15;
    TrustMechanism mechanism = TrustMechanism::AuditTrust;
    AuditPayoffs pay;
    double alpha = 0.1;
    double beta = 0.2;
    double theta = 0.7;
    int min_rounds = 5;
    double tau_x = 0.3;
    double p_floor = 0.3;
    double declared_p = -1.0; // -1 = auto: max(p*, p_floor)
    double initial_trust = 0.5;
    double quality_weight = 0.3; // trust EMA weight for TrustNoAudit
    std::string generator = "shapes16";
    std::size_t shard_size = 24;
    std::size_t eval_size = 64;
    std::size_t test_size = 128;
    ClassifierTrainConfig classifier;
    int local_epochs = 2;
    int flip_from = 0;
    int flip_to = 1;
    std::size_t krum_f = 0; // 0 = assume the configured adversary count (min 1)
    std::size_t assessor_count = 4;
};

struct TrustCampaignRound {
    int round = 0;
    double test_accuracy = 0.0;
    std::vector<double> trust; // per vehicle, index order
};

struct TrustCampaignResult {
    std::vector<TrustCampaignRound> rounds;
    double final_accuracy = 0.0;
    double declared_p = 0.0;
    EquilibriumPoint eq;
    int lazy_below_theta_round = -1; // first round after which every lazy
                                     // vehicle's trust < theta
    TrustLedger ledger;
    std::vector<std::string> vehicle_ids;
    std::vector<bool> untrustworthy;
};

/// Federated traffic-sign-style classification with untrustworthy vehicles
/// that both play lazy in the audit game and flip labels in their local
/// training. Aggregation follows the configured mechanism.
inline TrustCampaignResult run_trust_campaign(const TrustCampaignConfig& cfg) {
    cfg.pay.validate();
    RngStream dataset_rng(cfg.master_seed, "dataset");
    RngStream eval_rng(cfg.master_seed, "eval");
    RngStream test_rng(cfg.master_seed, "test");
    RngStream init_rng(cfg.master_seed, "init");
    RngStream audit_rng(cfg.master_seed, "audit");

    const SyntheticDataset train =
        make_dataset(cfg.generator, cfg.shard_size * cfg.vehicle_count, dataset_rng);
    const SyntheticDataset eval_set = make_dataset(cfg.generator, cfg.eval_size, eval_rng);
    const SyntheticDataset test_set = make_dataset(cfg.generator, cfg.test_size, test_rng);
    const auto class_count = static_cast<std::size_t>(train.class_count);

    TrustCampaignResult result;
    result.eq = equilibrium(cfg.pay);
    result.declared_p = cfg.declared_p >= 0.0 ? cfg.declared_p
                                              : std::max(result.eq.p_star, cfg.p_floor);

    const std::size_t lazy_count =
        static_cast<std::size_t>(std::floor(cfg.untrustworthy_fraction *
                                            static_cast<double>(cfg.vehicle_count)));

    std::vector<TrustRecord> records(cfg.vehicle_count);
    std::vector<StrategySpec> strategies(cfg.vehicle_count);
    std::vector<SyntheticDataset> shards;
    shards.reserve(cfg.vehicle_count);
    for (std::size_t v = 0; v < cfg.vehicle_count; ++v) {
        records[v].vehicle_id = "veh" + std::to_string(v);
        records[v].trust = cfg.initial_trust;
        result.vehicle_ids.push_back(records[v].vehicle_id);
        const bool lazy = v < lazy_count;
        result.untrustworthy.push_back(lazy);
        strategies[v].kind = lazy ? EvaluateeStrategy::AlwaysLazy : EvaluateeStrategy::Rational;

        SyntheticDataset shard = train.slice(v * cfg.shard_size, cfg.shard_size);
        if (lazy) {
            for (int& label : shard.labels) {
                if (label == cfg.flip_from) label = cfg.flip_to;
            }
        }
        shards.push_back(std::move(shard));
    }

    std::vector<std::string> assessors;
    for (std::size_t a = 0; a < cfg.assessor_count; ++a) {
        assessors.push_back("assessor" + std::to_string(a));
    }

    DenseNet global = make_classifier(train.image_dim(), class_count,
                                      cfg.classifier.hidden, init_rng);

    for (int round = 0; round < cfg.rounds; ++round) {
        if (cfg.mechanism == TrustMechanism::AuditTrust) {
            const std::vector<LedgerEvent> events =
                run_audit_round(round, assessors, records, strategies, result.declared_p,
                                cfg.pay, cfg.alpha, cfg.beta, audit_rng);
            // each assessor holds its own batch; merge through the same
            // consensus path the assessors would use
            std::vector<TrustLedger> batches(assessors.size());
            for (const LedgerEvent& e : events) {
                for (std::size_t a = 0; a < assessors.size(); ++a) {
                    if (assessors[a] == e.assessor_id) batches[a].append(e);
                }
            }
            const TrustLedger merged = sync_ledgers(batches);
            for (const LedgerEvent& e : merged.events()) result.ledger.append(e);
        }

        std::vector<GradientUpdate> updates;
        updates.reserve(cfg.vehicle_count);
        const Tensor base = global.params();
        for (std::size_t v = 0; v < cfg.vehicle_count; ++v) {
            RngStream client_rng(cfg.master_seed, "client/" + std::to_string(v) +
                                                      "/round/" + std::to_string(round));
            DenseNet local = global;
            train_classifier_inplace(local, shards[v].images, shards[v].labels, class_count,
                                     cfg.local_epochs, cfg.classifier.lr,
                                     cfg.classifier.batch, client_rng);
            const Tensor after = local.params();
            GradientUpdate u;
            u.client_id = records[v].vehicle_id;
            u.round = round;
            u.sample_count = shards[v].size();
            u.delta = Tensor::zeros({base.size()});
            for (std::size_t i = 0; i < base.size(); ++i) u.delta[i] = after[i] - base[i];
            updates.push_back(std::move(u));
        }

        if (cfg.mechanism == TrustMechanism::TrustNoAudit) {
            for (std::size_t v = 0; v < cfg.vehicle_count; ++v) {
                DenseNet candidate = global;
                Tensor p = base;
                for (std::size_t i = 0; i < p.size(); ++i) p[i] += updates[v].delta[i];
                candidate.set_params(p);
                const double quality =
                    classifier_accuracy(candidate, eval_set.images, eval_set.labels);
                records[v].trust = std::clamp((1.0 - cfg.quality_weight) * records[v].trust +
                                                  cfg.quality_weight * quality,
                                              0.0, 1.0);
            }
        }

        Tensor agg;
        switch (cfg.mechanism) {
        case TrustMechanism::AuditTrust:
        case TrustMechanism::TrustNoAudit: {
            std::map<std::string, double> trust;
            for (const TrustRecord& r : records) trust[r.vehicle_id] = r.trust;
            agg = trust_weighted_aggregate(updates, trust, cfg.tau_x);
            break;
        }
        case TrustMechanism::Krum: {
            const std::size_t f =
                cfg.krum_f > 0 ? cfg.krum_f : std::max<std::size_t>(lazy_count, 1);
            agg = krum(updates, f);
            break;
        }
        case TrustMechanism::None:
            agg = fedavg(updates);
            break;
        }

        Tensor p = base;
        for (std::size_t i = 0; i < p.size(); ++i) p[i] += agg[i];
        global.set_params(p);

        TrustCampaignRound rr;
        rr.round = round;
        rr.test_accuracy = classifier_accuracy(global, test_set.images, test_set.labels);
        for (const TrustRecord& r : records) rr.trust.push_back(r.trust);
        result.rounds.push_back(std::move(rr));

        if (result.lazy_below_theta_round < 0 && lazy_count > 0) {
            bool all_below = true;
            for (std::size_t v = 0; v < lazy_count; ++v) {
                if (records[v].trust >= cfg.theta) all_below = false;
            }
            if (all_below) result.lazy_below_theta_round = round;
        }
    }

    result.final_accuracy = result.rounds.empty() ? 0.0 : result.rounds.back().test_accuracy;
    return result;
}

} // namespace vnsemcom
