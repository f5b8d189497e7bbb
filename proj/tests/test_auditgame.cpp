#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "vnsemcom/auditgame.hpp"

using namespace vnsemcom;

namespace {

AuditPayoffs interior_payoffs() {
    // p* = (1-0)/4 = 0.25, q* = 1 - 0.2/1 = 0.8
    AuditPayoffs p;
    p.c_high = 1.0;
    p.c_low = 0.0;
    p.g = 3.0;
    p.f = 1.0;
    p.c_audit = 0.2;
    p.loss_l = 1.0;
    return p;
}

GradientUpdate make_update(const char* id, std::vector<double> delta) {
    GradientUpdate u;
    u.client_id = id;
    u.delta = Tensor::from({delta.size()}, std::move(delta));
    return u;
}

LedgerEvent event(int round, const char* veh, const char* assessor, AuditOutcome o,
                  double trust) {
    return LedgerEvent{round, veh, assessor, o, trust};
}

AuditPayoffs random_valid_payoffs(RngStream& rng) {
    AuditPayoffs p;
    p.c_high = rng.uniform(0.2, 3.0);
    p.c_low = rng.uniform(0.0, p.c_high);
    p.g = rng.uniform(0.1, 3.0);
    p.f = rng.uniform(0.1, 3.0);
    p.c_audit = rng.uniform(0.05, 2.0);
    p.loss_l = rng.uniform(0.1, 2.0);
    return p;
}

} // namespace

TEST(Equilibrium, InteriorPinnedValues) {
    const EquilibriumPoint eq = equilibrium(interior_payoffs());
    EXPECT_EQ(eq.regime, Regime::Interior);
    EXPECT_DOUBLE_EQ(eq.p_star, 0.25);
    EXPECT_DOUBLE_EQ(eq.q_star, 0.8);
}

TEST(Equilibrium, EqualCostsGiveAlwaysHonestCorner) {
    AuditPayoffs p = interior_payoffs();
    p.c_low = p.c_high;
    const EquilibriumPoint eq = equilibrium(p);
    EXPECT_EQ(eq.regime, Regime::CornerAlwaysHonest);
    EXPECT_DOUBLE_EQ(eq.p_star, 0.0);
    EXPECT_DOUBLE_EQ(eq.q_star, 1.0);
}

TEST(Equilibrium, ExpensiveAuditGivesNeverAuditCorner) {
    AuditPayoffs p = interior_payoffs();
    p.c_audit = 2.0;
    p.loss_l = 1.0;
    const EquilibriumPoint eq = equilibrium(p);
    EXPECT_EQ(eq.regime, Regime::CornerNeverAudit);
    EXPECT_DOUBLE_EQ(eq.p_star, 0.0);
    EXPECT_DOUBLE_EQ(eq.q_star, 0.0);
}

TEST(Equilibrium, HugeCostGapGivesNeverHonestCorner) {
    AuditPayoffs p = interior_payoffs();
    p.c_high = 10.0;
    p.c_low = 0.0;
    p.g = 3.0;
    p.f = 1.0; // gap 10 > g+f = 4
    const EquilibriumPoint eq = equilibrium(p);
    EXPECT_EQ(eq.regime, Regime::CornerNeverHonest);
    EXPECT_DOUBLE_EQ(eq.p_star, 1.0);
    EXPECT_DOUBLE_EQ(eq.q_star, 0.0);
}

TEST(Equilibrium, InvalidPayoffsRejected) {
    AuditPayoffs p = interior_payoffs();
    p.g = 0.0;
    EXPECT_THROW(equilibrium(p), ConfigError);
    p = interior_payoffs();
    p.c_low = p.c_high + 1.0;
    EXPECT_THROW(equilibrium(p), ConfigError);
}

TEST(BestResponseOracle, PassesAtInteriorEquilibrium) {
    const AuditPayoffs p = interior_payoffs();
    const EquilibriumPoint eq = equilibrium(p);
    const BestResponseVerdict v = best_response_oracle(p, eq.p_star, eq.q_star);
    EXPECT_TRUE(v.pass) << "gains " << v.max_gain_evaluatee << " " << v.max_gain_assessor;
}

TEST(BestResponseOracle, FailsOffEquilibrium) {
    const AuditPayoffs p = interior_payoffs();
    const EquilibriumPoint eq = equilibrium(p);
    const BestResponseVerdict v = best_response_oracle(p, eq.p_star + 0.1, eq.q_star);
    EXPECT_FALSE(v.pass);
}

TEST(BestResponseOracle, CornerAlwaysHonestEvaluateePrefersHonestEverywhere) {
    AuditPayoffs p = interior_payoffs();
    p.c_low = p.c_high;
    for (double declared = 0.0; declared <= 1.0; declared += 0.1) {
        EXPECT_GE(evaluatee_utility(p, true, declared),
                  evaluatee_utility(p, false, declared));
    }
    const EquilibriumPoint eq = equilibrium(p);
    EXPECT_TRUE(best_response_oracle(p, eq.p_star, eq.q_star).pass);
}

TEST(BestResponseOracle, FiftyRandomInstancesIncludingCorners) {
    RngStream rng(404, "payoffs");
    int corners_never_audit = 0, corners_always_honest = 0, interiors = 0;
    for (int trial = 0; trial < 50; ++trial) {
        AuditPayoffs p = random_valid_payoffs(rng);
        if (trial % 10 == 8) p.c_low = p.c_high;                  // force always-honest
        if (trial % 10 == 9) p.c_audit = p.loss_l + 0.5;          // force never-audit
        const EquilibriumPoint eq = equilibrium(p);
        switch (eq.regime) {
        case Regime::CornerAlwaysHonest: ++corners_always_honest; break;
        case Regime::CornerNeverAudit: ++corners_never_audit; break;
        case Regime::Interior: ++interiors; break;
        default: break;
        }
        const BestResponseVerdict v = best_response_oracle(p, eq.p_star, eq.q_star);
        ASSERT_TRUE(v.pass) << "trial " << trial << " regime " << to_string(eq.regime)
                            << " gains " << v.max_gain_evaluatee << " "
                            << v.max_gain_assessor;
    }
    EXPECT_GT(corners_always_honest, 0);
    EXPECT_GT(corners_never_audit, 0);
    EXPECT_GT(interiors, 0);
}

TEST(BestResponseOracle, CoarseGridRejected) {
    const AuditPayoffs p = interior_payoffs();
    EXPECT_THROW(best_response_oracle(p, 0.25, 0.8, 0.01), ConfigError);
}

TEST(EvaluateeDecide, RationalAtFullAuditWithPinnedUtilities) {
    // p=1: honest -1+3 = 2 beats lazy 0-1 = -1
    const AuditPayoffs p = interior_payoffs();
    RngStream rng(1, "decide");
    EXPECT_EQ(evaluatee_decide({EvaluateeStrategy::Rational}, 1.0, p, rng),
              TaskQuality::Honest);
    EXPECT_DOUBLE_EQ(evaluatee_utility(p, true, 1.0), 2.0);
    EXPECT_DOUBLE_EQ(evaluatee_utility(p, false, 1.0), -1.0);
}

TEST(EvaluateeDecide, RationalWithoutAuditMinimizesCost) {
    const AuditPayoffs p = interior_payoffs();
    RngStream rng(2, "decide");
    EXPECT_EQ(evaluatee_decide({EvaluateeStrategy::Rational}, 0.0, p, rng),
              TaskQuality::Lazy);
}

TEST(EvaluateeDecide, FixedStrategiesIgnorePayoffs) {
    const AuditPayoffs p = interior_payoffs();
    RngStream rng(3, "decide");
    EXPECT_EQ(evaluatee_decide({EvaluateeStrategy::AlwaysLazy}, 1.0, p, rng),
              TaskQuality::Lazy);
    EXPECT_EQ(evaluatee_decide({EvaluateeStrategy::AlwaysHonest}, 0.0, p, rng),
              TaskQuality::Honest);
}

TEST(EvaluateeDecide, DeterrenceHoldsExactlyAtPStar) {
    const AuditPayoffs p = interior_payoffs();
    const EquilibriumPoint eq = equilibrium(p);
    RngStream rng(4, "decide");
    for (double offset = -0.05; offset <= 0.0501; offset += 0.01) {
        const double declared = std::clamp(eq.p_star + offset, 0.0, 1.0);
        const TaskQuality q = evaluatee_decide({EvaluateeStrategy::Rational}, declared, p, rng);
        if (declared >= eq.p_star) {
            EXPECT_EQ(q, TaskQuality::Honest) << "declared " << declared;
        } else {
            EXPECT_EQ(q, TaskQuality::Lazy) << "declared " << declared;
        }
    }
}

TEST(AuditRound, ZeroAuditProbabilityLeavesTrustUnchanged) {
    const AuditPayoffs pay = interior_payoffs();
    std::vector<TrustRecord> records(3);
    std::vector<StrategySpec> strategies(3, {EvaluateeStrategy::AlwaysLazy});
    for (int i = 0; i < 3; ++i) {
        records[static_cast<std::size_t>(i)].vehicle_id = "veh" + std::to_string(i);
        records[static_cast<std::size_t>(i)].trust = 0.5;
    }
    const std::vector<std::string> assessors{"a0", "a1"};
    RngStream rng(5, "audit");
    const auto events =
        run_audit_round(0, assessors, records, strategies, 0.0, pay, 0.1, 0.2, rng);
    ASSERT_EQ(events.size(), 3u);
    for (const auto& e : events) {
        EXPECT_EQ(e.outcome, AuditOutcome::NotAudited);
        EXPECT_DOUBLE_EQ(e.trust_after, 0.5);
    }
    for (const auto& r : records) {
        EXPECT_DOUBLE_EQ(r.trust, 0.5);
        EXPECT_EQ(r.rounds_evaluated, 1);
    }
}

TEST(AuditRound, TrustArithmeticAndClamping) {
    const AuditPayoffs pay = interior_payoffs();
    std::vector<TrustRecord> records(2);
    records[0] = {"honest", 0.5, 0, TrustRecord::Role::Evaluatee};
    records[1] = {"lazy", 0.05, 0, TrustRecord::Role::Evaluatee};
    const std::vector<StrategySpec> strategies{{EvaluateeStrategy::AlwaysHonest},
                                               {EvaluateeStrategy::AlwaysLazy}};
    const std::vector<std::string> assessors{"a0"};
    RngStream rng(6, "audit");
    run_audit_round(0, assessors, records, strategies, 1.0, pay, 0.1, 0.1, rng);
    EXPECT_DOUBLE_EQ(records[0].trust, 0.6);
    EXPECT_DOUBLE_EQ(records[1].trust, 0.0); // clamped at zero
}

TEST(AuditRound, TrustStaysInUnitIntervalUnderLongRandomPlay) {
    const AuditPayoffs pay = interior_payoffs();
    std::vector<TrustRecord> records(4);
    std::vector<StrategySpec> strategies;
    for (int i = 0; i < 4; ++i) {
        records[static_cast<std::size_t>(i)].vehicle_id = "veh" + std::to_string(i);
        strategies.push_back({EvaluateeStrategy::Mixed, 0.5});
    }
    const std::vector<std::string> assessors{"a0", "a1"};
    RngStream rng(7, "audit");
    for (int round = 0; round < 200; ++round) {
        run_audit_round(round, assessors, records, strategies, 0.7, pay, 0.3, 0.4, rng);
        for (const auto& r : records) {
            ASSERT_GE(r.trust, 0.0);
            ASSERT_LE(r.trust, 1.0);
        }
    }
}

TEST(Ledger, DisjointEventsMergeToSameDigest) {
    TrustLedger a, b;
    a.append(event(0, "veh0", "a0", AuditOutcome::AuditedHonest, 0.6));
    a.append(event(0, "veh2", "a0", AuditOutcome::NotAudited, 0.5));
    b.append(event(0, "veh1", "a1", AuditOutcome::AuditedLazy, 0.3));
    b.append(event(0, "veh3", "a1", AuditOutcome::NotAudited, 0.5));

    const TrustLedger merged_ab = sync_ledgers(std::vector<TrustLedger>{a, b});
    const TrustLedger merged_ba = sync_ledgers(std::vector<TrustLedger>{b, a});
    EXPECT_EQ(merged_ab.events().size(), 4u);
    EXPECT_EQ(merged_ab.digest(), merged_ba.digest());
}

TEST(Ledger, DuplicateDeliveryDeduplicated) {
    TrustLedger a, b;
    const LedgerEvent e = event(1, "veh0", "a0", AuditOutcome::AuditedHonest, 0.7);
    a.append(e);
    b.append(e);
    const TrustLedger merged = sync_ledgers(std::vector<TrustLedger>{a, b});
    EXPECT_EQ(merged.events().size(), 1u);
}

TEST(Ledger, EquivocationDetectedAndNamed) {
    TrustLedger a, b;
    a.append(event(1, "veh0", "a3", AuditOutcome::AuditedHonest, 0.7));
    b.append(event(1, "veh0", "a3", AuditOutcome::AuditedLazy, 0.3));
    try {
        sync_ledgers(std::vector<TrustLedger>{a, b});
        FAIL() << "expected EquivocationError";
    } catch (const EquivocationError& e) {
        EXPECT_NE(std::string(e.what()).find("a3"), std::string::npos);
    }
}

TEST(Ledger, AllArrivalPermutationsOfFourEventsAgree) {
    std::vector<LedgerEvent> events{
        event(0, "veh0", "a0", AuditOutcome::AuditedHonest, 0.6),
        event(0, "veh1", "a1", AuditOutcome::AuditedLazy, 0.3),
        event(1, "veh0", "a1", AuditOutcome::NotAudited, 0.6),
        event(1, "veh1", "a0", AuditOutcome::AuditedHonest, 0.4),
    };
    std::vector<std::size_t> order{0, 1, 2, 3};
    std::uint64_t reference = 0;
    bool first = true;
    do {
        std::vector<TrustLedger> replicas(2);
        for (std::size_t k = 0; k < order.size(); ++k) {
            replicas[k % 2].append(events[order[k]]);
        }
        const std::uint64_t digest = sync_ledgers(replicas).digest();
        if (first) {
            reference = digest;
            first = false;
        }
        ASSERT_EQ(digest, reference);
    } while (std::next_permutation(order.begin(), order.end()));
}

TEST(Ledger, HundredRandomLargerShufflesAgree) {
    RngStream gen(8, "ledger");
    std::vector<LedgerEvent> events;
    for (int round = 0; round < 5; ++round) {
        for (int v = 0; v < 6; ++v) {
            const auto outcome = static_cast<AuditOutcome>(gen.index(3));
            events.push_back(event(round, ("veh" + std::to_string(v)).c_str(),
                                   ("a" + std::to_string(v % 4)).c_str(), outcome,
                                   0.1 * static_cast<double>(gen.index(11))));
        }
    }
    std::uint64_t reference = 0;
    for (int shuffle = 0; shuffle < 100; ++shuffle) {
        std::vector<std::size_t> order(events.size());
        std::iota(order.begin(), order.end(), 0);
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[gen.index(i)]);
        }
        std::vector<TrustLedger> replicas(4);
        for (std::size_t k = 0; k < order.size(); ++k) {
            replicas[gen.index(4)].append(events[order[k]]);
        }
        const std::uint64_t digest = sync_ledgers(replicas).digest();
        if (shuffle == 0) {
            reference = digest;
        } else {
            ASSERT_EQ(digest, reference);
        }
    }
}

TEST(Ledger, ExportEndsWithDigestLine) {
    TrustLedger l;
    l.append(event(0, "veh0", "a0", AuditOutcome::AuditedHonest, 0.6));
    const std::string text = l.export_text();
    EXPECT_NE(text.find("0,veh0,a0,H,0.600000\n"), std::string::npos);
    EXPECT_NE(text.find("digest,"), std::string::npos);
}

TEST(Promote, RuleArithmetic) {
    TrustRecord r{"veh0", 0.9, 5, TrustRecord::Role::Evaluatee};
    EXPECT_EQ(promote(r, 0.7, 5).role, TrustRecord::Role::Assessor);

    r.rounds_evaluated = 4;
    EXPECT_EQ(promote(r, 0.7, 5).role, TrustRecord::Role::Evaluatee);

    r.rounds_evaluated = 5;
    r.trust = 0.7; // strict inequality required
    EXPECT_EQ(promote(r, 0.7, 5).role, TrustRecord::Role::Evaluatee);
}

TEST(Promote, AssessorInputRejected) {
    const TrustRecord r{"veh0", 0.9, 5, TrustRecord::Role::Assessor};
    EXPECT_THROW(promote(r, 0.7, 5), ConfigError);
}

TEST(TrustWeightedAggregate, EqualTrustMatchesFedavg) {
    const std::vector<GradientUpdate> updates{make_update("a", {1.0, 2.0}),
                                              make_update("b", {3.0, 4.0})};
    const std::map<std::string, double> trust{{"a", 0.8}, {"b", 0.8}};
    const Tensor out = trust_weighted_aggregate(updates, trust, 0.1);
    const Tensor avg = fedavg(updates);
    for (std::size_t i = 0; i < out.size(); ++i) ASSERT_NEAR(out[i], avg[i], 1e-12);
}

TEST(TrustWeightedAggregate, ExclusionAndNormalizationPinned) {
    const std::vector<GradientUpdate> updates{make_update("a", {1.0}),
                                              make_update("b", {1.0}),
                                              make_update("c", {100.0})};
    const std::map<std::string, double> trust{{"a", 0.8}, {"b", 0.2}, {"c", 0.0}};
    const Tensor out = trust_weighted_aggregate(updates, trust, 0.1);
    EXPECT_DOUBLE_EQ(out[0], 1.0); // 0.8 + 0.2 over first two only
}

TEST(TrustWeightedAggregate, MatchesNaiveWeightedSumOnRandomInstances) {
    RngStream rng(9, "twa");
    for (int trial = 0; trial < 25; ++trial) {
        std::vector<GradientUpdate> updates;
        std::map<std::string, double> trust;
        std::vector<double> t(3);
        for (int c = 0; c < 3; ++c) {
            GradientUpdate u;
            u.client_id = "c" + std::to_string(c);
            u.delta = rng_draw(rng, Dist::StandardNormal, 4);
            updates.push_back(std::move(u));
            t[static_cast<std::size_t>(c)] = rng.uniform(0.4, 1.0);
            trust["c" + std::to_string(c)] = t[static_cast<std::size_t>(c)];
        }
        const Tensor out = trust_weighted_aggregate(updates, trust, 0.3);
        const double total = t[0] + t[1] + t[2];
        for (std::size_t k = 0; k < 4; ++k) {
            const double expected = (t[0] * updates[0].delta[k] + t[1] * updates[1].delta[k] +
                                     t[2] * updates[2].delta[k]) /
                                    total;
            ASSERT_NEAR(out[k], expected, 1e-12);
        }
    }
}

TEST(TrustWeightedAggregate, AllExcludedRaisesQuorumError) {
    const std::vector<GradientUpdate> updates{make_update("a", {1.0})};
    const std::map<std::string, double> trust{{"a", 0.1}};
    EXPECT_THROW(trust_weighted_aggregate(updates, trust, 0.3), QuorumError);
}

TEST(TrustWeightedAggregate, MissingRecordRejected) {
    const std::vector<GradientUpdate> updates{make_update("a", {1.0})};
    EXPECT_THROW(trust_weighted_aggregate(updates, {}, 0.3), ConfigError);
}

TEST(Campaign, LazyTrustFallsAndStaysBoundedUnderAuditTrust) {
    TrustCampaignConfig cfg;
    cfg.untrustworthy_fraction = 0.3;
    cfg.rounds = 10;
    cfg.mechanism = TrustMechanism::AuditTrust;
    const TrustCampaignResult r = run_trust_campaign(cfg);
    ASSERT_EQ(r.rounds.size(), 10u);
    EXPECT_GE(r.declared_p, 0.3);
    EXPECT_GE(r.lazy_below_theta_round, 0);
    EXPECT_LE(r.lazy_below_theta_round, 9);
    // audits bite: by round 10 the lazy vehicles sit below their start
    const auto& last = r.rounds.back();
    for (std::size_t v = 0; v < 3; ++v) {
        EXPECT_LT(last.trust[v], 0.5);
    }
    for (double t : last.trust) {
        EXPECT_GE(t, 0.0);
        EXPECT_LE(t, 1.0);
    }
}

TEST(Campaign, DeterministicForFixedSeed) {
    TrustCampaignConfig cfg;
    cfg.untrustworthy_fraction = 0.2;
    cfg.rounds = 4;
    const TrustCampaignResult a = run_trust_campaign(cfg);
    const TrustCampaignResult b = run_trust_campaign(cfg);
    ASSERT_EQ(a.rounds.size(), b.rounds.size());
    for (std::size_t i = 0; i < a.rounds.size(); ++i) {
        ASSERT_DOUBLE_EQ(a.rounds[i].test_accuracy, b.rounds[i].test_accuracy);
        ASSERT_EQ(a.rounds[i].trust, b.rounds[i].trust);
    }
    EXPECT_EQ(a.ledger.digest(), b.ledger.digest());
}
