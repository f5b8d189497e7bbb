#pragma once

#include <cstdio>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vnsemcom/auditgame.hpp"
#include "vnsemcom/camouflage.hpp"
#include "vnsemcom/codec.hpp"
#include "vnsemcom/fedtrain.hpp"
#include "vnsemcom/report.hpp"
#include "vnsemcom/scenario.hpp"

namespace vnsemcom {

struct ExperimentOutput {
    std::string name; // output file stem
    std::vector<MetricRow> rows;
    std::string summary;
    std::string kept_csv;   // extra artifact for the robust federation run
    std::string ledger_txt; // extra artifact for the audit campaign
};

namespace detail {

inline std::string fmt(const char* pattern, double v) {
    char buf[96];
    std::snprintf(buf, sizeof(buf), pattern, v);
    return buf;
}

inline std::string snr_label(double snr_db) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "snr=%gdB", snr_db);
    return buf;
}

} // namespace detail

/// Trains the base codec and judge, runs camouflage training, and reports
/// legitimate fidelity, misleading rate, and the untrained-generator
/// control rate on held-out data.
inline ExperimentOutput run_camouflage_experiment(const Scenario& s) {
    const auto seed = static_cast<std::int64_t>(s.master_seed);
    RngStream dataset_rng(s.master_seed, "dataset");
    RngStream test_rng(s.master_seed, "test");
    RngStream codec_rng(s.master_seed, "codec");
    RngStream judge_rng(s.master_seed, "judge");
    RngStream camo_rng(s.master_seed, "camo");
    RngStream control_rng(s.master_seed, "control");
    RngStream eval_rng(s.master_seed, "eval");

    const SyntheticDataset train = make_dataset(s.codec.generator, s.codec.train_size,
                                                dataset_rng);
    const SyntheticDataset test = make_dataset(s.codec.generator, s.codec.test_size, test_rng);

    const SemanticCodec base = train_codec(train, codec_train_config(s), codec_rng);

    JudgeConfig jcfg;
    jcfg.epochs = s.camouflage.judge_epochs;
    jcfg.lr = s.camouflage.judge_lr;
    jcfg.hidden = s.camouflage.judge_hidden;
    jcfg.accuracy_floor = s.camouflage.judge_accuracy_floor;
    const JudgeClassifier judge = train_judge(train, jcfg, judge_rng);

    const CamoPolicy policy = CamoPolicy::next_class(train.class_count);
    CamoTrainConfig ccfg;
    ccfg.epochs = s.camouflage.epochs;
    ccfg.lr = s.camouflage.lr;
    ccfg.batch = s.camouflage.batch;
    ccfg.lambda = s.camouflage.lambda;
    ccfg.epsilon = s.camouflage.epsilon;
    ccfg.gen_hidden = s.camouflage.gen_hidden;
    const CamouflagePipeline pipe = train_camouflage(base, train, policy, s.legit_channel,
                                                     s.eaves_channel, ccfg, camo_rng);

    const CamouflagePipeline control = make_untrained_pipeline(
        base, policy, s.legit_channel, s.eaves_channel, 0.0, s.camouflage.gen_hidden,
        control_rng);

    const int trials = s.camouflage.trials_per_image;
    const FidelityReport fidelity = legitimate_fidelity(pipe, judge, test, trials, eval_rng);
    const double misleading = misleading_rate(pipe, judge, test, trials, eval_rng);
    const double control_rate = misleading_rate(control, judge, test, trials, eval_rng);

    ExperimentOutput out;
    out.name = "camouflage";
    out.rows = {
        {"camouflage", "trained", -1, "legit_ssim", fidelity.mean_ssim, seed},
        {"camouflage", "trained", -1, "legit_accuracy", fidelity.accuracy, seed},
        {"camouflage", "trained", -1, "misleading_rate", misleading, seed},
        {"camouflage", "control", -1, "control_misleading_rate", control_rate, seed},
        {"camouflage", "trained", -1, "train_loss/legit", pipe.final_legit_loss, seed},
        {"camouflage", "trained", -1, "train_loss/eaves", pipe.final_eaves_loss, seed},
    };
    out.summary = "camouflage: legit_accuracy=" + detail::fmt("%.3f", fidelity.accuracy) +
                  " legit_ssim=" + detail::fmt("%.3f", fidelity.mean_ssim) +
                  " misleading_rate=" + detail::fmt("%.3f", misleading) +
                  " control_rate=" + detail::fmt("%.3f", control_rate);
    return out;
}

/// One federated training run under the configured attack and mechanism.
inline ExperimentOutput run_fedtrain_experiment(const Scenario& s) {
    static const std::set<std::string> allowed{"fedavg", "krum", "robust", "none"};
    if (!allowed.contains(s.federation.mechanism)) {
        throw ConfigError("/federation/mechanism: run-fedtrain supports fedavg, krum, "
                          "robust, none; got " + s.federation.mechanism);
    }
    const auto seed = static_cast<std::int64_t>(s.master_seed);
    const FederationConfig cfg = federation_config(s);
    const FederationResult result = run_federation(cfg);

    char cond[96];
    std::snprintf(cond, sizeof(cond), "mech=%s;attack=%s;frac=%.2f",
                  s.federation.mechanism.c_str(), to_string(s.attack.kind).c_str(),
                  s.attack.fraction);

    ExperimentOutput out;
    out.name = "fedtrain";
    std::string kept_csv = "round,client_id,kept,mean_score\n";
    for (const FederationRound& r : result.rounds) {
        out.rows.push_back({"fedtrain", cond, r.round, "eval_ssim", r.eval_ssim, seed});
        for (std::size_t c = 0; c < r.per_class_ssim.size(); ++c) {
            out.rows.push_back({"fedtrain", cond, r.round,
                                "per_class_ssim/class" + std::to_string(c),
                                r.per_class_ssim[c], seed});
        }
        if (!r.scores.empty()) {
            out.rows.push_back({"fedtrain", cond, r.round, "kept_count",
                                static_cast<double>(r.kept.size()), seed});
            for (const ScoreVector& sv : r.scores) {
                const bool kept = std::find(r.kept.begin(), r.kept.end(), sv.client_id) !=
                                  r.kept.end();
                kept_csv += std::to_string(r.round) + "," + sv.client_id + "," +
                            (kept ? "1" : "0") + "," +
                            format_metric_value(sv.mean_score) + "\n";
            }
        }
    }
    out.rows.push_back({"fedtrain", cond, -1, "final_ssim", result.final_ssim, seed});
    if (cfg.mechanism == AggregationMechanism::Robust) out.kept_csv = kept_csv;
    out.summary = std::string("fedtrain: ") + cond +
                  " final_ssim=" + detail::fmt("%.3f", result.final_ssim);
    return out;
}

/// One trust-management campaign under the configured mechanism.
inline ExperimentOutput run_auditgame_experiment(const Scenario& s) {
    static const std::set<std::string> allowed{"audit_trust", "trust_no_audit", "krum",
                                               "none"};
    if (!allowed.contains(s.federation.mechanism)) {
        throw ConfigError("/federation/mechanism: run-auditgame supports audit_trust, "
                          "trust_no_audit, krum, none; got " + s.federation.mechanism);
    }
    const auto seed = static_cast<std::int64_t>(s.master_seed);
    const TrustCampaignConfig cfg = trust_campaign_config(s);
    const TrustCampaignResult result = run_trust_campaign(cfg);

    char cond[96];
    std::snprintf(cond, sizeof(cond), "mech=%s;untrustworthy=%.2f",
                  s.federation.mechanism.c_str(), s.attack.fraction);

    ExperimentOutput out;
    out.name = "auditgame";
    for (const TrustCampaignRound& r : result.rounds) {
        out.rows.push_back({"auditgame", cond, r.round, "accuracy", r.test_accuracy, seed});
        for (std::size_t v = 0; v < r.trust.size(); ++v) {
            out.rows.push_back({"auditgame", cond, r.round,
                                "trust/" + result.vehicle_ids[v], r.trust[v], seed});
        }
    }
    out.rows.push_back({"auditgame", cond, -1, "final_accuracy", result.final_accuracy, seed});
    out.rows.push_back({"auditgame", cond, -1, "p_star", result.eq.p_star, seed});
    out.rows.push_back({"auditgame", cond, -1, "q_star", result.eq.q_star, seed});
    out.rows.push_back({"auditgame", cond, -1, "lazy_below_theta_round",
                        static_cast<double>(result.lazy_below_theta_round), seed});
    if (cfg.mechanism == TrustMechanism::AuditTrust) {
        out.ledger_txt = result.ledger.export_text();
    }
    out.summary = std::string("auditgame: ") + cond +
                  " final_accuracy=" + detail::fmt("%.3f", result.final_accuracy) +
                  " declared_p=" + detail::fmt("%.3f", result.declared_p);
    return out;
}

/// End-to-end SSIM across the configured SNR grid on a freshly trained
/// codec, one independent channel stream per grid point.
inline ExperimentOutput run_snr_sweep(const Scenario& s) {
    const auto seed = static_cast<std::int64_t>(s.master_seed);
    RngStream dataset_rng(s.master_seed, "dataset");
    RngStream test_rng(s.master_seed, "test");
    RngStream codec_rng(s.master_seed, "codec");

    const SyntheticDataset train = make_dataset(s.codec.generator, s.codec.train_size,
                                                dataset_rng);
    const SyntheticDataset test = make_dataset(s.codec.generator, s.codec.test_size, test_rng);
    const SemanticCodec codec = train_codec(train, codec_train_config(s), codec_rng);

    ExperimentOutput out;
    out.name = "sweep_snr";
    out.summary = "sweep_snr:";
    for (double snr : s.sweep.snr_grid) {
        ChannelParams ch;
        ch.kind = fading_kind_from_string(s.sweep.channel);
        ch.k_factor = s.sweep.k_factor;
        ch.snr_db = snr;
        RngStream chan_rng(s.master_seed, "channel/" + detail::snr_label(snr));
        const double value = end_to_end_ssim(codec, ch, test, chan_rng);
        out.rows.push_back({"sweep_snr", detail::snr_label(snr), -1, "ssim", value, seed});
        out.summary += " " + detail::snr_label(snr) + ":" + detail::fmt("%.3f", value);
    }
    return out;
}

/// Byte accounting of semantic vs raw transmission for the configured
/// codec dimensions and frame count.
inline ExperimentOutput run_overhead(const Scenario& s) {
    const auto seed = static_cast<std::int64_t>(s.master_seed);
    RngStream init_rng(s.master_seed, "init");
    const SemanticCodec codec = make_codec(s.codec.image_side, codec_train_config(s),
                                           init_rng);
    const OverheadReport r = overhead_ratio(codec, s.overhead.frames);

    char cond[48];
    std::snprintf(cond, sizeof(cond), "frames=%llu",
                  static_cast<unsigned long long>(s.overhead.frames));
    ExperimentOutput out;
    out.name = "overhead";
    out.rows = {
        {"overhead", cond, -1, "raw_bytes", static_cast<double>(r.raw_bytes), seed},
        {"overhead", cond, -1, "semantic_bytes", static_cast<double>(r.semantic_bytes), seed},
        {"overhead", cond, -1, "overhead_ratio", r.ratio, seed},
    };
    out.summary = std::string("overhead: ") + cond +
                  " ratio=" + detail::fmt("%.2f", r.ratio) + "x";
    return out;
}

inline ExperimentOutput run_experiment(std::string_view subcommand, const Scenario& s) {
    if (subcommand == "run-camouflage") return run_camouflage_experiment(s);
    if (subcommand == "run-fedtrain") return run_fedtrain_experiment(s);
    if (subcommand == "run-auditgame") return run_auditgame_experiment(s);
    if (subcommand == "sweep-snr") return run_snr_sweep(s);
    if (subcommand == "overhead") return run_overhead(s);
    throw ConfigError("unknown subcommand: " + std::string(subcommand));
}

/// Execute a subcommand and write its CSV/JSON rows (and extra artifacts)
/// under out_dir. Returns the one-line summary for stdout.
inline std::string run_subcommand(std::string_view subcommand, const Scenario& s,
                                  const std::filesystem::path& out_dir) {
    ExperimentOutput out = run_experiment(subcommand, s);
    std::filesystem::create_directories(out_dir);
    emit_csv(out.rows, out_dir / (out.name + ".csv"));
    emit_json(out.rows, out_dir / (out.name + ".json"));
    if (!out.kept_csv.empty()) {
        atomic_write_text(out_dir / (out.name + "_kept_clients.csv"), out.kept_csv);
    }
    if (!out.ledger_txt.empty()) {
        atomic_write_text(out_dir / (out.name + "_ledger.txt"), out.ledger_txt);
    }
    return out.summary;
}

} // namespace vnsemcom
