#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "vnsemcom/auditgame.hpp"
#include "vnsemcom/camouflage.hpp"
#include "vnsemcom/channel.hpp"
#include "vnsemcom/codec.hpp"
#include "vnsemcom/errors.hpp"
#include "vnsemcom/fedtrain.hpp"

namespace vnsemcom {

/// Full experiment description. Every field has a documented default;
/// parsing is strict, so unknown or misspelled keys fail with the JSON
/// path in the message.
struct Scenario {
    std::uint64_t master_seed = 7;
    std::size_t vehicle_count = 10;
    AttackSpec attack;
    ChannelParams legit_channel{FadingKind::Rician, 4.0, 15.0};
    ChannelParams eaves_channel{FadingKind::Rayleigh, 0.0, 5.0};

    struct Codec {
        std::string generator = "shapes16";
        int image_side = 16;
        std::size_t latent_dim = 16;
        std::size_t hidden = 64;
        int epochs = 40;
        double lr = 2.0;
        std::size_t batch = 16;
        double latent_noise = 0.35;
        std::size_t train_size = 256;
        std::size_t eval_size = 128;
        std::size_t test_size = 128;
    } codec;

    struct Camouflage {
        double epsilon = 0.0; // <= 0 selects the latent-std default
        double lambda = 1.0;
        std::string policy = "next_class";
        int epochs = 60;
        double lr = 0.5;
        std::size_t batch = 16;
        std::size_t gen_hidden = 48;
        int trials_per_image = 5;
        int judge_epochs = 30;
        double judge_lr = 1.0;
        std::size_t judge_hidden = 32;
        double judge_accuracy_floor = 0.9;
    } camouflage;

    struct Federation {
        int rounds = 20;
        std::string mechanism = "robust";
        std::size_t shard_size = 32;
        int local_epochs = 1;
        double local_lr = 2.0;
        std::size_t local_batch = 16;
        std::size_t krum_f = 0; // 0 = assume configured adversary count
        double tau_sep = kDefaultTauSep;
    } federation;

    struct Game {
        AuditPayoffs payoffs;
        double alpha = 0.1;
        double beta = 0.2;
        double theta = 0.7;
        int min_rounds = 5;
        double tau_x = 0.3;
        double p_floor = 0.3;
        double declared_p = -1.0; // -1 = max(p_star, p_floor)
        int rounds = 15;
        std::size_t assessor_count = 4;
        double quality_weight = 0.3;
        std::size_t classifier_hidden = 32;
        double classifier_lr = 1.0;
        std::size_t classifier_batch = 16;
        int local_epochs = 2;
        std::size_t shard_size = 24;
        std::size_t eval_size = 64;
    } game;

    struct Sweep {
        std::vector<double> snr_grid{20.0, 15.0, 10.0, 5.0, 0.0};
        std::string channel = "awgn_only";
        double k_factor = 4.0;
    } sweep;

    struct Overhead {
        std::uint64_t frames = 10000;
    } overhead;

    struct Output {
        std::string dir;
    } output;
};

namespace detail {

using json = nlohmann::ordered_json;

class StrictObject {
public:
    StrictObject(json node, std::string path)
        : node_(std::move(node)), path_(std::move(path)) {
        if (!node_.is_object()) throw ConfigError(path_ + ": expected an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    template <typename T>
    void get(const std::string& key, T& out) {
        seen_.insert(key);
        if (!node_.contains(key)) return;
        const json& v = node_.at(key);
        try {
            out = v.get<T>();
        } catch (const json::exception&) {
            throw ConfigError(path_ + "/" + key + ": wrong type");
        }
    }

    void get_size(const std::string& key, std::size_t& out, std::size_t min_value = 0) {
        seen_.insert(key);
        if (!node_.contains(key)) return;
        const json& v = node_.at(key);
        if (!v.is_number_integer() && !v.is_number_unsigned()) {
            throw ConfigError(path_ + "/" + key + ": expected a non-negative integer");
        }
        const auto raw = v.get<std::int64_t>();
        if (raw < 0 || static_cast<std::size_t>(raw) < min_value) {
            throw ConfigError(path_ + "/" + key + ": must be >= " + std::to_string(min_value));
        }
        out = static_cast<std::size_t>(raw);
    }

    json child(const std::string& key) {
        seen_.insert(key);
        return node_.contains(key) ? node_.at(key) : json::object();
    }

    bool has_child(const std::string& key) const { return node_.contains(key); }

    const std::string& path() const { return path_; }

    void finish() const {
        for (const auto& [key, value] : node_.items()) {
            if (!seen_.contains(key)) {
                throw ConfigError(path_ + "/" + key + ": unknown key");
            }
        }
    }

private:
    json node_;
    std::string path_;
    std::set<std::string> seen_;
};

inline ChannelParams parse_channel(const json& node, const std::string& path,
                                   ChannelParams defaults) {
    StrictObject o(node, path);
    std::string kind = to_string(defaults.kind);
    o.get("kind", kind);
    defaults.kind = fading_kind_from_string(kind);
    o.get("k_factor", defaults.k_factor);
    o.get("snr_db", defaults.snr_db);
    o.finish();
    if (defaults.k_factor < 0.0) throw ConfigError(path + "/k_factor: must be >= 0");
    return defaults;
}

inline json channel_json(const ChannelParams& p) {
    return json{{"kind", to_string(p.kind)}, {"k_factor", p.k_factor}, {"snr_db", p.snr_db}};
}

} // namespace detail

inline Scenario parse_scenario_json(const detail::json& root) {
    Scenario s;
    detail::StrictObject top(root, "");

    {
        std::int64_t seed = static_cast<std::int64_t>(s.master_seed);
        top.get("master_seed", seed);
        if (seed < 0) throw ConfigError("/master_seed: must be >= 0");
        s.master_seed = static_cast<std::uint64_t>(seed);
    }
    top.get_size("vehicle_count", s.vehicle_count, 1);

    if (top.has_child("attack")) {
        detail::StrictObject o(top.child("attack"), "/attack");
        std::string kind = to_string(s.attack.kind);
        o.get("kind", kind);
        s.attack.kind = attack_kind_from_string(kind);
        o.get("fraction", s.attack.fraction);
        o.get("strength", s.attack.strength);
        o.get("target_class", s.attack.target_class);
        o.get("substitute_class", s.attack.substitute_class);
        o.get("flip_from", s.attack.flip_from);
        o.get("flip_to", s.attack.flip_to);
        o.finish();
        if (s.attack.fraction < 0.0 || s.attack.fraction > 1.0) {
            throw ConfigError("/attack/fraction: must lie in [0,1]");
        }
    } else {
        top.child("attack");
    }

    if (top.has_child("legit_channel")) {
        s.legit_channel =
            detail::parse_channel(top.child("legit_channel"), "/legit_channel", s.legit_channel);
    } else {
        top.child("legit_channel");
    }
    if (top.has_child("eaves_channel")) {
        s.eaves_channel =
            detail::parse_channel(top.child("eaves_channel"), "/eaves_channel", s.eaves_channel);
    } else {
        top.child("eaves_channel");
    }

    {
        detail::StrictObject o(top.child("codec"), "/codec");
        o.get("generator", s.codec.generator);
        o.get("image_side", s.codec.image_side);
        o.get_size("latent_dim", s.codec.latent_dim, 1);
        o.get_size("hidden", s.codec.hidden, 1);
        o.get("epochs", s.codec.epochs);
        o.get("lr", s.codec.lr);
        o.get_size("batch", s.codec.batch, 1);
        o.get("latent_noise", s.codec.latent_noise);
        o.get_size("train_size", s.codec.train_size, 4);
        o.get_size("eval_size", s.codec.eval_size, 4);
        o.get_size("test_size", s.codec.test_size, 4);
        o.finish();
        if (s.codec.epochs < 1) throw ConfigError("/codec/epochs: must be >= 1");
        if (s.codec.lr < 0.0) throw ConfigError("/codec/lr: must be >= 0");
        if (s.codec.generator != "shapes" + std::to_string(s.codec.image_side)) {
            throw ConfigError("/codec/generator: must match image_side (shapes" +
                              std::to_string(s.codec.image_side) + ")");
        }
        const auto dim = static_cast<std::size_t>(s.codec.image_side) *
                         static_cast<std::size_t>(s.codec.image_side);
        if (s.codec.latent_dim >= dim) {
            throw ConfigError("/codec/latent_dim: must be < image_side^2");
        }
    }

    {
        detail::StrictObject o(top.child("camouflage"), "/camouflage");
        o.get("epsilon", s.camouflage.epsilon);
        o.get("lambda", s.camouflage.lambda);
        o.get("policy", s.camouflage.policy);
        o.get("epochs", s.camouflage.epochs);
        o.get("lr", s.camouflage.lr);
        o.get_size("batch", s.camouflage.batch, 1);
        o.get_size("gen_hidden", s.camouflage.gen_hidden, 1);
        o.get("trials_per_image", s.camouflage.trials_per_image);
        o.get("judge_epochs", s.camouflage.judge_epochs);
        o.get("judge_lr", s.camouflage.judge_lr);
        o.get_size("judge_hidden", s.camouflage.judge_hidden, 1);
        o.get("judge_accuracy_floor", s.camouflage.judge_accuracy_floor);
        o.finish();
        if (s.camouflage.policy != "next_class") {
            throw ConfigError("/camouflage/policy: only next_class is defined");
        }
        if (s.camouflage.lambda < 0.0) throw ConfigError("/camouflage/lambda: must be >= 0");
        if (s.camouflage.trials_per_image < 1) {
            throw ConfigError("/camouflage/trials_per_image: must be >= 1");
        }
    }

    {
        detail::StrictObject o(top.child("federation"), "/federation");
        o.get("rounds", s.federation.rounds);
        o.get("mechanism", s.federation.mechanism);
        o.get_size("shard_size", s.federation.shard_size, 4);
        o.get("local_epochs", s.federation.local_epochs);
        o.get("local_lr", s.federation.local_lr);
        o.get_size("local_batch", s.federation.local_batch, 1);
        o.get_size("krum_f", s.federation.krum_f);
        o.get("tau_sep", s.federation.tau_sep);
        o.finish();
        if (s.federation.rounds < 1) throw ConfigError("/federation/rounds: must be >= 1");
        static const std::set<std::string> mechanisms{"fedavg", "krum",          "robust",
                                                      "none",   "audit_trust",   "trust_no_audit"};
        if (!mechanisms.contains(s.federation.mechanism)) {
            throw ConfigError("/federation/mechanism: unknown mechanism " +
                              s.federation.mechanism);
        }
        if (s.federation.local_epochs < 0) {
            throw ConfigError("/federation/local_epochs: must be >= 0");
        }
    }

    {
        detail::StrictObject o(top.child("game"), "/game");
        if (o.has("payoffs")) {
            detail::StrictObject p(o.child("payoffs"), "/game/payoffs");
            p.get("c_high", s.game.payoffs.c_high);
            p.get("c_low", s.game.payoffs.c_low);
            p.get("g", s.game.payoffs.g);
            p.get("f", s.game.payoffs.f);
            p.get("c_audit", s.game.payoffs.c_audit);
            p.get("loss_l", s.game.payoffs.loss_l);
            p.finish();
        } else {
            o.child("payoffs");
        }
        o.get("alpha", s.game.alpha);
        o.get("beta", s.game.beta);
        o.get("theta", s.game.theta);
        o.get("min_rounds", s.game.min_rounds);
        o.get("tau_x", s.game.tau_x);
        o.get("p_floor", s.game.p_floor);
        o.get("declared_p", s.game.declared_p);
        o.get("rounds", s.game.rounds);
        o.get_size("assessor_count", s.game.assessor_count, 1);
        o.get("quality_weight", s.game.quality_weight);
        o.get_size("classifier_hidden", s.game.classifier_hidden, 1);
        o.get("classifier_lr", s.game.classifier_lr);
        o.get_size("classifier_batch", s.game.classifier_batch, 1);
        o.get("local_epochs", s.game.local_epochs);
        o.get_size("shard_size", s.game.shard_size, 4);
        o.get_size("eval_size", s.game.eval_size, 4);
        o.finish();
        try {
            s.game.payoffs.validate();
        } catch (const ConfigError& e) {
            throw ConfigError("/game/payoffs: " + std::string(e.what()));
        }
        if (s.game.declared_p > 1.0 || (s.game.declared_p < 0.0 && s.game.declared_p != -1.0)) {
            throw ConfigError("/game/declared_p: must lie in [0,1] or be -1 for auto");
        }
        if (s.game.rounds < 1) throw ConfigError("/game/rounds: must be >= 1");
    }

    {
        detail::StrictObject o(top.child("sweep"), "/sweep");
        o.get("snr_grid", s.sweep.snr_grid);
        o.get("channel", s.sweep.channel);
        o.get("k_factor", s.sweep.k_factor);
        o.finish();
        if (s.sweep.snr_grid.empty()) throw ConfigError("/sweep/snr_grid: must be non-empty");
        fading_kind_from_string(s.sweep.channel); // validates
    }

    {
        detail::StrictObject o(top.child("overhead"), "/overhead");
        std::int64_t frames = static_cast<std::int64_t>(s.overhead.frames);
        o.get("frames", frames);
        o.finish();
        if (frames < 1) throw ConfigError("/overhead/frames: must be >= 1");
        s.overhead.frames = static_cast<std::uint64_t>(frames);
    }

    {
        detail::StrictObject o(top.child("output"), "/output");
        o.get("dir", s.output.dir);
        o.finish();
    }

    top.finish();
    return s;
}

inline Scenario parse_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open scenario file: " + path.string());
    detail::json root;
    try {
        root = detail::json::parse(in);
    } catch (const detail::json::exception& e) {
        throw ConfigError("scenario JSON parse error: " + std::string(e.what()));
    }
    return parse_scenario_json(root);
}

/// Serialize with every default materialized; parse(serialize(s)) == s.
inline detail::json serialize_scenario(const Scenario& s) {
    using detail::json;
    json root;
    root["master_seed"] = s.master_seed;
    root["vehicle_count"] = s.vehicle_count;
    root["attack"] = {{"kind", to_string(s.attack.kind)},
                      {"fraction", s.attack.fraction},
                      {"strength", s.attack.strength},
                      {"target_class", s.attack.target_class},
                      {"substitute_class", s.attack.substitute_class},
                      {"flip_from", s.attack.flip_from},
                      {"flip_to", s.attack.flip_to}};
    root["legit_channel"] = detail::channel_json(s.legit_channel);
    root["eaves_channel"] = detail::channel_json(s.eaves_channel);
    root["codec"] = {{"generator", s.codec.generator},
                     {"image_side", s.codec.image_side},
                     {"latent_dim", s.codec.latent_dim},
                     {"hidden", s.codec.hidden},
                     {"epochs", s.codec.epochs},
                     {"lr", s.codec.lr},
                     {"batch", s.codec.batch},
                     {"latent_noise", s.codec.latent_noise},
                     {"train_size", s.codec.train_size},
                     {"eval_size", s.codec.eval_size},
                     {"test_size", s.codec.test_size}};
    root["camouflage"] = {{"epsilon", s.camouflage.epsilon},
                          {"lambda", s.camouflage.lambda},
                          {"policy", s.camouflage.policy},
                          {"epochs", s.camouflage.epochs},
                          {"lr", s.camouflage.lr},
                          {"batch", s.camouflage.batch},
                          {"gen_hidden", s.camouflage.gen_hidden},
                          {"trials_per_image", s.camouflage.trials_per_image},
                          {"judge_epochs", s.camouflage.judge_epochs},
                          {"judge_lr", s.camouflage.judge_lr},
                          {"judge_hidden", s.camouflage.judge_hidden},
                          {"judge_accuracy_floor", s.camouflage.judge_accuracy_floor}};
    root["federation"] = {{"rounds", s.federation.rounds},
                          {"mechanism", s.federation.mechanism},
                          {"shard_size", s.federation.shard_size},
                          {"local_epochs", s.federation.local_epochs},
                          {"local_lr", s.federation.local_lr},
                          {"local_batch", s.federation.local_batch},
                          {"krum_f", s.federation.krum_f},
                          {"tau_sep", s.federation.tau_sep}};
    root["game"] = {{"payoffs",
                     {{"c_high", s.game.payoffs.c_high},
                      {"c_low", s.game.payoffs.c_low},
                      {"g", s.game.payoffs.g},
                      {"f", s.game.payoffs.f},
                      {"c_audit", s.game.payoffs.c_audit},
                      {"loss_l", s.game.payoffs.loss_l}}},
                    {"alpha", s.game.alpha},
                    {"beta", s.game.beta},
                    {"theta", s.game.theta},
                    {"min_rounds", s.game.min_rounds},
                    {"tau_x", s.game.tau_x},
                    {"p_floor", s.game.p_floor},
                    {"declared_p", s.game.declared_p},
                    {"rounds", s.game.rounds},
                    {"assessor_count", s.game.assessor_count},
                    {"quality_weight", s.game.quality_weight},
                    {"classifier_hidden", s.game.classifier_hidden},
                    {"classifier_lr", s.game.classifier_lr},
                    {"classifier_batch", s.game.classifier_batch},
                    {"local_epochs", s.game.local_epochs},
                    {"shard_size", s.game.shard_size},
                    {"eval_size", s.game.eval_size}};
    root["sweep"] = {{"snr_grid", s.sweep.snr_grid},
                     {"channel", s.sweep.channel},
                     {"k_factor", s.sweep.k_factor}};
    root["overhead"] = {{"frames", s.overhead.frames}};
    root["output"] = {{"dir", s.output.dir}};
    return root;
}

inline CodecTrainConfig codec_train_config(const Scenario& s) {
    CodecTrainConfig cfg;
    cfg.epochs = s.codec.epochs;
    cfg.lr = s.codec.lr;
    cfg.latent_dim = s.codec.latent_dim;
    cfg.hidden = s.codec.hidden;
    cfg.batch = s.codec.batch;
    cfg.latent_noise = s.codec.latent_noise;
    return cfg;
}

inline FederationConfig federation_config(const Scenario& s) {
    FederationConfig cfg;
    cfg.master_seed = s.master_seed;
    cfg.client_count = s.vehicle_count;
    cfg.rounds = s.federation.rounds;
    cfg.mechanism = federation_mechanism_from_string(
        s.federation.mechanism == "none" ? "fedavg" : s.federation.mechanism);
    cfg.attack = s.attack;
    cfg.generator = s.codec.generator;
    cfg.shard_size = s.federation.shard_size;
    cfg.eval_size = s.codec.eval_size;
    cfg.codec = codec_train_config(s);
    cfg.local.epochs = s.federation.local_epochs;
    cfg.local.lr = s.federation.local_lr;
    cfg.local.batch = s.federation.local_batch;
    cfg.local.latent_noise = s.codec.latent_noise;
    cfg.krum_f = s.federation.krum_f;
    cfg.tau_sep = s.federation.tau_sep;
    return cfg;
}

inline TrustCampaignConfig trust_campaign_config(const Scenario& s) {
    TrustCampaignConfig cfg;
    cfg.master_seed = s.master_seed;
    cfg.vehicle_count = s.vehicle_count;
    cfg.untrustworthy_fraction = s.attack.fraction;
    cfg.rounds = s.game.rounds;
    cfg.mechanism = trust_mechanism_from_string(
        s.federation.mechanism == "fedavg" || s.federation.mechanism == "robust"
            ? "none"
            : s.federation.mechanism);
    cfg.pay = s.game.payoffs;
    cfg.alpha = s.game.alpha;
    cfg.beta = s.game.beta;
    cfg.theta = s.game.theta;
    cfg.min_rounds = s.game.min_rounds;
    cfg.tau_x = s.game.tau_x;
    cfg.p_floor = s.game.p_floor;
    cfg.declared_p = s.game.declared_p;
    cfg.quality_weight = s.game.quality_weight;
    cfg.generator = s.codec.generator;
    cfg.shard_size = s.game.shard_size;
    cfg.eval_size = s.game.eval_size;
    cfg.test_size = s.codec.test_size;
    cfg.classifier.hidden = s.game.classifier_hidden;
    cfg.classifier.lr = s.game.classifier_lr;
    cfg.classifier.batch = s.game.classifier_batch;
    cfg.local_epochs = s.game.local_epochs;
    cfg.flip_from = s.attack.flip_from;
    cfg.flip_to = s.attack.flip_to;
    cfg.krum_f = s.federation.krum_f;
    cfg.assessor_count = s.game.assessor_count;
    return cfg;
}

} // namespace vnsemcom
