#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "vnsemcom/scenario.hpp"

using namespace vnsemcom;
using json = nlohmann::ordered_json;

namespace {

std::filesystem::path write_tmp(const char* name, const std::string& content) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream out(path);
    out << content;
    return path;
}

} // namespace

TEST(Scenario, MinimalDocumentAppliesDefaults) {
    const Scenario s = parse_scenario_json(json::parse(R"({"master_seed": 7})"));
    EXPECT_EQ(s.master_seed, 7u);
    EXPECT_EQ(s.vehicle_count, 10u);
    EXPECT_EQ(s.codec.latent_dim, 16u);
    EXPECT_EQ(s.codec.generator, "shapes16");
    EXPECT_EQ(s.legit_channel.kind, FadingKind::Rician);
    EXPECT_DOUBLE_EQ(s.legit_channel.k_factor, 4.0);
    EXPECT_EQ(s.eaves_channel.kind, FadingKind::Rayleigh);
    EXPECT_EQ(s.federation.mechanism, "robust");
    EXPECT_EQ(s.attack.kind, AttackKind::None);
    EXPECT_DOUBLE_EQ(s.game.payoffs.c_high, 1.0);
    EXPECT_EQ(s.sweep.snr_grid, (std::vector<double>{20, 15, 10, 5, 0}));
}

TEST(Scenario, ZeroVehicleCountFailsWithPath) {
    try {
        parse_scenario_json(json::parse(R"({"vehicle_count": 0})"));
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/vehicle_count"), std::string::npos);
    }
}

TEST(Scenario, UnknownTopLevelKeyRejected) {
    try {
        parse_scenario_json(json::parse(R"({"master_sead": 7})"));
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/master_sead"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("unknown key"), std::string::npos);
    }
}

TEST(Scenario, UnknownNestedKeyRejectedWithFullPath) {
    try {
        parse_scenario_json(json::parse(R"({"codec": {"latnet_dim": 16}})"));
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/codec/latnet_dim"), std::string::npos);
    }
}

TEST(Scenario, WrongTypeRejected) {
    EXPECT_THROW(parse_scenario_json(json::parse(R"({"codec": {"lr": "fast"}})")),
                 ConfigError);
}

TEST(Scenario, GeneratorMustMatchImageSide) {
    EXPECT_THROW(parse_scenario_json(
                     json::parse(R"({"codec": {"generator": "shapes16", "image_side": 12}})")),
                 ConfigError);
    const Scenario ok = parse_scenario_json(
        json::parse(R"({"codec": {"generator": "shapes12", "image_side": 12}})"));
    EXPECT_EQ(ok.codec.image_side, 12);
}

TEST(Scenario, BadChannelKindRejected) {
    EXPECT_THROW(parse_scenario_json(json::parse(R"({"legit_channel": {"kind": "nakagami"}})")),
                 ConfigError);
}

TEST(Scenario, BadPayoffsRejectedWithPath) {
    try {
        parse_scenario_json(json::parse(R"({"game": {"payoffs": {"c_high": -1.0}}})"));
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("/game/payoffs"), std::string::npos);
    }
}

TEST(Scenario, DeclaredPOutsideUnitIntervalRejected) {
    EXPECT_THROW(parse_scenario_json(json::parse(R"({"game": {"declared_p": 1.5}})")),
                 ConfigError);
    const Scenario automatic =
        parse_scenario_json(json::parse(R"({"game": {"declared_p": -1.0}})"));
    EXPECT_DOUBLE_EQ(automatic.game.declared_p, -1.0);
}

TEST(Scenario, SerializeParseRoundTrip) {
    Scenario s = parse_scenario_json(json::parse(R"({"master_seed": 99})"));
    s.attack.kind = AttackKind::Untargeted;
    s.attack.fraction = 0.3;
    s.federation.mechanism = "fedavg";
    s.eaves_channel.snr_db = 3.0;

    const json serialized = serialize_scenario(s);
    const Scenario back = parse_scenario_json(serialized);
    EXPECT_EQ(serialize_scenario(back), serialized);
    EXPECT_EQ(back.master_seed, 99u);
    EXPECT_EQ(back.attack.kind, AttackKind::Untargeted);
    EXPECT_DOUBLE_EQ(back.attack.fraction, 0.3);
    EXPECT_DOUBLE_EQ(back.eaves_channel.snr_db, 3.0);
}

TEST(Scenario, FileParsingAndMissingFile) {
    const auto path = write_tmp("scenario_ok.json", R"({"master_seed": 5})");
    const Scenario s = parse_scenario(path);
    EXPECT_EQ(s.master_seed, 5u);
    std::filesystem::remove(path);

    EXPECT_THROW(parse_scenario("/nonexistent/scenario.json"), IoError);
}

TEST(Scenario, MalformedJsonRejected) {
    const auto path = write_tmp("scenario_bad.json", "{ not json");
    EXPECT_THROW(parse_scenario(path), ConfigError);
    std::filesystem::remove(path);
}

TEST(Scenario, DefaultScenarioFileInRepoParses) {
    // committed default used by the acceptance suite and the CLI examples
    const auto path = std::filesystem::path(SCENARIO_DIR) / "default.json";
    const Scenario s = parse_scenario(path);
    EXPECT_EQ(s.codec.generator, "shapes16");
    EXPECT_GE(s.vehicle_count, 10u);
}
