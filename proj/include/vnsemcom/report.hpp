#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "vnsemcom/errors.hpp"

namespace vnsemcom {

/// One emitted observation in long/tidy format. round == -1 marks a
/// summary row.
struct MetricRow {
    std::string experiment;
    std::string condition;
    int round = -1;
    std::string metric;
    double value = 0.0;
    std::int64_t seed = 0;

    bool operator==(const MetricRow&) const = default;
};

/// Registered metric labels. A label is valid if its text up to the first
/// '/' is registered, so per-entity series like "trust/veh3" pass.
inline const std::set<std::string, std::less<>>& registered_metrics() {
    static const std::set<std::string, std::less<>> names = {
        "ssim",          "final_ssim",      "eval_ssim",     "per_class_ssim",
        "misleading_rate", "legit_accuracy", "legit_ssim",   "accuracy",
        "final_accuracy", "overhead_ratio", "raw_bytes",     "semantic_bytes",
        "trust",         "kept_count",      "mean_score",    "train_loss",
        "p_star",        "q_star",          "lazy_below_theta_round",
        "control_misleading_rate",
    };
    return names;
}

namespace detail {

inline void check_label(std::string_view label, std::string_view what) {
    for (char c : label) {
        if (c == ',' || c == '"' || c == '\\' || c == '\n' || c == '\r') {
            throw ConfigError(std::string(what) + " label contains a reserved character: " +
                              std::string(label));
        }
    }
}

inline void check_metric(const std::string& metric) {
    check_label(metric, "metric");
    const auto base = std::string_view(metric).substr(0, metric.find('/'));
    if (!registered_metrics().contains(base)) {
        throw ConfigError("unregistered metric label: " + metric);
    }
}

// Six significant digits, trailing zeros kept ("0.8185" -> "0.818500").
inline std::string format_value(double v) {
    if (!std::isfinite(v)) throw ConfigError("metric value must be finite");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%#.6g", v);
    return buf;
}

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for write: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed: " + path.string() + ": " + ec.message());
}

} // namespace detail

/// The exact numeric formatting the emitters use (six significant digits,
/// trailing zeros kept).
inline std::string format_metric_value(double v) { return detail::format_value(v); }

/// Atomic text write (temp file + rename), shared by every report artifact.
inline void atomic_write_text(const std::filesystem::path& path, const std::string& content) {
    detail::atomic_write(path, content);
}

/// CSV with header `experiment,condition,round,metric,value,seed`, rows in
/// insertion order, LF endings, written atomically (temp file + rename).
inline void emit_csv(std::span<const MetricRow> rows, const std::filesystem::path& path) {
    std::string out = "experiment,condition,round,metric,value,seed\n";
    for (const MetricRow& r : rows) {
        detail::check_label(r.experiment, "experiment");
        detail::check_label(r.condition, "condition");
        detail::check_metric(r.metric);
        out += r.experiment;
        out += ',';
        out += r.condition;
        out += ',';
        out += std::to_string(r.round);
        out += ',';
        out += r.metric;
        out += ',';
        out += detail::format_value(r.value);
        out += ',';
        out += std::to_string(r.seed);
        out += '\n';
    }
    detail::atomic_write(path, out);
}

/// JSON array of objects mirroring MetricRow fields in declaration order,
/// values formatted identically to the CSV emitter, seeds as integers.
inline void emit_json(std::span<const MetricRow> rows, const std::filesystem::path& path) {
    std::string out = "[";
    bool first = true;
    for (const MetricRow& r : rows) {
        detail::check_label(r.experiment, "experiment");
        detail::check_label(r.condition, "condition");
        detail::check_metric(r.metric);
        out += first ? "\n" : ",\n";
        first = false;
        out += "  {\"experiment\": \"" + r.experiment + "\", \"condition\": \"" +
               r.condition + "\", \"round\": " + std::to_string(r.round) +
               ", \"metric\": \"" + r.metric + "\", \"value\": " +
               detail::format_value(r.value) + ", \"seed\": " + std::to_string(r.seed) + "}";
    }
    out += first ? "]" : "\n]";
    out += "\n";
    detail::atomic_write(path, out);
}

inline std::vector<MetricRow> parse_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open for read: " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "experiment,condition,round,metric,value,seed") {
        throw IoError("bad CSV header in " + path.string());
    }
    std::vector<MetricRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        MetricRow r;
        std::string field;
        std::getline(ss, r.experiment, ',');
        std::getline(ss, r.condition, ',');
        std::getline(ss, field, ',');
        r.round = std::stoi(field);
        std::getline(ss, r.metric, ',');
        std::getline(ss, field, ',');
        r.value = std::stod(field);
        std::getline(ss, field, ',');
        r.seed = std::stoll(field);
        rows.push_back(std::move(r));
    }
    return rows;
}

} // namespace vnsemcom
