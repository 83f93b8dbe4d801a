#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "qwthn/metrics.hpp"
#include "qwthn/train.hpp"

namespace qwthn {

void write_text_file(const std::string& path, const std::string& content);

std::string history_csv(const RunHistory& history);
nlohmann::json history_summary_json(const RunHistory& history);

// Single-file line chart with exactly two polylines (train, validation).
std::string loss_curve_svg(const RunHistory& history);

// JSON-lines evaluation input: each line carries `candidate`,
// `references` (list), and optionally `answer_segment` + `gold`.
MetricReport evaluate_jsonl(const std::string& path);

nlohmann::json metric_report_json(const MetricReport& report, bool percent);
std::string metric_report_csv(const MetricReport& report, bool percent);

nlohmann::json param_report_json(const ParamReport& report);

struct RunManifest {
    std::string tool_version;
    std::uint64_t seed = 0;
    nlohmann::json config;
    std::vector<std::pair<std::string, std::string>> artifacts; // (name, path)
};

// Fails if any recorded artifact path does not exist yet.
void write_manifest(const RunManifest& manifest, const std::string& path);

} // namespace qwthn
