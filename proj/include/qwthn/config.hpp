#pragma once

#include <string>

#include <json.hpp>

#include "qwthn/backend.hpp"
#include "qwthn/train.hpp"

namespace qwthn {

struct CliConfig {
    TrainConfig train;
    BackendConfig backend;
};

// Strict schema: unknown keys anywhere are rejected, defaults fill the rest
// (hidden widths 128, q = 4, L = 2, D = 2, n = 3 sites, LoRA rank 4).
CliConfig parse_config_json(const nlohmann::json& j);
CliConfig load_config(const std::string& path);

// Round-trippable snapshot of an effective configuration.
nlohmann::json config_to_json(const CliConfig& config);

} // namespace qwthn
