#pragma once

#include <json.hpp>

#include <filesystem>
#include <string>

namespace detours::pipeline {

inline constexpr const char* kToolVersion = "0.1.0";

// Every command validates its config, does its work, and drops a
// RunManifest next to its outputs. Config errors throw ConfigError with
// the offending field path; anything else is a runtime failure.

void cmd_gen_world(const nlohmann::json& cfg);
void cmd_summarize(const nlohmann::json& cfg);
void cmd_mine_pairs(const nlohmann::json& cfg);
void cmd_gen_detours(const nlohmann::json& cfg);
void cmd_curate(const nlohmann::json& cfg);
void cmd_train(const nlohmann::json& cfg);
void cmd_eval(const nlohmann::json& cfg);
double cmd_gradcheck(const nlohmann::json& cfg); // returns max relative error
std::string cmd_report(const nlohmann::json& cfg); // rendered table

uint64_t config_hash(const nlohmann::json& cfg);

void write_manifest(const std::filesystem::path& dir, const std::string& command,
                    const nlohmann::json& cfg, const std::string& started,
                    const std::string& finished);

} // namespace detours::pipeline
