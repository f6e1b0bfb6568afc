#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <json.hpp>

#include "cps/graph_schedule.hpp"
#include "cps/metrics.hpp"
#include "cps/simulation.hpp"

namespace cps {

// {"n": N, "period": p, "rounds": [[[i, j], ...], ...]}; 1-based
// (receiver, sender) pairs.
GraphSchedule schedule_from_json(const nlohmann::json& doc);
nlohmann::json schedule_to_json(const GraphSchedule& schedule);
GraphSchedule load_schedule_file(const std::filesystem::path& path);

// Scenario files use the same JSON container. "schedule" is either a builtin
// name or an inline custom schedule object.
ScenarioConfig scenario_from_json(const nlohmann::json& doc);
nlohmann::json scenario_to_json(const ScenarioConfig& config);
ScenarioConfig load_scenario_file(const std::filesystem::path& path);

nlohmann::json read_json_file(const std::filesystem::path& path);

// round,e
std::string errors_csv(const Transcript& transcript);
// round,agent,s,w,pi
std::string states_csv(const Transcript& transcript);
// {"rounds": [{"round": k, "messages": [{"sender", "receiver", "delta_s", "delta_w"}]}]}
nlohmann::json message_log(const Transcript& transcript);

nlohmann::json to_json(const ConvergenceReport& report);

// Shortest decimal form that round-trips the double.
std::string format_double(double value);

// Writes via a temporary sibling file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string sha256_hex(std::string_view contents);

}  // namespace cps
