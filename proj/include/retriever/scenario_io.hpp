#pragma once

#include "retriever/world.hpp"

#include <filesystem>
#include <string>

namespace retriever {

/// Reads and validates a scenario file. Throws ParseError for malformed text and
/// ValidationError (with a field path) for schema or consistency violations.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const std::string& text);

std::string scenario_to_string(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

/// Camera used when a scenario file omits one: over the left front of the table.
CameraPose default_initial_camera();

}  // namespace retriever
