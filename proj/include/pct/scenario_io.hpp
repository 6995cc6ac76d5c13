#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "pct/adversaries.hpp"
#include "pct/analysis.hpp"
#include "pct/world.hpp"

namespace pct {

// Syntax and schema errors; line and column are 1-based, 0 when unknown.
class ScenarioError : public std::runtime_error {
public:
    ScenarioError(const std::string& origin, int line, int column, const std::string& what);
    int line = 0;
    int column = 0;
};

Scenario parse_scenario(const std::string& text, const std::string& origin = "<scenario>");
Scenario load_scenario(const std::filesystem::path& path);
nlohmann::json scenario_to_json(const Scenario& sc);
std::string scenario_to_text(const Scenario& sc);

AttackSetup parse_attack_setup(const std::string& text, const std::string& origin = "<attacks>");

// A suite directory holds privacy.json, attacks.json and costs.json.
SuiteConfig load_suite(const std::filesystem::path& dir);

}  // namespace pct
