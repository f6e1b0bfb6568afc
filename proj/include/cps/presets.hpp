#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "cps/simulation.hpp"

namespace cps {

// One-command reproductions of the benchmark experiments.
struct Preset {
  std::string name;
  ScenarioConfig config;
  std::vector<double> epsilon_grid;  // sweep presets only
  std::size_t trials = 1;
};

// fig2_k10, fig2_k20, fig2_k30, fig3_sweep, fig7_scale.
Preset preset(std::string_view name);
std::vector<std::string> preset_names();

}  // namespace cps
