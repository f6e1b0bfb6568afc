#include "cps/presets.hpp"

#include <memory>

#include <fmt/core.h>

#include "cps/error.hpp"

namespace cps {

namespace {

ScenarioConfig alternating5_config(Round big_k) {
  ScenarioConfig c;
  c.params = {.n = 5, .a = -50.0, .b = 50.0, .epsilon = 0.05, .big_k = big_k};
  c.schedule = std::make_shared<GraphSchedule>(alternating5_schedule());
  c.horizon = 200;
  c.seed = 1;
  c.initial_values = UniformInitialValues{-50.0, 50.0};
  c.algorithm = Algorithm::confidential;
  return c;
}

}  // namespace

Preset preset(std::string_view name) {
  Preset p;
  p.name = std::string(name);
  if (name == "fig2_k10" || name == "fig2_k20" || name == "fig2_k30") {
    p.config = alternating5_config(name == "fig2_k10" ? 10 : name == "fig2_k20" ? 20 : 30);
    return p;
  }
  if (name == "fig3_sweep") {
    p.config = alternating5_config(10);
    p.config.record = RecordMode::states_only;
    p.epsilon_grid = {0.01, 0.02, 0.05, 0.1, 0.15};
    p.trials = 1000;
    return p;
  }
  if (name == "fig7_scale") {
    ScenarioConfig c;
    c.params = {.n = 1000, .a = -50.0, .b = 50.0, .epsilon = 0.05, .big_k = 10};
    c.schedule = std::make_shared<GraphSchedule>(ring_schedule(1000));
    c.horizon = 3000;
    c.seed = 1;
    c.initial_values = UniformInitialValues{-50.0, 50.0};
    c.record = RecordMode::states_only;
    p.config = std::move(c);
    return p;
  }
  throw Error(ErrorKind::configuration, fmt::format("unknown preset '{}'", name));
}

std::vector<std::string> preset_names() {
  return {"fig2_k10", "fig2_k20", "fig2_k30", "fig3_sweep", "fig7_scale"};
}

}  // namespace cps
