#include "cps/io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include <fmt/core.h>
#include <openssl/evp.h>

#include "cps/error.hpp"

namespace cps {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

template <typename T>
T get_or(const json& doc, const char* key, T fallback) {
  auto it = doc.find(key);
  return it == doc.end() ? fallback : it->get<T>();
}

}  // namespace

GraphSchedule schedule_from_json(const json& doc) {
  try {
    CustomScheduleSpec spec;
    spec.n_agents = doc.at("n").get<std::size_t>();
    spec.period = doc.at("period").get<std::size_t>();
    for (const auto& round : doc.at("rounds")) {
      auto& edges = spec.rounds.emplace_back();
      for (const auto& pair : round) {
        if (!pair.is_array() || pair.size() != 2) {
          throw Error(ErrorKind::configuration, "each edge must be a [receiver, sender] pair");
        }
        edges.emplace_back(pair[0].get<long long>(), pair[1].get<long long>());
      }
    }
    return custom_schedule(spec);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::configuration, fmt::format("malformed schedule: {}", e.what()));
  }
}

json schedule_to_json(const GraphSchedule& schedule) {
  json rounds = json::array();
  auto dump = [&](const EdgeSet& set) {
    json edges = json::array();
    for (const auto& e : set.edges()) edges.push_back({e.receiver, e.sender});
    rounds.push_back(std::move(edges));
  };
  for (const auto& s : schedule.prefix()) dump(s);
  for (const auto& s : schedule.cycle()) dump(s);
  return {{"n", schedule.n_agents()}, {"period", schedule.period()}, {"rounds", rounds}};
}

json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::io, fmt::format("cannot open '{}'", path.string()));
  }
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::configuration,
                fmt::format("cannot parse '{}': {}", path.string(), e.what()));
  }
}

GraphSchedule load_schedule_file(const fs::path& path) {
  return schedule_from_json(read_json_file(path));
}

ScenarioConfig scenario_from_json(const json& doc) {
  try {
    ScenarioConfig c;
    const json& sched = doc.at("schedule");
    if (sched.is_string()) {
      c.schedule = std::make_shared<GraphSchedule>(builtin_schedule(sched.get<std::string>()));
    } else {
      c.schedule = std::make_shared<GraphSchedule>(schedule_from_json(sched));
    }
    c.params.n = get_or<std::size_t>(doc, "n", c.schedule->n_agents());
    c.params.a = get_or(doc, "a", c.params.a);
    c.params.b = get_or(doc, "b", c.params.b);
    c.params.epsilon = get_or(doc, "epsilon", c.params.epsilon);
    c.params.big_k = get_or<Round>(doc, "big_k", c.params.big_k);
    c.horizon = get_or<Round>(doc, "horizon", c.params.n > 50 ? 3000 : 200);
    c.seed = get_or<std::uint64_t>(doc, "seed", c.seed);
    if (auto it = doc.find("initial_values"); it != doc.end()) {
      if (it->is_array()) {
        c.initial_values = it->get<std::vector<double>>();
      } else {
        const auto range = it->at("uniform").get<std::vector<double>>();
        if (range.size() != 2) {
          throw Error(ErrorKind::configuration, "uniform range needs [low, high]");
        }
        c.initial_values = UniformInitialValues{range[0], range[1]};
      }
    } else {
      c.initial_values = UniformInitialValues{c.params.a, c.params.b};
    }
    c.algorithm = parse_algorithm(get_or<std::string>(doc, "algorithm", "confidential"));
    c.adversaries = get_or<std::vector<AgentId>>(doc, "adversaries", {});
    c.stop_tolerance = get_or(doc, "stop_tolerance", 0.0);
    if (auto it = doc.find("record"); it != doc.end()) {
      c.record = parse_record_mode(it->get<std::string>());
    }
    c.override_assumptions = get_or(doc, "override_assumptions", false);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::configuration, fmt::format("malformed scenario: {}", e.what()));
  }
}

json scenario_to_json(const ScenarioConfig& config) {
  json doc;
  doc["n"] = config.params.n;
  doc["a"] = config.params.a;
  doc["b"] = config.params.b;
  doc["epsilon"] = config.params.epsilon;
  doc["big_k"] = config.params.big_k;
  const std::string& name = config.schedule->name();
  if (name == "alternating5" || name == "ring1000") {
    doc["schedule"] = name;
  } else {
    doc["schedule"] = schedule_to_json(*config.schedule);
  }
  doc["horizon"] = config.horizon;
  doc["seed"] = config.seed;
  if (const auto* values = std::get_if<std::vector<double>>(&config.initial_values)) {
    doc["initial_values"] = *values;
  } else {
    const auto& range = std::get<UniformInitialValues>(config.initial_values);
    doc["initial_values"] = {{"uniform", {range.low, range.high}}};
  }
  doc["algorithm"] = to_string(config.algorithm);
  doc["adversaries"] = config.adversaries;
  doc["stop_tolerance"] = config.stop_tolerance;
  doc["record"] = to_string(resolve_record_mode(config));
  doc["override_assumptions"] = config.override_assumptions;
  return doc;
}

ScenarioConfig load_scenario_file(const fs::path& path) {
  return scenario_from_json(read_json_file(path));
}

std::string format_double(double value) { return fmt::format("{}", value); }

std::string errors_csv(const Transcript& transcript) {
  std::string out = "round,e\n";
  for (std::size_t k = 0; k < transcript.errors.size(); ++k) {
    out += fmt::format("{},{}\n", k, transcript.errors[k]);
  }
  return out;
}

std::string states_csv(const Transcript& transcript) {
  std::string out = "round,agent,s,w,pi\n";
  for (Round k = 0; k <= transcript.n_rounds(); ++k) {
    for (const auto& st : transcript.states_at(k)) {
      out += fmt::format("{},{},{},{},{}\n", k, st.agent_id, st.s, st.w,
                         estimate(st, transcript.config.algorithm, transcript.config.params));
    }
  }
  return out;
}

json message_log(const Transcript& transcript) {
  if (transcript.record != RecordMode::full) {
    throw Error(ErrorKind::insufficient_record, "message log needs a full record");
  }
  json rounds = json::array();
  for (const auto& record : transcript.rounds) {
    json messages = json::array();
    for (const auto& m : record.messages) {
      messages.push_back({{"sender", m.sender},
                          {"receiver", m.receiver},
                          {"delta_s", m.delta_s},
                          {"delta_w", m.delta_w}});
    }
    rounds.push_back({{"round", record.round}, {"messages", std::move(messages)}});
  }
  return {{"n", transcript.n_agents()}, {"big_k", transcript.config.params.big_k},
          {"rounds", std::move(rounds)}};
}

json to_json(const ConvergenceReport& report) {
  json doc;
  doc["gamma_theoretical"] = report.gamma_theoretical;
  doc["one_minus_gamma_theoretical"] = report.one_minus_gamma_theoretical;
  doc["c0"] = report.c0;
  doc["bound_vacuous"] = report.bound_vacuous;
  doc["gamma_hat"] = report.gamma_hat ? json(*report.gamma_hat) : json(nullptr);
  doc["converged_at"] = report.converged_at ? json(*report.converged_at) : json(nullptr);
  doc["final_error"] = report.error_series.empty() ? json(nullptr) : json(report.error_series.back());
  json violations = json::array();
  for (const auto& v : report.invariant_violations) violations.push_back(v.describe());
  doc["invariant_violations"] = std::move(violations);
  return doc;
}

void write_file_atomic(const fs::path& path, std::string_view contents) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorKind::io, fmt::format("cannot write '{}'", tmp.string()));
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
      throw Error(ErrorKind::io, fmt::format("short write to '{}'", tmp.string()));
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw Error(ErrorKind::io, fmt::format("cannot rename to '{}': {}", path.string(), ec.message()));
  }
}

std::string sha256_hex(std::string_view contents) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(contents.data(), contents.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw Error(ErrorKind::io, "sha256 failed");
  }
  std::string hex;
  hex.reserve(2 * length);
  for (unsigned int i = 0; i < length; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

}  // namespace cps
