#include <doctest.h>

#include <memory>
#include <numeric>

#include "cps/error.hpp"
#include "cps/metrics.hpp"
#include "cps/simulation.hpp"

using namespace cps;

namespace {

ScenarioConfig fig2(Round big_k = 10) {
  ScenarioConfig c;
  c.params.big_k = big_k;
  c.schedule = std::make_shared<GraphSchedule>(alternating5_schedule());
  return c;
}

bool same_transcript(const Transcript& l, const Transcript& r) {
  if (l.initial_states != r.initial_states || l.errors != r.errors ||
      l.rounds.size() != r.rounds.size()) {
    return false;
  }
  for (std::size_t k = 0; k < l.rounds.size(); ++k) {
    if (l.rounds[k].states_after != r.rounds[k].states_after ||
        l.rounds[k].messages != r.rounds[k].messages ||
        l.rounds[k].weights != r.rounds[k].weights) {
      return false;
    }
  }
  return true;
}

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::io;
}

}  // namespace

TEST_CASE("run is deterministic per seed") {
  const auto a = run(fig2());
  const auto b = run(fig2());
  CHECK(same_transcript(a, b));

  auto other = fig2();
  other.seed = 2;
  CHECK_FALSE(same_transcript(a, run(other)));
}

TEST_CASE("fig2 scenario converges") {
  for (Round big_k : {10, 20, 30}) {
    const auto t = run(fig2(big_k));
    CHECK(t.n_rounds() == 200);
    CHECK(t.errors.size() == 201);
    CHECK(t.errors.back() < 1e-6);
    for (double pi : t.estimates_at(200)) CHECK(std::abs(pi - t.ground_truth_mean) < 1e-6);
  }
}

TEST_CASE("transcript structure") {
  const auto t = run(fig2());
  CHECK(t.record == RecordMode::full);
  CHECK(t.interval_bound == 2u);
  for (const auto& r : t.rounds) {
    const auto& edges = t.config.schedule->edges_at(r.round);
    REQUIRE(r.messages.size() == edges.size());
    for (std::size_t m = 0; m < r.messages.size(); ++m) {
      CHECK(edges.contains({r.messages[m].receiver, r.messages[m].sender}));
      CHECK(r.messages[m].round == r.round);
      if (m > 0) {
        const auto& prev = r.messages[m - 1];
        CHECK(std::pair(prev.sender, prev.receiver) <
              std::pair(r.messages[m].sender, r.messages[m].receiver));
      }
    }
    CHECK(r.weights.size() == 5);
    CHECK(r.states_after.size() == 5);
  }
  // Confidential masses stay in [0, 1) through round K + 1.
  for (Round k = 0; k <= 11; ++k) {
    for (const auto& st : t.states_at(k)) {
      CHECK(st.s >= 0.0);
      CHECK(st.s < 1.0);
    }
  }
  // The realized matrix reproduces the states after K.
  for (Round k = 11; k < 15; ++k) {
    const Eigen::MatrixXd p = t.realized_weight_matrix(k);
    Eigen::VectorXd s(5);
    for (int i = 0; i < 5; ++i) s(i) = t.states_at(k)[static_cast<std::size_t>(i)].s;
    const Eigen::VectorXd next = p * s;
    for (int i = 0; i < 5; ++i) {
      CHECK(next(i) == doctest::Approx(t.states_at(k + 1)[static_cast<std::size_t>(i)].s)
                           .epsilon(1e-14));
    }
  }
  CHECK(kind_of([&] { t.states_at(201); }) == ErrorKind::invalid_query);
  CHECK(kind_of([&] { t.realized_weight_matrix(200); }) == ErrorKind::invalid_query);
}

TEST_CASE("conventional run with two agents averages in one round") {
  ScenarioConfig c;
  c.params.n = 2;
  c.params.a = 0.0;
  c.params.b = 10.0;
  c.params.epsilon = 0.05;
  c.algorithm = Algorithm::conventional;
  c.initial_values = std::vector<double>{0.0, 10.0};
  c.horizon = 60;
  c.schedule = std::make_shared<GraphSchedule>(
      GraphSchedule::periodic(2, {EdgeSet({{1, 2}, {2, 1}}, 2)}, "pair"));
  const auto t = run(c);
  // Conventional runs draw the same random weights as the confidential
  // protocol, so pi is 5 only in the limit; mass and weight are conserved.
  double s = 0.0;
  double w = 0.0;
  for (const auto& st : t.states_at(1)) {
    s += st.s;
    w += st.w;
  }
  CHECK(s == doctest::Approx(10.0).epsilon(1e-15));
  CHECK(w == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(t.ground_truth_mean == 5.0);
  for (double pi : t.estimates_at(60)) CHECK(pi == doctest::Approx(5.0).epsilon(1e-12));

  // Cross-check every round against the matrix form.
  for (Round k = 0; k < 3; ++k) {
    const auto next = conventional_step(t.states_at(k), t.realized_weight_matrix(k),
                                        c.schedule->edges_at(k));
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(next[i].s == doctest::Approx(t.states_at(k + 1)[i].s).epsilon(1e-14));
      CHECK(next[i].w == doctest::Approx(t.states_at(k + 1)[i].w).epsilon(1e-14));
    }
  }

  // Confidential mode refuses two agents.
  c.algorithm = Algorithm::confidential;
  CHECK(kind_of([&] { run(c); }) == ErrorKind::configuration);
}

TEST_CASE("conventional engine matches the matrix form on alternating5") {
  auto c = fig2();
  c.algorithm = Algorithm::conventional;
  const auto t = run(c);
  for (Round k = 0; k < 50; ++k) {
    const auto next = conventional_step(t.states_at(k), t.realized_weight_matrix(k),
                                        c.schedule->edges_at(k));
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(next[i].s == doctest::Approx(t.states_at(k + 1)[i].s).epsilon(1e-13));
      CHECK(next[i].w == doctest::Approx(t.states_at(k + 1)[i].w).epsilon(1e-13));
    }
  }
  CHECK(t.errors.back() < 1e-6);
}

TEST_CASE("run_trials") {
  auto c = fig2();
  const auto one = run_trials(c, 1);
  REQUIRE(one.size() == 1);
  CHECK(same_transcript(one[0], run(c)));

  const auto batch_a = run_trials(c, 8, 3);
  const auto batch_b = run_trials(c, 8, 3);
  for (std::size_t t = 0; t < 8; ++t) {
    CHECK(batch_a[t].config.seed == 1 + 3 * t);
    CHECK(same_transcript(batch_a[t], batch_b[t]));
  }
  CHECK(kind_of([&] { run_trials(c, 0); }) == ErrorKind::configuration);
}

TEST_CASE("early stop and record modes") {
  auto c = fig2();
  c.stop_tolerance = 1e-8;
  const auto t = run(c);
  CHECK(t.n_rounds() < 200);
  CHECK(t.errors.back() < 1e-8);
  CHECK(t.errors[t.errors.size() - 2] >= 1e-8);

  c.stop_tolerance = 0.0;
  c.record = RecordMode::states_only;
  const auto light = run(c);
  CHECK(light.record == RecordMode::states_only);
  CHECK(light.rounds[0].messages.empty());
  CHECK(light.rounds[0].weights.empty());
  CHECK(light.errors == run(fig2()).errors);
  CHECK(kind_of([&] { light.realized_weight_matrix(0); }) == ErrorKind::insufficient_record);

  ScenarioConfig big;
  big.params.n = 60;
  big.schedule = std::make_shared<GraphSchedule>(ring_schedule(60));
  CHECK(resolve_record_mode(big) == RecordMode::states_only);
  CHECK(resolve_record_mode(fig2()) == RecordMode::full);
}

TEST_CASE("configuration errors") {
  auto c = fig2();
  c.initial_values = std::vector<double>{0, 0, 0, 0, 60};
  CHECK(kind_of([&] { run(c); }) == ErrorKind::out_of_range);

  c = fig2();
  c.initial_values = std::vector<double>{0, 0};
  CHECK(kind_of([&] { run(c); }) == ErrorKind::configuration);

  c = fig2();
  c.adversaries = {6};
  CHECK(kind_of([&] { run(c); }) == ErrorKind::configuration);

  c = fig2();
  c.params.epsilon = 0.5;  // two recipients per agent
  CHECK(kind_of([&] { run(c); }) == ErrorKind::configuration);

  c = fig2();
  c.params.n = 6;
  CHECK(kind_of([&] { run(c); }) == ErrorKind::configuration);

  c = fig2();
  c.schedule.reset();
  CHECK(kind_of([&] { run(c); }) == ErrorKind::configuration);

  CHECK(parse_algorithm("conventional") == Algorithm::conventional);
  CHECK(parse_record_mode("states-only") == RecordMode::states_only);
  CHECK(kind_of([] { parse_algorithm("secure"); }) == ErrorKind::configuration);
}

TEST_CASE("assumption checks and override") {
  ScenarioConfig c;
  c.params.n = 3;
  c.schedule = std::make_shared<GraphSchedule>(
      GraphSchedule::periodic(3, {EdgeSet({{2, 1}, {3, 2}}, 3)}, "path"));
  c.horizon = 20;
  CHECK(kind_of([&] { run(c); }) == ErrorKind::assumption);
  c.override_assumptions = true;
  const auto t = run(c);
  CHECK(t.n_rounds() == 20);
}

TEST_CASE("uniform initial values stay inside the open range") {
  auto c = fig2();
  c.initial_values = UniformInitialValues{-50.0, 50.0};
  for (std::uint64_t seed = 1; seed <= 200; ++seed) {
    c.seed = seed;
    for (double x : resolve_initial_values(c)) {
      CHECK(x > -50.0);
      CHECK(x < 50.0);
    }
  }
  c.initial_values = UniformInitialValues{-60.0, 50.0};
  CHECK(kind_of([&] { validate(c); }) == ErrorKind::out_of_range);
}
