#include <doctest.h>

#include <cmath>
#include <memory>
#include <numeric>
#include <vector>

#include "cps/adversary.hpp"
#include "cps/error.hpp"

using namespace cps;

namespace {

ScenarioConfig fig2(std::vector<AgentId> adversaries = {}) {
  ScenarioConfig c;
  c.schedule = std::make_shared<GraphSchedule>(alternating5_schedule());
  c.adversaries = std::move(adversaries);
  return c;
}

// Complete graph on three agents, every round.
ScenarioConfig triangle() {
  ScenarioConfig c;
  c.params.n = 3;
  c.schedule = std::make_shared<GraphSchedule>(GraphSchedule::periodic(
      3, {EdgeSet({{2, 1}, {3, 1}, {1, 2}, {3, 2}, {1, 3}, {2, 3}}, 3)}, "triangle"));
  c.adversaries = {2, 3};
  return c;
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

double correlation(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace

TEST_CASE("privacy_condition") {
  const ProtocolParams params{};
  const auto alt = alternating5_schedule();

  SUBCASE("protected with a witness") {
    const std::vector<AgentId> adv{3};
    const auto v = privacy_condition(alt, adv, 1, params);
    CHECK(v.verdict == Verdict::protected_target);
    REQUIRE(v.witness);
    CHECK(v.witness->first != 3);
    CHECK(v.witness->first != 1);
    CHECK(v.witness->second <= params.big_k);
    // Round 0: 1 sends to 2 and hears from 5.
    CHECK(*v.witness == std::pair<AgentId, Round>{2, 0});
  }
  SUBCASE("fully surrounded") {
    const std::vector<AgentId> adv{2, 3, 4, 5};
    const auto v = privacy_condition(alt, adv, 1, params);
    CHECK(v.verdict == Verdict::vulnerable);
    CHECK_FALSE(v.witness);

    ProtocolParams three = params;
    three.n = 3;
    const std::vector<AgentId> pair{2, 3};
    CHECK(privacy_condition(*triangle().schedule, pair, 1, three).verdict == Verdict::vulnerable);
  }
  SUBCASE("honest neighbor only after K") {
    ProtocolParams p = params;
    p.n = 4;
    p.big_k = 2;
    // Rounds 0..2 pair 1 with the adversary 2; the cycle then adds 3.
    const EdgeSet early({{2, 1}, {1, 2}, {4, 3}, {3, 4}}, 4);
    const EdgeSet late({{3, 1}, {1, 3}, {2, 3}, {4, 2}, {3, 4}}, 4);
    const GraphSchedule s(4, {early, early, early}, {late, early}, "late");
    const std::vector<AgentId> adv{2};
    const auto v = privacy_condition(s, adv, 1, p);
    CHECK(v.verdict == Verdict::unknown);
    CHECK_FALSE(v.witness);
    p.big_k = 3;
    CHECK(privacy_condition(s, adv, 1, p).verdict == Verdict::protected_target);
  }
  SUBCASE("invalid queries") {
    const std::vector<AgentId> adv{1, 3};
    CHECK(kind_of([&] { privacy_condition(alt, adv, 1, params); }) == ErrorKind::invalid_query);
    CHECK(kind_of([&] { privacy_condition(alt, adv, 9, params); }) == ErrorKind::invalid_query);
  }
}

TEST_CASE("observe filters to adversary-incident messages") {
  const auto t = run(fig2());

  const std::vector<AgentId> none;
  const auto empty = observe(t, none);
  CHECK(empty.adversaries.empty());
  for (const auto& msgs : empty.messages) CHECK(msgs.empty());
  for (const auto& own : empty.own_states) CHECK(own.empty());
  CHECK(empty.params.n == 5);
  CHECK(empty.n_rounds == 200);

  const std::vector<AgentId> adv{4, 2};
  const auto view = observe(t, adv);
  CHECK(view.adversaries == std::vector<AgentId>{2, 4});
  for (Round k = 0; k < view.n_rounds; ++k) {
    std::size_t expected = 0;
    for (const auto& m : t.rounds[k].messages) {
      if (view.is_adversary(m.sender) || view.is_adversary(m.receiver)) ++expected;
    }
    CHECK(view.messages[k].size() == expected);
    for (const auto& m : view.messages[k]) {
      CHECK((view.is_adversary(m.sender) || view.is_adversary(m.receiver)));
    }
  }
  CHECK(view.own_states[7][1] == t.states_at(7)[3]);

  const std::vector<AgentId> all_but_one{2, 3, 4, 5};
  const auto full = observe(t, all_but_one);
  for (Round k = 0; k < full.n_rounds; ++k) {
    std::size_t touching = 0;
    for (const auto& m : t.rounds[k].messages) {
      if (m.sender == 1 || m.receiver == 1) ++touching;
    }
    std::size_t seen = 0;
    for (const auto& m : full.messages[k]) {
      if (m.sender == 1 || m.receiver == 1) ++seen;
    }
    CHECK(seen == touching);
  }

  auto light = fig2();
  light.record = RecordMode::states_only;
  const auto lt = run(light);
  CHECK(kind_of([&] { observe(lt, adv); }) == ErrorKind::insufficient_record);
}

TEST_CASE("weight telemetry is exact for a surrounded target") {
  const std::vector<AgentId> adv{2, 3, 4, 5};
  const auto t = run(fig2());
  const auto w = reconstruct_weights(observe(t, adv), 1);
  REQUIRE(w.size() == 201);
  for (Round k = 0; k <= 200; ++k) CHECK(std::abs(w[k] - t.states_at(k)[0].w) <= 1e-9);
}

TEST_CASE("reconstruction attack recovers surrounded targets") {
  SUBCASE("alternating5, adversaries 2..5") {
    auto c = fig2({2, 3, 4, 5});
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      c.seed = seed;
      const auto t = run(c);
      const double x = attack_reconstruct(observe(t, c.adversaries), 1);
      worst = std::max(worst, std::abs(x - t.initial_values[0]));
    }
    CHECK(worst < 1e-6);
  }
  SUBCASE("three agents, adversaries 2 and 3") {
    auto c = triangle();
    double worst = 0.0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      c.seed = seed;
      const auto t = run(c);
      const double x = attack_reconstruct(observe(t, c.adversaries), 1);
      worst = std::max(worst, std::abs(x - t.initial_values[0]));
    }
    CHECK(worst < 1e-6);
  }
  SUBCASE("larger K and explicit boundary values") {
    auto c = fig2({2, 3, 4, 5});
    c.params.big_k = 30;
    for (double x0 : {-50.0, 50.0, 0.0, 17.25}) {
      c.initial_values = std::vector<double>{x0, 1.0, 2.0, 3.0, 4.0};
      const auto t = run(c);
      CHECK(std::abs(attack_reconstruct(observe(t, c.adversaries), 1) - x0) < 1e-6);
    }
  }
}

TEST_CASE("reconstruction attack refuses unsupported cases") {
  const auto t = run(fig2());
  const std::vector<AgentId> one{3};
  CHECK(kind_of([&] { attack_reconstruct(observe(t, one), 1); }) == ErrorKind::attack_infeasible);

  // Too short to see a message after K.
  auto c = fig2({2, 3, 4, 5});
  c.horizon = 11;
  const auto short_t = run(c);
  CHECK(kind_of([&] { attack_reconstruct(observe(short_t, c.adversaries), 1); }) ==
        ErrorKind::attack_infeasible);

  c = fig2({2, 3, 4, 5});
  c.algorithm = Algorithm::conventional;
  const auto conv = run(c);
  CHECK(kind_of([&] { attack_reconstruct(observe(conv, c.adversaries), 1); }) ==
        ErrorKind::attack_infeasible);
}

TEST_CASE("conventional breach") {
  auto c = fig2({2});
  c.algorithm = Algorithm::conventional;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    c.seed = seed;
    const auto t = run(c);
    const double x = attack_conventional(observe(t, c.adversaries), 1);
    const double truth = t.initial_values[0];
    CHECK(std::abs(x - truth) <= 4 * std::numeric_limits<double>::epsilon() * std::abs(truth));
  }

  // Agent 1 sends only to 2 at round 0; adversary 3 sees nothing from it then.
  auto blind = fig2({3});
  blind.algorithm = Algorithm::conventional;
  const auto t = run(blind);
  CHECK(kind_of([&] { attack_conventional(observe(t, blind.adversaries), 1); }) ==
        ErrorKind::attack_infeasible);
}

TEST_CASE("conventional breach applied to confidential runs is uninformative") {
  auto c = fig2({2});
  std::vector<double> recovered;
  std::vector<double> truth;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    c.seed = seed;
    const auto t = run(c);
    recovered.push_back(attack_conventional(observe(t, c.adversaries), 1));
    truth.push_back(t.initial_values[0]);
  }
  CHECK(std::abs(correlation(recovered, truth)) < 0.1);
}

TEST_CASE("indistinguishability test") {
  auto c = fig2({3});

  SUBCASE("confidential passes") {
    const auto r = indistinguishability_test(c, 1, 2, 5.0, 400, 0.01);
    CHECK(r.pass);
    CHECK(r.statistics == r.p_values.size());
    CHECK(r.statistics > 20);
    CHECK(r.allowed_rejections >= 1);
  }
  SUBCASE("shift 0 passes trivially") {
    const auto r = indistinguishability_test(c, 1, 2, 0.0, 100, 0.01);
    CHECK(r.pass);
    CHECK(r.rejections == 0);
  }
  SUBCASE("conventional fails") {
    c.algorithm = Algorithm::conventional;
    c.adversaries = {2};
    const auto r = indistinguishability_test(c, 1, 5, 5.0, 500, 0.01);
    CHECK_FALSE(r.pass);
    CHECK(r.rejections > r.allowed_rejections);
  }
  SUBCASE("invalid pairs") {
    CHECK(kind_of([&] { indistinguishability_test(c, 1, 3, 5.0, 10, 0.01); }) ==
          ErrorKind::invalid_pair);
    CHECK(kind_of([&] { indistinguishability_test(c, 1, 1, 5.0, 10, 0.01); }) ==
          ErrorKind::invalid_pair);
    c.initial_values = std::vector<double>{48.0, 0.0, 0.0, 0.0, 0.0};
    CHECK(kind_of([&] { indistinguishability_test(c, 1, 2, 5.0, 10, 0.01); }) ==
          ErrorKind::invalid_pair);
  }
}
