#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cps/graph_schedule.hpp"
#include "cps/pushsum.hpp"
#include "cps/simulation.hpp"

namespace cps {

// Everything a colluding set can see: its own states, every message it sends
// or receives, and the public constants. Nothing travelling between two
// honest agents is included.
struct AdversaryView {
  std::vector<AgentId> adversaries;  // sorted
  ProtocolParams params;
  Algorithm algorithm = Algorithm::confidential;
  std::shared_ptr<const GraphSchedule> schedule;
  Round n_rounds = 0;
  // own_states[k] holds the adversaries' states at round k, k = 0..n_rounds.
  std::vector<std::vector<AgentState>> own_states;
  // messages[k] holds the adversary-incident messages of round k.
  std::vector<std::vector<RoundMessage>> messages;

  bool is_adversary(AgentId id) const;
};

enum class Verdict { protected_target, vulnerable, unknown };

std::string_view to_string(Verdict verdict);

struct PrivacyVerdict {
  AgentId target = 0;
  Verdict verdict = Verdict::unknown;
  // Honest neighbor l and round k* <= K; present iff protected.
  std::optional<std::pair<AgentId, Round>> witness;
};

// Protected: some honest l is an in- or out-neighbor of the target at a round
// k* <= K. Vulnerable: every neighbor of the target at every round (scanned
// over prefix + one period + K rounds) is an adversary. Unknown otherwise.
PrivacyVerdict privacy_condition(const GraphSchedule& schedule,
                                 std::span<const AgentId> adversaries, AgentId target,
                                 const ProtocolParams& params);

AdversaryView observe(const Transcript& transcript, std::span<const AgentId> adversaries);

// Weight trajectory w_i(0..n_rounds) of the target rebuilt from w(0) = 1 and
// the observed weight flux. Exact only when every neighbor of the target is an
// adversary.
std::vector<double> reconstruct_weights(const AdversaryView& view, AgentId target);

// Recovers x_i(0) of a fully surrounded target of confidential push-sum.
double attack_reconstruct(const AdversaryView& view, AgentId target);

// Ratio delta_s / delta_w of a round-0 message from the target to the
// adversaries; equals x_i(0) under conventional push-sum.
double attack_conventional(const AdversaryView& view, AgentId target);

struct IndistinguishabilityResult {
  bool pass = false;
  std::size_t statistics = 0;
  std::size_t rejections = 0;
  std::size_t allowed_rejections = 0;
  double rejection_fraction = 0.0;
  std::vector<std::pair<std::string, double>> p_values;
};

// Runs `trials` simulations under x and under the shifted x~ (x~_target =
// x_target + shift, x~_partner = x_partner - shift) and KS-tests every scalar
// the adversaries observe on rounds 0..K+2 (delta_s, delta_w and their
// ratio per message) plus their final estimates. Passes
// iff rejections <= max(1, ceil(2 * significance * statistics)).
IndistinguishabilityResult indistinguishability_test(const ScenarioConfig& base, AgentId target,
                                                     AgentId partner, double shift,
                                                     std::size_t trials, double significance);

}  // namespace cps
