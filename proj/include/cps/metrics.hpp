#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cps/graph_schedule.hpp"

namespace cps {

struct Transcript;

// Euclidean distance between the estimates and the true mean.
double error_norm(std::span<const double> estimates, double true_mean);

// Worst-case rate gamma = (1 - eps^M)^(1/M), M = T (N - 1), and the constant
// C0 = 2 (1 + eps^-M) / (1 - eps^M).
//
// gamma sits within eps^M / M of 1, which for realistic parameters is far
// below double resolution near 1, so the deficit 1 - gamma is carried
// separately (and in log form) and never recovered from gamma itself.
struct RateBound {
  double gamma = 0.0;
  double one_minus_gamma = 0.0;
  double log_one_minus_gamma = 0.0;
  double c0 = 0.0;
  double log_c0 = 0.0;
  // eps^M is below machine epsilon: gamma rounds to (or next to) 1.
  bool vacuous = false;
};

RateBound theoretical_rate(double epsilon, unsigned t_bound, std::size_t n);

// exp(slope) of the least-squares fit of ln e(k) against k over
// [window_start, window_end). Throws fit-degenerate on a non-positive error
// or fewer than two points.
double estimate_rate(std::span<const double> errors, std::size_t window_start,
                     std::size_t window_end);

struct FitWindow {
  std::size_t start = 0;
  std::size_t end = 0;
};

// [K + 2, first k >= K + 2 with e(k) < 1e-10); empty when fewer than two
// points remain.
std::optional<FitWindow> default_fit_window(std::span<const double> errors, Round big_k);

// First k with e(k) < tolerance that stays below it for `persist`
// consecutive rounds.
std::optional<std::size_t> converged_at(std::span<const double> errors,
                                        double tolerance = 1e-6, std::size_t persist = 5);

struct Violation {
  std::string check;
  Round round = 0;
  std::optional<AgentId> agent;
  double value = 0.0;
  double limit = 0.0;

  std::string describe() const;
};

struct AuditOptions {
  // Also multiply recorded P(k) matrices into transition products Phi and
  // check their columns.
  bool check_products = false;
  std::size_t product_rounds = 10;
};

// Reports (never throws) every conservation, weight-bound and stochasticity
// violation in the transcript.
std::vector<Violation> audit_transcript(const Transcript& transcript, AuditOptions options = {});

// Phi(last:first) = P(last) ... P(first), from a full-record transcript.
Eigen::MatrixXd transition_product(const Transcript& transcript, Round last, Round first);

struct ConvergenceReport {
  std::vector<double> error_series;
  double gamma_theoretical = 0.0;
  double one_minus_gamma_theoretical = 0.0;
  double c0 = 0.0;
  bool bound_vacuous = false;
  std::optional<double> gamma_hat;
  std::optional<std::size_t> converged_at;
  std::vector<Violation> invariant_violations;
};

ConvergenceReport convergence_report(const Transcript& transcript);

struct ScenarioConfig;

struct SweepRow {
  double epsilon = 0.0;
  bool feasible = true;
  double gamma_mean = 0.0;
  double gamma_var = 0.0;
  // Trials that produced a rate estimate.
  std::size_t trials = 0;
};

// For each epsilon, runs `trials` seeds (seed + t) and summarizes the fitted
// rate. Infeasible epsilons produce a row with feasible = false.
std::vector<SweepRow> epsilon_sweep(const ScenarioConfig& config,
                                    std::span<const double> epsilon_grid, std::size_t trials);

}  // namespace cps
