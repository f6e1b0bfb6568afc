#include "cps/metrics.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>

#include <fmt/core.h>

#include "cps/error.hpp"
#include "cps/pushsum.hpp"
#include "cps/simulation.hpp"

namespace cps {

double error_norm(std::span<const double> estimates, double true_mean) {
  double sq = 0.0;
  for (double pi : estimates) sq += (pi - true_mean) * (pi - true_mean);
  return std::sqrt(sq);
}

RateBound theoretical_rate(double epsilon, unsigned t_bound, std::size_t n) {
  if (!(epsilon > 0.0 && epsilon < 1.0) || t_bound < 1 || n < 2) {
    throw Error(ErrorKind::out_of_range,
                fmt::format("rate bound needs eps in (0,1), T >= 1, N >= 2; got {}, {}, {}",
                            epsilon, t_bound, n));
  }
  const double m = static_cast<double>(t_bound) * static_cast<double>(n - 1);
  const double log_x = m * std::log(epsilon);  // ln eps^M
  const double x = std::exp(log_x);
  const double log_gamma = std::log1p(-x) / m;

  RateBound r;
  r.gamma = std::exp(log_gamma);
  r.one_minus_gamma = -std::expm1(log_gamma);
  r.log_one_minus_gamma =
      r.one_minus_gamma >= DBL_MIN ? std::log(r.one_minus_gamma) : log_x - std::log(m);
  r.log_c0 = std::log(2.0) - log_x + std::log1p(x) - std::log1p(-x);
  r.c0 = std::exp(r.log_c0);
  r.vacuous = x < DBL_EPSILON;
  return r;
}

double estimate_rate(std::span<const double> errors, std::size_t window_start,
                     std::size_t window_end) {
  if (window_end > errors.size() || window_end < window_start + 2) {
    throw Error(ErrorKind::fit_degenerate,
                fmt::format("fit window [{}, {}) needs two points inside {} rounds",
                            window_start, window_end, errors.size()));
  }
  const auto count = static_cast<double>(window_end - window_start);
  double mean_k = 0.0;
  double mean_y = 0.0;
  for (std::size_t k = window_start; k < window_end; ++k) {
    if (!(errors[k] > 0.0)) {
      throw Error(ErrorKind::fit_degenerate, fmt::format("e({}) = {} is not positive", k, errors[k]));
    }
    mean_k += static_cast<double>(k);
    mean_y += std::log(errors[k]);
  }
  mean_k /= count;
  mean_y /= count;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = window_start; k < window_end; ++k) {
    const double dk = static_cast<double>(k) - mean_k;
    sxy += dk * (std::log(errors[k]) - mean_y);
    sxx += dk * dk;
  }
  return std::exp(sxy / sxx);
}

std::optional<FitWindow> default_fit_window(std::span<const double> errors, Round big_k) {
  const std::size_t start = static_cast<std::size_t>(big_k) + 2;
  if (start >= errors.size()) return std::nullopt;
  std::size_t end = start;
  while (end < errors.size() && errors[end] >= 1e-10) ++end;
  if (end < start + 2) return std::nullopt;
  return FitWindow{start, end};
}

std::optional<std::size_t> converged_at(std::span<const double> errors, double tolerance,
                                        std::size_t persist) {
  std::size_t run = 0;
  for (std::size_t k = 0; k < errors.size(); ++k) {
    run = errors[k] < tolerance ? run + 1 : 0;
    if (run == persist) return k + 1 - persist;
  }
  return std::nullopt;
}

std::string Violation::describe() const {
  if (agent) {
    return fmt::format("{} at round {} agent {}: value {:.17g}, limit {:.17g}", check, round,
                       *agent, value, limit);
  }
  return fmt::format("{} at round {}: value {:.17g}, limit {:.17g}", check, round, value, limit);
}

namespace {

double circular_distance(double u, double v) {
  const double d = std::abs(u - v);
  return std::min(d, 1.0 - d);
}

double sum_s(const std::vector<AgentState>& states) {
  double total = 0.0;
  for (const auto& st : states) total += st.s;
  return total;
}

double sum_w(const std::vector<AgentState>& states) {
  double total = 0.0;
  for (const auto& st : states) total += st.w;
  return total;
}

}  // namespace

std::vector<Violation> audit_transcript(const Transcript& transcript, AuditOptions options) {
  std::vector<Violation> out;
  const auto& params = transcript.config.params;
  const std::size_t n = transcript.n_agents();
  const auto n_rounds = static_cast<Round>(transcript.n_rounds());
  const double tol = 1e-9 * static_cast<double>(n);
  const bool confidential = transcript.config.algorithm == Algorithm::confidential;

  std::optional<double> weight_floor;
  if (transcript.interval_bound && n >= 2) {
    weight_floor = std::pow(params.epsilon, static_cast<double>(*transcript.interval_bound) *
                                               static_cast<double>(n - 1));
  }

  for (Round k = 0; k <= n_rounds; ++k) {
    const auto& states = transcript.states_at(k);

    const double w_total = sum_w(states);
    if (!(std::abs(w_total - static_cast<double>(n)) <= tol)) {
      out.push_back({"weight_sum", k, std::nullopt, w_total, static_cast<double>(n)});
    }

    if (k >= 1 && weight_floor) {
      for (const auto& st : states) {
        if (!(st.w >= *weight_floor)) {
          out.push_back({"weight_floor", k, st.agent_id, st.w, *weight_floor});
        }
      }
    }

    if (k >= 1) {
      const auto& prev = transcript.states_at(k - 1);
      if (confidential && k <= params.big_k + 1) {
        const double cur = frac(sum_s(states));
        const double before = frac(sum_s(prev));
        if (!(circular_distance(cur, before) <= tol)) {
          out.push_back({"frac_sum", k, std::nullopt, cur, before});
        }
      }
      const Round linear_from = confidential ? params.big_k + 1 : 0;
      if (k > linear_from && linear_from <= n_rounds) {
        const double ref = sum_s(transcript.states_at(linear_from));
        const double cur = sum_s(states);
        if (!(std::abs(cur - ref) <= tol)) {
          out.push_back({"mass_sum", k, std::nullopt, cur, ref});
        }
      }
    }
  }

  if (transcript.record == RecordMode::full) {
    for (const auto& record : transcript.rounds) {
      const EdgeSet& edges = transcript.config.schedule->edges_at(record.round);
      for (const auto& wv : record.weights) {
        double col = 0.0;
        for (const auto& e : wv.entries) {
          col += e.p;
          if (!(e.p > 0.0)) {
            out.push_back({"weight_positive", record.round, wv.owner, e.p, 0.0});
          }
        }
        if (!(std::abs(col - 1.0) <= 1e-12)) {
          out.push_back({"column_stochastic", record.round, wv.owner, col, 1.0});
        }
      }
      for (const auto& m : record.messages) {
        if (!edges.contains({m.receiver, m.sender})) {
          out.push_back({"message_edge", record.round, m.sender,
                         static_cast<double>(m.receiver), 0.0});
        }
      }
      if (record.messages.size() != edges.size()) {
        out.push_back({"message_count", record.round, std::nullopt,
                       static_cast<double>(record.messages.size()),
                       static_cast<double>(edges.size())});
      }
    }

    if (options.check_products && n_rounds > 0) {
      const Round last = std::min<Round>(options.product_rounds, n_rounds) - 1;
      const Eigen::MatrixXd phi = transition_product(transcript, last, 0);
      for (Eigen::Index j = 0; j < phi.cols(); ++j) {
        const double col = phi.col(j).sum();
        if (!(std::abs(col - 1.0) <= 1e-10)) {
          out.push_back({"transition_product", last, static_cast<AgentId>(j + 1), col, 1.0});
        }
      }
    }
  }
  return out;
}

Eigen::MatrixXd transition_product(const Transcript& transcript, Round last, Round first) {
  if (first > last) {
    throw Error(ErrorKind::invalid_query,
                fmt::format("transition product needs first <= last, got {} > {}", first, last));
  }
  Eigen::MatrixXd phi = transcript.realized_weight_matrix(first);
  for (Round k = first + 1; k <= last; ++k) {
    phi = transcript.realized_weight_matrix(k) * phi;
  }
  return phi;
}

ConvergenceReport convergence_report(const Transcript& transcript) {
  ConvergenceReport report;
  report.error_series = transcript.errors;
  const auto& params = transcript.config.params;
  if (transcript.interval_bound) {
    const RateBound bound =
        theoretical_rate(params.epsilon, *transcript.interval_bound, transcript.n_agents());
    report.gamma_theoretical = bound.gamma;
    report.one_minus_gamma_theoretical = bound.one_minus_gamma;
    report.c0 = bound.c0;
    report.bound_vacuous = bound.vacuous;
  }
  const Round fit_from =
      transcript.config.algorithm == Algorithm::confidential ? params.big_k : 0;
  if (auto window = default_fit_window(transcript.errors, fit_from)) {
    const double g = estimate_rate(transcript.errors, window->start, window->end);
    if (g > 0.0 && g < 1.0) report.gamma_hat = g;
  }
  report.converged_at = converged_at(transcript.errors);
  report.invariant_violations = audit_transcript(transcript);
  return report;
}

std::vector<SweepRow> epsilon_sweep(const ScenarioConfig& config,
                                    std::span<const double> epsilon_grid, std::size_t trials) {
  std::vector<SweepRow> rows;
  for (double eps : epsilon_grid) {
    SweepRow row;
    row.epsilon = eps;
    ScenarioConfig c = config;
    c.params.epsilon = eps;
    c.record = RecordMode::states_only;
    // The default fit window ends at the first e(k) < 1e-10, so nothing past
    // that point is needed.
    if (c.stop_tolerance == 0.0) c.stop_tolerance = 1e-10;
    try {
      validate(c);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::configuration) throw;
      row.feasible = false;
      row.gamma_mean = std::nan("");
      row.gamma_var = std::nan("");
      rows.push_back(row);
      continue;
    }

    std::vector<double> gammas;
    for (const auto& t : run_trials(c, trials)) {
      const Round fit_from = c.algorithm == Algorithm::confidential ? c.params.big_k : 0;
      if (auto window = default_fit_window(t.errors, fit_from)) {
        gammas.push_back(estimate_rate(t.errors, window->start, window->end));
      }
    }
    row.trials = gammas.size();
    if (!gammas.empty()) {
      double mean = 0.0;
      for (double g : gammas) mean += g;
      mean /= static_cast<double>(gammas.size());
      double var = 0.0;
      for (double g : gammas) var += (g - mean) * (g - mean);
      row.gamma_mean = mean;
      row.gamma_var = gammas.size() > 1 ? var / static_cast<double>(gammas.size() - 1) : 0.0;
    } else {
      row.gamma_mean = std::nan("");
      row.gamma_var = std::nan("");
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace cps
