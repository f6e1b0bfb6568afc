#include "cps/error.hpp"

namespace cps {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_edge: return "invalid-edge";
    case ErrorKind::unknown_schedule: return "unknown-schedule";
    case ErrorKind::domain: return "domain";
    case ErrorKind::out_of_range: return "out-of-range";
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::validation: return "validation";
    case ErrorKind::assumption: return "assumption";
    case ErrorKind::invalid_query: return "invalid-query";
    case ErrorKind::insufficient_record: return "insufficient-record";
    case ErrorKind::attack_infeasible: return "attack-infeasible";
    case ErrorKind::invalid_pair: return "invalid-pair";
    case ErrorKind::fit_degenerate: return "fit-degenerate";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

}  // namespace cps
