#include "mmsb/bridge.hpp"

namespace mmsb {

std::string_view to_string(CostScale scale) {
  switch (scale) {
    case CostScale::None: return "none";
    case CostScale::Mean: return "mean";
    case CostScale::Max: return "max";
  }
  return "none";
}

CostScale parse_cost_scale(std::string_view name) {
  if (name == "none") return CostScale::None;
  if (name == "mean") return CostScale::Mean;
  if (name == "max") return CostScale::Max;
  throw Error(ErrorKind::Validation, "cost_scale must be none, mean or max; got '" +
                                         std::string(name) + "'");
}

void validate(const SolverConfig& cfg) {
  if (!(cfg.epsilon > 0.0) || !std::isfinite(cfg.epsilon)) {
    throw Error(ErrorKind::Validation, "epsilon must be positive and finite");
  }
  if (!(cfg.tolerance > 0.0)) throw Error(ErrorKind::Validation, "tolerance must be positive");
  if (cfg.max_iterations < 1) throw Error(ErrorKind::Validation, "max_iterations must be positive");
}

}  // namespace mmsb
