#include "mmsb/evaluate.hpp"

#include <sstream>

namespace mmsb {

std::size_t find_held_out(const HeldOutMeasures& held_out, double tau, double tolerance) {
  for (std::size_t k = 0; k < held_out.times.size(); ++k) {
    if (std::abs(held_out.times[k] - tau) <= tolerance * std::max(1.0, std::abs(tau))) return k;
  }
  std::ostringstream msg;
  msg << "no held-out measure at query time " << tau;
  throw Error(ErrorKind::Coverage, msg.str());
}

}  // namespace mmsb
