#include "sqz/common/rng.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "sqz/common/error.hpp"

namespace sqz {

double Rng::normal() {
  // 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << engine_;
  return os.str();
}

void Rng::load_state(const std::string& state) {
  std::istringstream is(state);
  is >> engine_;
  if (!is) throw IoError("corrupt RNG state");
}

}  // namespace sqz
