#include "wrecksim/rng.hpp"

#include <cmath>

namespace wrecksim {

double Rng::rayleigh(double sigma) {
  // Inverse CDF; 1 - u lies in (0, 1] so the log is finite.
  const double u = uniform();
  return sigma * std::sqrt(-2.0 * std::log1p(-u));
}

}  // namespace wrecksim
