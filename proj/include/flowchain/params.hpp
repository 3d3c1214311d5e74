#pragma once

#include <string_view>

namespace flowchain {

/// Two-point moment growth constants: for all x, y, T and q >= 1,
///   (E sup_{t<=T} rho(phi_t(x), phi_t(y))^q)^{1/q} <= cbar |x - y| exp((lambda + q sigma^2 / 2) T).
struct HParams {
  double lambda = 0.0;  // drift exponent, 1/time
  double sigma = 1.0;   // volatility, 1/sqrt(time)
  double cbar = 1.0;    // moment constant
  int dim = 1;          // spatial dimension d

  void validate() const;
};

/// Chaining argument used to turn (H) into a small-ball tail bound.
enum class Route { kolmogorov, basic, lt };

std::string_view route_name(Route route);
Route parse_route(std::string_view name);

}  // namespace flowchain
