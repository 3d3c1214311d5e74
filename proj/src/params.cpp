#include "flowchain/params.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace flowchain {

void HParams::validate() const {
  if (!(std::isfinite(lambda) && lambda >= 0.0)) {
    throw std::invalid_argument("HParams: lambda must be finite and >= 0");
  }
  if (!(std::isfinite(sigma) && sigma > 0.0)) {
    throw std::invalid_argument("HParams: sigma must be > 0 (every rate divides by sigma^2)");
  }
  if (!(std::isfinite(cbar) && cbar >= 1.0)) {
    throw std::invalid_argument("HParams: cbar must be >= 1");
  }
  if (dim < 1) throw std::invalid_argument("HParams: dim must be >= 1");
}

std::string_view route_name(Route route) {
  switch (route) {
    case Route::kolmogorov:
      return "kolmogorov";
    case Route::basic:
      return "basic";
    case Route::lt:
      return "lt";
  }
  return "unknown";
}

Route parse_route(std::string_view name) {
  if (name == "kolmogorov") return Route::kolmogorov;
  if (name == "basic") return Route::basic;
  if (name == "lt") return Route::lt;
  throw std::invalid_argument("unknown route '" + std::string(name) +
                              "' (expected kolmogorov, basic or lt)");
}

}  // namespace flowchain
