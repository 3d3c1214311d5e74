#include "flowchain/stats.hpp"

#include <boost/math/special_functions/beta.hpp>
#include <stdexcept>

namespace flowchain::stats {

ConfidenceInterval clopper_pearson(std::uint64_t successes, std::uint64_t trials, double level) {
  if (trials == 0) throw std::invalid_argument("clopper_pearson: zero trials");
  if (successes > trials) throw std::invalid_argument("clopper_pearson: successes > trials");
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument("clopper_pearson: level must be in (0, 1)");
  }
  const double alpha = 1.0 - level;
  const double k = static_cast<double>(successes);
  const double n = static_cast<double>(trials);
  ConfidenceInterval ci;
  ci.low = successes == 0 ? 0.0 : boost::math::ibeta_inv(k, n - k + 1.0, 0.5 * alpha);
  ci.high = successes == trials ? 1.0 : boost::math::ibeta_inv(k + 1.0, n - k, 1.0 - 0.5 * alpha);
  return ci;
}

}  // namespace flowchain::stats
