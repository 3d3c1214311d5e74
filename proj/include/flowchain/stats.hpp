#pragma once

#include <cstdint>

namespace flowchain::stats {

struct ConfidenceInterval {
  double low = 0.0;
  double high = 1.0;
};

/// Exact (Clopper-Pearson) two-sided interval for a binomial proportion at the given
/// confidence level, e.g. 0.99.
ConfidenceInterval clopper_pearson(std::uint64_t successes, std::uint64_t trials, double level);

}  // namespace flowchain::stats
