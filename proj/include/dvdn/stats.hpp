#pragma once

// Bootstrap statistics used by the evaluation protocol.

#include <span>
#include <string>

#include "dvdn/rng.hpp"

namespace dvdn {

double mean_of(std::span<const double> samples);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

// Percentile bootstrap of the mean. Deterministic given the rng. Requires
// at least two samples; an all-equal sample yields a zero-width interval.
Interval bootstrap_ci(std::span<const double> samples, double level,
                      int resamples, Rng& rng);

enum class RankResult { matches, outperforms, underperforms };

std::string to_string(RankResult r);

// Bootstrap test on the difference of means at the given level: "matches"
// when zero lies inside the difference CI, otherwise the CI's side decides.
RankResult rank_compare(std::span<const double> a, std::span<const double> b,
                        Rng& rng, double level = 0.95, int resamples = 20000);

}  // namespace dvdn
