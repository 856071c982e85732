#include "dvdn/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace dvdn {

double mean_of(std::span<const double> samples) {
  double acc = 0.0;
  for (double s : samples) acc += s;
  return acc / static_cast<double>(samples.size());
}

namespace {

double resampled_mean(std::span<const double> samples, Rng& rng) {
  const int n = static_cast<int>(samples.size());
  double acc = 0.0;
  for (int i = 0; i < n; ++i) acc += samples[rng.uniform_int(n)];
  return acc / n;
}

Interval percentile_interval(std::vector<double>& stats, double level) {
  std::sort(stats.begin(), stats.end());
  const double alpha = (1.0 - level) / 2.0;
  const double last = static_cast<double>(stats.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(alpha * last));
  const auto hi = static_cast<std::size_t>(std::ceil((1.0 - alpha) * last));
  return {stats[lo], stats[hi]};
}

}  // namespace

Interval bootstrap_ci(std::span<const double> samples, double level,
                      int resamples, Rng& rng) {
  if (samples.size() < 2)
    throw std::invalid_argument("bootstrap_ci: need at least two samples");
  if (level <= 0.0 || level >= 1.0 || resamples < 1)
    throw std::invalid_argument("bootstrap_ci: bad level or resample count");
  if (std::all_of(samples.begin(), samples.end(),
                  [&](double s) { return s == samples[0]; }))
    return {samples[0], samples[0]};  // degenerate: zero width at the value
  std::vector<double> means(resamples);
  for (double& m : means) m = resampled_mean(samples, rng);
  return percentile_interval(means, level);
}

std::string to_string(RankResult r) {
  switch (r) {
    case RankResult::matches:
      return "matches";
    case RankResult::outperforms:
      return "outperforms";
    default:
      return "underperforms";
  }
}

RankResult rank_compare(std::span<const double> a, std::span<const double> b,
                        Rng& rng, double level, int resamples) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("rank_compare: empty sample set");
  std::vector<double> diffs(resamples);
  for (double& d : diffs) d = resampled_mean(a, rng) - resampled_mean(b, rng);
  const Interval ci = percentile_interval(diffs, level);
  if (ci.low <= 0.0 && ci.high >= 0.0) return RankResult::matches;
  return ci.low > 0.0 ? RankResult::outperforms : RankResult::underperforms;
}

}  // namespace dvdn
