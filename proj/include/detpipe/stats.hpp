#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "detpipe/error.hpp"

namespace detpipe {

/// Nearest-rank percentile: the element at 1-based index ceil(q * n) of the
/// sorted sample, clamped to [1, n]. This is the single percentile definition
/// used everywhere in the toolkit.
inline double nearest_rank(std::span<const double> sorted, double q) {
  if (sorted.empty()) fail(Errc::invalid_argument, "percentile of empty sample");
  auto n = double(sorted.size());
  auto rank = size_t(std::ceil(q * n));
  rank = std::clamp<size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

inline double nearest_rank_copy(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  return nearest_rank(values, q);
}

/// Median with the usual average-of-middles rule for even-sized samples.
inline double median_sorted(std::span<const double> sorted) {
  if (sorted.empty()) fail(Errc::invalid_argument, "median of empty sample");
  size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  return 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

struct Moments {
  double mean = 0.0;
  double stddev = 0.0;  // population
  double min = 0.0;
  double max = 0.0;
};

inline Moments moments(std::span<const double> values) {
  if (values.empty()) fail(Errc::invalid_argument, "moments of empty sample");
  Moments m;
  m.min = values.front();
  m.max = values.front();
  double sum = 0.0;
  for (double v : values) {
    sum += v;
    m.min = std::min(m.min, v);
    m.max = std::max(m.max, v);
  }
  m.mean = sum / double(values.size());
  double acc = 0.0;
  for (double v : values) acc += (v - m.mean) * (v - m.mean);
  m.stddev = std::sqrt(acc / double(values.size()));
  return m;
}

}  // namespace detpipe
