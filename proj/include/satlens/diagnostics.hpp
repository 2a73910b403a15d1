#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "satlens/error.hpp"
#include "satlens/special.hpp"

namespace satlens {

struct SaturationLayer {
  std::string name;
  std::size_t width = 0;
  std::size_t k = 0;
  double saturation = 0.0;  // k / width
};

/// Per-layer saturation in forward-pass order, with the mean over layers.
struct SaturationReport {
  std::size_t epoch = 0;
  std::vector<SaturationLayer> layers;
  double mean_saturation = 0.0;

  std::vector<double> values() const {
    std::vector<double> v;
    v.reserve(layers.size());
    for (const auto& l : layers) v.push_back(l.saturation);
    return v;
  }
};

inline SaturationReport make_saturation_report(std::size_t epoch,
                                               std::vector<SaturationLayer> layers) {
  SaturationReport report;
  report.epoch = epoch;
  report.layers = std::move(layers);
  require(!report.layers.empty(), ErrorKind::TooFewLayers, "saturation report has no layers");
  double sum = 0.0;
  for (auto& l : report.layers) {
    l.saturation = static_cast<double>(l.k) / static_cast<double>(l.width);
    sum += l.saturation;
  }
  report.mean_saturation = sum / static_cast<double>(report.layers.size());
  return report;
}

/// A run of at least 3 consecutive layers whose mean saturation is at most
/// half the mean saturation of all layers outside the run.
struct TailPattern {
  std::size_t start = 0;  // inclusive
  std::size_t end = 0;    // inclusive
  double tail_mean = 0.0;
  double rest_mean = 0.0;

  std::size_t length() const noexcept { return end - start + 1; }
};

namespace detail {

// A window qualifies when every layer inside it sits at or below half the
// mean saturation of the layers outside it (which implies the tail-mean
// condition). The window must leave a nonempty rest.
inline bool tail_window_qualifies(const std::vector<double>& s, std::size_t i, std::size_t j) {
  const std::size_t n = s.size();
  const std::size_t len = j - i + 1;
  if (len < 3 || len >= n) return false;
  double outside = 0.0;
  double peak = s[i];
  for (std::size_t t = 0; t < n; ++t) {
    if (t >= i && t <= j)
      peak = std::max(peak, s[t]);
    else
      outside += s[t];
  }
  const double rest_mean = outside / static_cast<double>(n - len);
  return peak <= 0.5 * rest_mean;
}

}  // namespace detail

/// All maximal qualifying tail windows, ordered by start index. Maximal
/// means the window cannot be extended in either direction and still
/// qualify. The rest-of-network mean is recomputed per window.
inline std::vector<TailPattern> detect_tails(const std::vector<double>& saturations) {
  const std::size_t n = saturations.size();
  require(n >= 4, ErrorKind::TooFewLayers,
          "tail detection needs at least 4 layers, got " + std::to_string(n));

  std::vector<TailPattern> tails;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (!detail::tail_window_qualifies(saturations, i, j)) continue;
      const bool left_extends = i > 0 && detail::tail_window_qualifies(saturations, i - 1, j);
      const bool right_extends =
          j + 1 < n && detail::tail_window_qualifies(saturations, i, j + 1);
      if (left_extends || right_extends) continue;

      TailPattern tail;
      tail.start = i;
      tail.end = j;
      double inside = 0.0, outside = 0.0;
      for (std::size_t t = 0; t < n; ++t) {
        if (t >= i && t <= j)
          inside += saturations[t];
        else
          outside += saturations[t];
      }
      tail.tail_mean = inside / static_cast<double>(tail.length());
      tail.rest_mean = outside / static_cast<double>(n - tail.length());
      tails.push_back(tail);
    }
  }
  return tails;
}

/// Paired two-tailed Student t-test over (projected, base) accuracy pairs.
struct TTestResult {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double stddev = 0.0;  // sample (n-1) standard deviation of the differences
  double t = 0.0;
  double p = 1.0;
};

inline TTestResult paired_t_test(const std::vector<std::pair<double, double>>& pairs) {
  const std::size_t n = pairs.size();
  require(n >= 2, ErrorKind::TooFewPairs, "paired t-test needs at least 2 pairs");

  std::vector<double> diffs(n);
  for (std::size_t i = 0; i < n; ++i) diffs[i] = pairs[i].first - pairs[i].second;

  double mean = 0.0;
  for (double d : diffs) mean += d;
  mean /= static_cast<double>(n);

  double ss = 0.0;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  const double stddev = std::sqrt(ss / static_cast<double>(n - 1));
  require(stddev > 0.0, ErrorKind::ZeroVariance,
          "all paired differences are equal; the t statistic is undefined");

  TTestResult result;
  result.n = n;
  result.mean_diff = mean;
  result.stddev = stddev;
  result.t = mean / (stddev / std::sqrt(static_cast<double>(n)));
  result.p = two_tailed_t_p(result.t, static_cast<int>(n - 1));
  return result;
}

/// Projected accuracy divided by baseline accuracy; may exceed 1 when the
/// projection helps.
inline double relative_performance(double projected_acc, double base_acc) {
  require(base_acc > 0.0, ErrorKind::DegenerateBaseline,
          "relative performance is undefined for a zero baseline");
  return projected_acc / base_acc;
}

/// One row of the delta-sweep table.
struct DeltaRow {
  double delta = 0.0;
  std::size_t n = 0;
  double mean_diff = 0.0;
  double stddev = 0.0;
  double t = 0.0;
  double p = 1.0;
  bool zero_variance = false;
};

struct MinDeltaResult {
  double selected = 0.0;
  std::vector<DeltaRow> table;
};

/// Smallest delta whose projected-vs-base difference is not statistically
/// significant at `alpha`. A delta where the two runs coincide exactly
/// (zero-variance, zero-mean differences) qualifies and is flagged.
inline MinDeltaResult min_delta_search(
    const std::vector<std::pair<double, std::vector<std::pair<double, double>>>>& runs_per_delta,
    double alpha = 0.01) {
  require(!runs_per_delta.empty(), ErrorKind::DomainError, "no deltas supplied");
  require(alpha > 0.0 && alpha < 1.0, ErrorKind::DomainError, "alpha must lie in (0, 1)");
  for (std::size_t i = 1; i < runs_per_delta.size(); ++i)
    require(runs_per_delta[i - 1].first < runs_per_delta[i].first, ErrorKind::DomainError,
            "deltas must be sorted ascending");

  MinDeltaResult result;
  bool found = false;
  for (const auto& [delta, pairs] : runs_per_delta) {
    DeltaRow row;
    row.delta = delta;
    row.n = pairs.size();
    bool qualifies = false;
    try {
      const TTestResult tt = paired_t_test(pairs);
      row.mean_diff = tt.mean_diff;
      row.stddev = tt.stddev;
      row.t = tt.t;
      row.p = tt.p;
      qualifies = tt.p >= alpha;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::ZeroVariance) throw;
      row.zero_variance = true;
      double mean = 0.0;
      for (const auto& [proj, base] : pairs) mean += proj - base;
      mean /= static_cast<double>(pairs.size());
      row.mean_diff = mean;
      row.p = mean == 0.0 ? 1.0 : 0.0;
      qualifies = mean == 0.0;
    }
    result.table.push_back(row);
    if (qualifies && !found) {
      result.selected = delta;
      found = true;
    }
  }
  require(found, ErrorKind::NoQualifyingDelta,
          "every tested delta changed performance significantly");
  return result;
}

enum class WidthAdvice { shrink, keep, grow };

inline const char* to_string(WidthAdvice a) {
  switch (a) {
    case WidthAdvice::shrink: return "shrink";
    case WidthAdvice::keep: return "keep";
    case WidthAdvice::grow: return "grow";
  }
  return "unknown";
}

struct WidthRecommendation {
  WidthAdvice advice = WidthAdvice::keep;
  double factor = 1.0;  // suggested width multiplier
};

/// Width advisory from mean saturation: the 20-30% band is the sweet spot;
/// outside it the suggested multiplier s_mu/0.25 is snapped to the nearest
/// power of two on the tested grid (1, 1/2, 1/4, 1/8 when shrinking, 1..8
/// when growing).
inline WidthRecommendation width_advice(double s_mu) {
  require(s_mu > 0.0 && s_mu <= 1.0, ErrorKind::DomainError,
          "mean saturation must lie in (0, 1]");
  WidthRecommendation rec;
  if (s_mu >= 0.20 && s_mu <= 0.30) {
    rec.advice = WidthAdvice::keep;
    rec.factor = 1.0;
    return rec;
  }
  const double ratio = s_mu / 0.25;
  const double snapped_log = std::round(std::log2(ratio));
  if (s_mu < 0.20) {
    rec.advice = WidthAdvice::shrink;
    const double clamped = std::min(0.0, std::max(-3.0, snapped_log));
    rec.factor = std::exp2(clamped);
  } else {
    rec.advice = WidthAdvice::grow;
    const double clamped = std::max(0.0, std::min(3.0, snapped_log));
    rec.factor = std::exp2(clamped);
  }
  return rec;
}

}  // namespace satlens
