#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "prbcount/core.hpp"

// Extrapolation-factor calibration against a reference count series (camera
// system or simulator ground truth): calendar preprocessing, the scalar
// least-squares fit of the global factor, RMSE/MAPE evaluation and windowed
// (e.g. weekly) fitting.

namespace prbcount {

struct SeriesSample {
  std::int64_t ts = 0;
  double value = 0.0;
};

using CountSeries = std::vector<SeriesSample>;

// Aligned (reference, measured) pair; entry i of both vectors shares ts[i].
struct CountPair {
  std::vector<std::int64_t> ts;
  std::vector<double> reference;
  std::vector<double> measured;

  std::size_t size() const { return ts.size(); }
};

struct CalendarConfig {
  std::optional<std::int64_t> first_day;  // days since epoch, inclusive
  std::optional<std::int64_t> last_day;   // inclusive
  std::vector<std::int64_t> excluded_days;
  // [start, end] seconds of day, inclusive; e.g. 9:00-18:00 opening hours.
  std::optional<std::pair<std::int32_t, std::int32_t>> daily_window;

  enum class Downsample { point, mean };
  Downsample downsample = Downsample::point;
};

namespace detail {

inline bool calendar_keep(std::int64_t ts, const CalendarConfig& cfg) {
  const std::int64_t day = floor_div(ts, 86400);
  if (cfg.first_day && day < *cfg.first_day) return false;
  if (cfg.last_day && day > *cfg.last_day) return false;
  for (std::int64_t d : cfg.excluded_days)
    if (day == d) return false;
  if (cfg.daily_window) {
    const std::int64_t tod = ts - day * 86400;
    if (tod < cfg.daily_window->first || tod > cfg.daily_window->second) return false;
  }
  return true;
}

inline CountSeries calendar_filter(const CountSeries& in, const CalendarConfig& cfg) {
  CountSeries out;
  out.reserve(in.size());
  for (const auto& s : in)
    if (calendar_keep(s.ts, cfg)) out.push_back(s);
  return out;
}

// Most common gap between consecutive samples; 0 for fewer than 2 samples.
// Duplicate timestamps are an error.
inline std::int64_t infer_cadence(const CountSeries& s) {
  if (s.size() < 2) return 0;
  std::map<std::int64_t, std::size_t> gaps;
  for (std::size_t i = 1; i < s.size(); ++i) {
    const std::int64_t d = s[i].ts - s[i - 1].ts;
    if (d <= 0)
      throw std::invalid_argument("duplicate timestamp " + std::to_string(s[i].ts) +
                                  " in count series");
    ++gaps[d];
  }
  std::int64_t best = 0;
  std::size_t best_n = 0;
  for (const auto& [gap, n] : gaps)
    if (n > best_n) { best = gap; best_n = n; }
  return best;
}

}  // namespace detail

// Applies the calendar restrictions to both series, downsamples the finer
// series by the integer cadence ratio so both share the coarse cadence, and
// inner-joins on timestamps. Point downsampling keeps the sample at the
// coarse timestamp; mean downsampling averages the coarse step ending there.
// A non-integer cadence ratio is an error.
inline CountPair preprocess(const CountSeries& reference, const CountSeries& measured,
                            const CalendarConfig& cfg = {}) {
  CountSeries ref = detail::calendar_filter(reference, cfg);
  CountSeries wifi = detail::calendar_filter(measured, cfg);
  const auto by_ts = [](const SeriesSample& a, const SeriesSample& b) { return a.ts < b.ts; };
  std::stable_sort(ref.begin(), ref.end(), by_ts);
  std::stable_sort(wifi.begin(), wifi.end(), by_ts);

  const std::int64_t ref_cad = detail::infer_cadence(ref);
  const std::int64_t wifi_cad = detail::infer_cadence(wifi);
  if (ref_cad > 0 && wifi_cad > 0 && ref_cad != wifi_cad) {
    const std::int64_t coarse = std::max(ref_cad, wifi_cad);
    const std::int64_t fine = std::min(ref_cad, wifi_cad);
    if (coarse % fine != 0)
      throw std::invalid_argument("non-integer cadence ratio: " + std::to_string(coarse) +
                                  " vs " + std::to_string(fine));
    CountSeries& finer = (ref_cad < wifi_cad) ? ref : wifi;
    if (cfg.downsample == CalendarConfig::Downsample::mean) {
      // Average each fine sample into the coarse step (ts - coarse, ts] it falls in.
      std::map<std::int64_t, std::pair<double, std::size_t>> acc;
      for (const auto& s : finer) {
        const std::int64_t coarse_ts =
            (detail::floor_div(s.ts - 1, coarse) + 1) * coarse;
        auto& slot = acc[coarse_ts];
        slot.first += s.value;
        ++slot.second;
      }
      CountSeries down;
      down.reserve(acc.size());
      for (const auto& [ts, slot] : acc)
        down.push_back({ts, slot.first / static_cast<double>(slot.second)});
      finer = std::move(down);
    } else {
      CountSeries down;
      for (const auto& s : finer)
        if (s.ts % coarse == 0) down.push_back(s);
      finer = std::move(down);
    }
  }

  CountPair pair;
  std::size_t j = 0;
  for (const auto& r : ref) {
    while (j < wifi.size() && wifi[j].ts < r.ts) ++j;
    if (j < wifi.size() && wifi[j].ts == r.ts) {
      pair.ts.push_back(r.ts);
      pair.reference.push_back(r.value);
      pair.measured.push_back(wifi[j].value);
    }
  }
  return pair;
}

// Scalar least-squares estimate of the global extrapolation factor:
// <measured, reference> / ||measured||^2, the exact minimizer of
// sum_t (reference_t - beta * measured_t)^2.
inline double fit_extrapolation(const CountPair& pair) {
  if (pair.size() == 0) throw std::invalid_argument("fit_extrapolation: empty pair");
  double dot = 0.0, norm2 = 0.0;
  for (std::size_t i = 0; i < pair.size(); ++i) {
    dot += pair.measured[i] * pair.reference[i];
    norm2 += pair.measured[i] * pair.measured[i];
  }
  if (norm2 == 0.0)
    throw std::invalid_argument("fit_extrapolation: measured series is all zero");
  return dot / norm2;
}

struct EvalMetrics {
  double rmse = 0.0;
  double mape_percent = 0.0;       // NaN when every reference sample is zero
  std::size_t mape_excluded = 0;   // zero-reference samples left out of MAPE
};

// RMSE and MAPE of the predictions beta * measured against the reference.
// Zero-reference samples are excluded from MAPE and counted.
inline EvalMetrics evaluate(const CountPair& pair, double beta) {
  if (pair.size() == 0) throw std::invalid_argument("evaluate: empty pair");
  double sq_sum = 0.0, ape_sum = 0.0;
  std::size_t mape_n = 0;
  for (std::size_t i = 0; i < pair.size(); ++i) {
    const double predicted = beta * pair.measured[i];
    const double err = pair.reference[i] - predicted;
    sq_sum += err * err;
    if (pair.reference[i] != 0.0) {
      ape_sum += std::abs(err) / std::abs(pair.reference[i]);
      ++mape_n;
    }
  }
  EvalMetrics m;
  m.rmse = std::sqrt(sq_sum / static_cast<double>(pair.size()));
  m.mape_percent = mape_n == 0 ? std::numeric_limits<double>::quiet_NaN()
                               : 100.0 * ape_sum / static_cast<double>(mape_n);
  m.mape_excluded = pair.size() - mape_n;
  return m;
}

struct CalibrationReport {
  double beta_tilde = 0.0;
  double rmse = 0.0;
  double mape_percent = 0.0;
  double mean_reference = 0.0;
  std::size_t n_samples = 0;
  std::size_t mape_excluded = 0;
};

inline CalibrationReport calibrate(const CountPair& pair) {
  const double beta = fit_extrapolation(pair);
  const EvalMetrics m = evaluate(pair, beta);
  double mean_ref = 0.0;
  for (double v : pair.reference) mean_ref += v;
  mean_ref /= static_cast<double>(pair.size());
  return CalibrationReport{beta, m.rmse, m.mape_percent, mean_ref, pair.size(),
                           m.mape_excluded};
}

struct WindowSpec {
  std::int64_t window_seconds = 7 * 86400;
  // Window boundaries sit at anchor + k * window_seconds. The default makes
  // weekly windows start on Mondays (the epoch was a Thursday).
  std::int64_t anchor = -3 * 86400;

  static WindowSpec weekly() { return WindowSpec{}; }
};

struct WindowFit {
  std::int64_t window_start = 0;
  CalibrationReport report;
};

struct WindowedReport {
  std::vector<WindowFit> windows;
  CalibrationReport aggregate;  // unweighted average over windows
  std::size_t skipped_windows = 0;
};

// Fits the extrapolation factor per window and evaluates it inside that
// window. Windows without samples (or with an all-zero measured series) are
// skipped and counted. The aggregate averages all windows with equal weight.
inline WindowedReport fit_windowed(const CountPair& pair, const WindowSpec& spec) {
  if (pair.size() == 0) throw std::invalid_argument("fit_windowed: empty pair");
  if (spec.window_seconds <= 0) throw std::invalid_argument("window size must be positive");

  std::map<std::int64_t, CountPair> by_window;
  for (std::size_t i = 0; i < pair.size(); ++i) {
    const std::int64_t w = detail::floor_div(pair.ts[i] - spec.anchor, spec.window_seconds);
    CountPair& slot = by_window[w];
    slot.ts.push_back(pair.ts[i]);
    slot.reference.push_back(pair.reference[i]);
    slot.measured.push_back(pair.measured[i]);
  }

  WindowedReport out;
  double beta_sum = 0.0, rmse_sum = 0.0, mape_sum = 0.0, mean_sum = 0.0;
  std::size_t samples = 0, excluded = 0;
  for (const auto& [w, slice] : by_window) {
    bool all_zero = true;
    for (double v : slice.measured)
      if (v != 0.0) { all_zero = false; break; }
    if (all_zero) {
      ++out.skipped_windows;
      continue;
    }
    WindowFit fit;
    fit.window_start = spec.anchor + w * spec.window_seconds;
    fit.report = calibrate(slice);
    beta_sum += fit.report.beta_tilde;
    rmse_sum += fit.report.rmse;
    mape_sum += fit.report.mape_percent;
    mean_sum += fit.report.mean_reference;
    samples += fit.report.n_samples;
    excluded += fit.report.mape_excluded;
    out.windows.push_back(std::move(fit));
  }
  if (out.windows.empty())
    throw std::invalid_argument("fit_windowed: no usable window");

  const double n = static_cast<double>(out.windows.size());
  out.aggregate = CalibrationReport{beta_sum / n, rmse_sum / n, mape_sum / n,
                                    mean_sum / n, samples, excluded};
  return out;
}

}  // namespace prbcount
