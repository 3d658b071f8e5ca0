#pragma once

#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

// Shared vocabulary for the probe-request counting pipeline: anonymized
// detection records, the frame grid, sensor parameters and the population
// mixture model. All types are immutable value types.

namespace prbcount {

// 64-bit anonymized source identifier (truncated peppered hash).
struct AnonToken {
  std::uint64_t value = 0;
  friend auto operator<=>(const AnonToken&, const AnonToken&) = default;
};

// Raw 48-bit source address, transmission byte order. Raw addresses exist
// only inside the simulator and as anonymizer input; nothing downstream of
// anonymization ever sees one.
struct RawMac {
  std::array<std::uint8_t, 6> bytes{};

  bool locally_administered() const { return (bytes[0] & 0x02) != 0; }
  bool unicast() const { return (bytes[0] & 0x01) == 0; }

  std::string to_string() const {
    char buf[18];
    std::snprintf(buf, sizeof buf, "%02x:%02x:%02x:%02x:%02x:%02x", bytes[0],
                  bytes[1], bytes[2], bytes[3], bytes[4], bytes[5]);
    return std::string(buf);
  }

  friend auto operator<=>(const RawMac&, const RawMac&) = default;
};

// One detected probe-request burst after anonymization.
struct ProbeRecord {
  std::int64_t ts = 0;  // seconds since epoch; must stay within 32-bit range
  std::uint16_t sensor_id = 0;
  AnonToken token;
  std::int8_t rssi = 0;  // dBm

  friend bool operator==(const ProbeRecord&, const ProbeRecord&) = default;
};

// Frame grid: frame k covers the integer timestamps (end(k) - duration, end(k)]
// with end(k) = epoch + k * duration.
struct FrameSpec {
  std::int64_t epoch = 0;
  std::int32_t duration = 60;
};

struct TimeFrame {
  std::int64_t index = 0;
  std::int64_t first_ts = 0;  // inclusive
  std::int64_t last_ts = 0;   // inclusive; the frame's nominal timestamp
  std::int32_t duration = 60;

  bool contains(std::int64_t ts) const { return ts >= first_ts && ts <= last_ts; }
};

namespace detail {
inline std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if (a % b != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}
}  // namespace detail

// Maps a timestamp to its frame index. The frame's nominal timestamp maps to
// that frame; one second later starts the next frame.
inline std::int64_t frame_of(std::int64_t ts, const FrameSpec& spec) {
  if (spec.duration <= 0) throw std::invalid_argument("frame duration must be positive");
  return detail::floor_div(ts - spec.epoch - 1, spec.duration) + 1;
}

inline TimeFrame frame_at(const FrameSpec& spec, std::int64_t index) {
  if (spec.duration <= 0) throw std::invalid_argument("frame duration must be positive");
  const std::int64_t end = spec.epoch + index * spec.duration;
  return TimeFrame{index, end - spec.duration + 1, end, spec.duration};
}

// Receive-side propagation parameters (log-distance path loss with Gaussian
// shadowing); sub-dB precision exists only inside the simulator, stored RSSI
// values are integer dBm.
struct RxParams {
  double path_loss_exponent = 2.0;
  double ref_power_dbm = -40.0;    // mean RSSI at 1 m
  double shadowing_sigma_db = 0.0;
  int detection_floor_dbm = -128;  // below this nothing is received
};

struct SensorConfig {
  std::uint16_t sensor_id = 0;
  double x = 0.0;
  double y = 0.0;
  int rssi_lower_bound = -128;  // counting threshold, dBm
  RxParams rx;

  void validate() const {
    if (rssi_lower_bound < rx.detection_floor_dbm)
      throw std::invalid_argument("sensor " + std::to_string(sensor_id) +
                                  ": rssi_lower_bound below detection floor");
  }
};

// Mixture describing per-individual transmission probabilities: an individual
// transmits a burst per frame with probability alpha_k, drawn with weight r_k.
struct MixtureComponent {
  double alpha = 0.0;   // per-frame transmission probability
  double weight = 0.0;  // mixture weight r_k
};

struct PopulationSpec {
  std::uint32_t n_ppl = 0;
  std::vector<MixtureComponent> mixture;

  void validate() const {
    if (n_ppl == 0) throw std::invalid_argument("n_ppl must be positive");
    if (mixture.empty()) throw std::invalid_argument("mixture must be non-empty");
    double sum = 0.0;
    double prev_alpha = -1.0;
    for (const auto& c : mixture) {
      if (!(c.alpha >= 0.0 && c.alpha <= 1.0))
        throw std::invalid_argument("mixture alpha outside [0,1]");
      if (!(c.weight >= 0.0 && c.weight <= 1.0))
        throw std::invalid_argument("mixture weight outside [0,1]");
      if (c.alpha <= prev_alpha)
        throw std::invalid_argument("mixture alphas must be distinct and ascending");
      prev_alpha = c.alpha;
      sum += c.weight;
    }
    if (std::abs(sum - 1.0) > 1e-12)
      throw std::invalid_argument("mixture weights must sum to 1");
  }
};

// Mean per-frame transmission probability p = sum_k alpha_k r_k.
inline double mean_tx_probability(const PopulationSpec& spec) {
  spec.validate();
  double p = 0.0;
  for (const auto& c : spec.mixture) p += c.alpha * c.weight;
  return p;
}

}  // namespace prbcount

template <>
struct std::hash<prbcount::AnonToken> {
  std::size_t operator()(const prbcount::AnonToken& t) const noexcept {
    return static_cast<std::size_t>(t.value);
  }
};
