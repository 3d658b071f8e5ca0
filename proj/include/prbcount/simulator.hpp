#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "prbcount/core.hpp"
#include "prbcount/counter.hpp"
#include "prbcount/detail/random.hpp"

// Synthetic ground truth: populations drawn from the transmission-probability
// mixture and the probe-request streams that overlapping sensors would
// observe. Every downstream accuracy claim is checked against the truth rows
// produced here.
//
// Propagation is log-distance path loss with iid Gaussian shadowing per
// (burst, sensor) pair; distances are clamped below at the 1 m reference.
// One Bernoulli draw per individual per frame: a burst either happens in the
// frame or not, and several sensors may hear the same burst.

namespace prbcount {

struct Individual {
  std::uint32_t id = 0;
  double tx_probability = 0.0;  // one of the mixture's alpha values
  double x = 0.0;
  double y = 0.0;
  bool has_device = false;  // false iff tx_probability == 0
};

// Pre-anonymization detection: raw address plus per-sensor RSSI. Never leaves
// the simulator/anonymizer boundary.
struct RawProbe {
  std::int64_t ts = 0;
  std::uint16_t sensor_id = 0;
  RawMac mac;
  std::int8_t rssi = 0;
};

struct GroundTruthRow {
  std::int64_t frame_index = 0;
  std::uint32_t n_ppl = 0;            // individuals inside the monitored area
  std::uint32_t distinct_bursts = 0;  // X: in-area individuals that transmitted
  std::vector<std::uint32_t> transmitter_ids;
};

struct Arena {
  double width = 50.0;
  double height = 30.0;
};

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

  bool contains(double x, double y) const {
    return x >= x0 && x <= x1 && y >= y0 && y <= y1;
  }
};

struct MobilityParams {
  bool enabled = false;
  double speed_mps = 1.2;
};

// Draws each individual's transmission probability independently from the
// mixture and a uniform position in the arena. Deterministic given the seed.
inline std::vector<Individual> sample_population(const PopulationSpec& spec,
                                                 const Arena& arena, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::vector<double> cumulative;
  cumulative.reserve(spec.mixture.size());
  double acc = 0.0;
  for (const auto& c : spec.mixture) cumulative.push_back(acc += c.weight);
  cumulative.back() = 1.0;  // guard against weight rounding

  std::vector<Individual> out;
  out.reserve(spec.n_ppl);
  for (std::uint32_t i = 0; i < spec.n_ppl; ++i) {
    const double u = detail::uniform01(rng);
    std::size_t k = 0;
    while (u >= cumulative[k]) ++k;
    Individual ind;
    ind.id = i;
    ind.tx_probability = spec.mixture[k].alpha;
    ind.has_device = spec.mixture[k].alpha > 0.0;
    ind.x = detail::uniform01(rng) * arena.width;
    ind.y = detail::uniform01(rng) * arena.height;
    out.push_back(ind);
  }
  return out;
}

namespace detail {

template <class Engine>
RawMac random_mac(Engine& rng) {
  const std::uint64_t r = rng();
  RawMac mac;
  for (int i = 0; i < 6; ++i) mac.bytes[static_cast<std::size_t>(i)] =
      static_cast<std::uint8_t>(r >> (8 * i));
  mac.bytes[0] = static_cast<std::uint8_t>((mac.bytes[0] & 0xFC) | 0x02);  // locally administered, unicast
  return mac;
}

// Integer received power: round(ref - 10*eta*log10(max(d,1)) + shadowing),
// clamped to the signed 8-bit dBm range.
template <class Engine>
std::int8_t received_rssi(const SensorConfig& sensor, double x, double y, Engine& rng) {
  const double dx = x - sensor.x;
  const double dy = y - sensor.y;
  const double dist = std::max(std::sqrt(dx * dx + dy * dy), 1.0);
  double rssi = sensor.rx.ref_power_dbm -
                10.0 * sensor.rx.path_loss_exponent * std::log10(dist) +
                sensor.rx.shadowing_sigma_db * standard_normal(rng);
  const long rounded = std::lround(rssi);
  return static_cast<std::int8_t>(std::clamp<long>(rounded, -128, 127));
}

}  // namespace detail

struct FrameResult {
  std::vector<RawProbe> probes;
  GroundTruthRow truth;
};

// Simulates one frame: every individual transmits at most one burst (one
// Bernoulli draw), each burst carries a fresh random address and one
// timestamp inside the frame, and each sensor independently receives it iff
// the integer RSSI reaches its detection floor.
inline FrameResult simulate_frame(std::span<const Individual> individuals,
                                  std::span<const SensorConfig> sensors,
                                  const TimeFrame& frame, std::uint64_t seed,
                                  const std::optional<Rect>& monitored = std::nullopt) {
  if (sensors.empty()) throw std::invalid_argument("simulate_frame: no sensors");
  std::mt19937_64 rng(seed);

  FrameResult result;
  result.truth.frame_index = frame.index;
  for (const auto& ind : individuals) {
    const bool in_area = !monitored || monitored->contains(ind.x, ind.y);
    if (in_area) ++result.truth.n_ppl;
    const bool transmits = detail::bernoulli(rng, ind.tx_probability);
    if (!transmits) continue;
    if (in_area) result.truth.transmitter_ids.push_back(ind.id);

    const RawMac mac = detail::random_mac(rng);
    const std::int64_t ts = detail::uniform_int(rng, frame.first_ts, frame.last_ts);
    for (const auto& sensor : sensors) {
      const std::int8_t rssi = detail::received_rssi(sensor, ind.x, ind.y, rng);
      if (static_cast<int>(rssi) >= sensor.rx.detection_floor_dbm)
        result.probes.push_back(RawProbe{ts, sensor.sensor_id, mac, rssi});
    }
  }
  result.truth.distinct_bursts =
      static_cast<std::uint32_t>(result.truth.transmitter_ids.size());
  return result;
}

struct ScenarioResult {
  std::vector<RawProbe> probes;  // sorted by timestamp
  std::vector<GroundTruthRow> truth;
};

namespace detail {

// Random-waypoint step: walk toward the target at the given speed for
// `seconds`, drawing a new target on arrival.
template <class Engine>
void mobility_step(std::vector<Individual>& individuals, std::vector<std::pair<double, double>>& targets,
                   const Arena& arena, double speed_mps, double seconds, Engine& rng) {
  for (std::size_t i = 0; i < individuals.size(); ++i) {
    auto& ind = individuals[i];
    double budget = speed_mps * seconds;
    while (budget > 0.0) {
      const double dx = targets[i].first - ind.x;
      const double dy = targets[i].second - ind.y;
      const double dist = std::sqrt(dx * dx + dy * dy);
      if (dist <= budget) {
        ind.x = targets[i].first;
        ind.y = targets[i].second;
        budget -= dist;
        targets[i] = {uniform01(rng) * arena.width, uniform01(rng) * arena.height};
        if (dist == 0.0) break;
      } else {
        ind.x += dx / dist * budget;
        ind.y += dy / dist * budget;
        budget = 0.0;
      }
    }
  }
}

}  // namespace detail

// Runs frames 1..n_frames on the grid `frames`, with optional random-waypoint
// mobility between frames. Per-frame seeds are derived from the scenario
// seed, so frames could be generated independently.
inline ScenarioResult run_scenario(const PopulationSpec& population,
                                   std::span<const SensorConfig> sensors,
                                   std::int64_t n_frames, const FrameSpec& frames,
                                   std::uint64_t seed, const Arena& arena = Arena{},
                                   const MobilityParams& mobility = MobilityParams{},
                                   const std::optional<Rect>& monitored = std::nullopt) {
  if (n_frames < 1) throw std::invalid_argument("run_scenario: n_frames must be >= 1");
  if (sensors.empty()) throw std::invalid_argument("run_scenario: no sensors");
  for (const auto& s : sensors) s.validate();

  std::vector<Individual> individuals =
      sample_population(population, arena, detail::mix_seed(seed, 0x706f70ULL));

  std::vector<std::pair<double, double>> targets;
  std::mt19937_64 mobility_rng(detail::mix_seed(seed, 0x6d6f62ULL));
  if (mobility.enabled) {
    targets.reserve(individuals.size());
    for (std::size_t i = 0; i < individuals.size(); ++i)
      targets.emplace_back(detail::uniform01(mobility_rng) * arena.width,
                           detail::uniform01(mobility_rng) * arena.height);
  }

  ScenarioResult result;
  result.truth.reserve(static_cast<std::size_t>(n_frames));
  for (std::int64_t k = 1; k <= n_frames; ++k) {
    const TimeFrame frame = frame_at(frames, k);
    FrameResult fr = simulate_frame(individuals, sensors, frame,
                                    detail::mix_seed(seed, 0x66726dULL, static_cast<std::uint64_t>(k)),
                                    monitored);
    result.truth.push_back(std::move(fr.truth));
    result.probes.insert(result.probes.end(), fr.probes.begin(), fr.probes.end());
    if (mobility.enabled && k < n_frames)
      detail::mobility_step(individuals, targets, arena, mobility.speed_mps,
                            static_cast<double>(frames.duration), mobility_rng);
  }
  std::stable_sort(result.probes.begin(), result.probes.end(),
                   [](const RawProbe& a, const RawProbe& b) { return a.ts < b.ts; });
  return result;
}

}  // namespace prbcount
