#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "prbcount/anonymizer.hpp"
#include "prbcount/calibration.hpp"
#include "prbcount/core.hpp"
#include "prbcount/counter.hpp"
#include "prbcount/detail/random.hpp"
#include "prbcount/dumpstore.hpp"
#include "prbcount/series_io.hpp"
#include "prbcount/simulator.hpp"
#include "prbcount/statbounds.hpp"

// End-to-end orchestration: simulate -> anonymize -> (dump/reload) -> count
// -> estimate -> calibrate against ground truth. Every artifact is a CSV or
// JSON file under the output directory; a fixed (config, seed) pair yields
// byte-identical outputs. Raw addresses never leave process memory here.

namespace prbcount {

class StageError : public std::runtime_error {
 public:
  enum class Category { Config, Data };

  StageError(Category category, std::string stage, const std::string& what)
      : std::runtime_error("[" + stage + "] " + what),
        category_(category),
        stage_(std::move(stage)) {}

  Category category() const { return category_; }
  const std::string& stage() const { return stage_; }

 private:
  Category category_;
  std::string stage_;
};

struct Scenario {
  PopulationSpec population;
  std::vector<SensorConfig> sensors;
  std::int64_t n_frames = 1;
  FrameSpec frames;
  Arena arena;
  std::optional<Rect> monitored;
  MobilityParams mobility;
  AreaMap areas;
  std::uint64_t seed = 1;
};

struct BetaSource {
  enum class Mode { Fixed, Fitted };
  Mode mode = Mode::Fitted;
  double value = 0.0;  // used when fixed
};

struct PipelineConfig {
  std::filesystem::path scenario_path;
  Scenario scenario;
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1;  // peppers and dump re-randomization
  BetaSource beta;
  bool dump_enabled = false;
  std::string dump_dir = "dumps";
  std::optional<std::int64_t> window_seconds;
  std::optional<double> beta_external;  // externally known beta, for the implied kappa
  std::int64_t pepper_retention_minutes = 2;
};

namespace detail {

inline nlohmann::json parse_json_file(const std::filesystem::path& path, const char* stage) {
  std::ifstream in(path);
  if (!in)
    throw StageError(StageError::Category::Config, stage,
                     "cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw StageError(StageError::Category::Config, stage,
                     path.string() + ": " + e.what());
  }
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    Scenario sc;
    sc.seed = j.value("seed", std::uint64_t{1});
    sc.n_frames = j.at("frames").get<std::int64_t>();
    sc.frames.duration = j.value("frame_duration", 60);
    sc.frames.epoch = j.value("epoch", std::int64_t{0});

    const auto& pop = j.at("population");
    sc.population.n_ppl = pop.at("n_ppl").get<std::uint32_t>();
    for (const auto& c : pop.at("mixture"))
      sc.population.mixture.push_back(
          {c.at("alpha").get<double>(), c.at("weight").get<double>()});
    sc.population.validate();

    if (j.contains("arena")) {
      sc.arena.width = j["arena"].at("width").get<double>();
      sc.arena.height = j["arena"].at("height").get<double>();
    }
    if (j.contains("monitored")) {
      const auto& m = j["monitored"];
      sc.monitored = Rect{m.at("x0").get<double>(), m.at("y0").get<double>(),
                          m.at("x1").get<double>(), m.at("y1").get<double>()};
    }
    if (j.contains("mobility")) {
      sc.mobility.enabled = j["mobility"].value("enabled", false);
      sc.mobility.speed_mps = j["mobility"].value("speed_mps", 1.2);
    }

    for (const auto& s : j.at("sensors")) {
      SensorConfig cfg;
      cfg.sensor_id = s.at("id").get<std::uint16_t>();
      cfg.x = s.at("x").get<double>();
      cfg.y = s.at("y").get<double>();
      cfg.rssi_lower_bound = s.at("rssi_lower_bound").get<int>();
      cfg.rx.path_loss_exponent = s.value("path_loss_exponent", 2.0);
      cfg.rx.ref_power_dbm = s.value("ref_power_dbm", -40.0);
      cfg.rx.shadowing_sigma_db = s.value("shadowing_sigma_db", 0.0);
      cfg.rx.detection_floor_dbm = s.value("detection_floor_dbm", -128);
      cfg.validate();
      sc.sensors.push_back(cfg);
    }
    if (sc.sensors.empty()) throw std::invalid_argument("scenario needs at least one sensor");

    if (j.contains("areas"))
      for (const auto& [name, members] : j["areas"].items())
        sc.areas[name] = members.get<std::vector<std::uint16_t>>();
    return sc;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(StageError::Category::Config, "config", e.what());
  }
}

inline Scenario load_scenario(const std::filesystem::path& path) {
  return scenario_from_json(detail::parse_json_file(path, "config"));
}

// Pipeline config file; the scenario path is resolved relative to the config
// file's directory.
inline PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
  const nlohmann::json j = detail::parse_json_file(path, "config");
  try {
    PipelineConfig cfg;
    cfg.scenario_path = j.at("scenario").get<std::string>();
    if (cfg.scenario_path.is_relative())
      cfg.scenario_path = path.parent_path() / cfg.scenario_path;
    if (!std::filesystem::exists(cfg.scenario_path))
      throw StageError(StageError::Category::Config, "config",
                       "scenario file not found: " + cfg.scenario_path.string());
    cfg.scenario = load_scenario(cfg.scenario_path);
    cfg.out_dir = j.value("out_dir", std::string("out"));
    cfg.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("beta")) {
      const std::string mode = j["beta"].value("mode", "fitted");
      if (mode == "fixed") {
        cfg.beta.mode = BetaSource::Mode::Fixed;
        cfg.beta.value = j["beta"].at("value").get<double>();
        if (!(cfg.beta.value > 0.0))
          throw StageError(StageError::Category::Config, "config",
                           "fixed beta must be positive");
      } else if (mode == "fitted") {
        cfg.beta.mode = BetaSource::Mode::Fitted;
      } else {
        throw StageError(StageError::Category::Config, "config",
                         "beta.mode must be 'fixed' or 'fitted'");
      }
    }
    if (j.contains("dump")) {
      cfg.dump_enabled = j["dump"].value("enabled", false);
      cfg.dump_dir = j["dump"].value("dir", std::string("dumps"));
    }
    if (j.contains("window_seconds"))
      cfg.window_seconds = j["window_seconds"].get<std::int64_t>();
    if (j.contains("beta_external"))
      cfg.beta_external = j["beta_external"].get<double>();
    cfg.pepper_retention_minutes = j.value("pepper_retention_minutes", std::int64_t{2});
    return cfg;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(StageError::Category::Config, "config", e.what());
  }
}

// Anonymizes a raw stream with per-minute peppers covering its whole span.
inline std::vector<ProbeRecord> anonymize_stream(std::span<const RawProbe> probes,
                                                 const PepperSchedule& schedule) {
  std::vector<ProbeRecord> out;
  out.reserve(probes.size());
  for (const auto& p : probes)
    out.push_back(ProbeRecord{p.ts, p.sensor_id,
                              anonymize(p.mac, minute_of(p.ts), schedule), p.rssi});
  return out;
}

struct FrameCount {
  TimeFrame frame;
  CountResult result;
};

// Counts every frame of the scenario grid, including empty ones.
inline std::vector<FrameCount> count_all_frames(std::span<const ProbeRecord> records,
                                                const Scenario& sc) {
  std::map<std::int64_t, FrameBatch> by_frame;
  for (const auto& r : records) {
    const std::int64_t k = frame_of(r.ts, sc.frames);
    auto& b = by_frame[k];
    b.frame_index = k;
    b.entries.push_back(FrameBatch::Entry{r.sensor_id, r.token, r.rssi});
  }
  std::vector<FrameCount> out;
  out.reserve(static_cast<std::size_t>(sc.n_frames));
  for (std::int64_t k = 1; k <= sc.n_frames; ++k) {
    const auto it = by_frame.find(k);
    const FrameBatch empty{k, {}};
    const FrameBatch& batch = it == by_frame.end() ? empty : it->second;
    out.push_back(FrameCount{frame_at(sc.frames, k),
                             count_frame(batch, sc.sensors, sc.areas)});
  }
  return out;
}

struct PipelineResult {
  std::filesystem::path out_dir;
  double beta_used = 0.0;
  CalibrationReport report;
  std::optional<WindowedReport> windowed;
  CountSeries wifi_series;       // per-frame distinct tokens
  CountSeries reference_series;  // per-frame ground-truth population
  std::vector<std::filesystem::path> artifacts;
};

namespace detail {

inline std::ofstream open_artifact(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // '\n' line endings everywhere
  if (!out)
    throw StageError(StageError::Category::Data, "write",
                     "cannot open " + path.string());
  return out;
}

inline nlohmann::json json_number_or_null(double v) {
  if (std::isnan(v) || std::isinf(v)) return nullptr;
  return v;
}

inline nlohmann::json report_to_json(const CalibrationReport& r) {
  nlohmann::json j;
  j["beta_tilde"] = json_number_or_null(r.beta_tilde);
  j["rmse"] = json_number_or_null(r.rmse);
  j["mape_percent"] = json_number_or_null(r.mape_percent);
  j["mean_reference"] = json_number_or_null(r.mean_reference);
  j["n_samples"] = r.n_samples;
  j["mape_excluded"] = r.mape_excluded;
  return j;
}

}  // namespace detail

inline PipelineResult run_pipeline(const PipelineConfig& cfg) {
  namespace fs = std::filesystem;
  const Scenario& sc = cfg.scenario;
  PipelineResult result;
  result.out_dir = cfg.out_dir;

  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec)
    throw StageError(StageError::Category::Data, "write",
                     "cannot create " + cfg.out_dir.string() + ": " + ec.message());
  auto artifact = [&](const std::string& name) {
    result.artifacts.push_back(cfg.out_dir / name);
    return detail::open_artifact(cfg.out_dir / name);
  };

  // simulate
  ScenarioResult sim;
  try {
    sim = run_scenario(sc.population, sc.sensors, sc.n_frames, sc.frames, sc.seed,
                       sc.arena, sc.mobility, sc.monitored);
  } catch (const std::exception& e) {
    throw StageError(StageError::Category::Data, "simulate", e.what());
  }
  {
    auto out = artifact("ground_truth.csv");
    write_ground_truth_csv(out, sim.truth);
  }

  // anonymize
  std::vector<ProbeRecord> records;
  try {
    const std::int64_t first_minute = minute_of(frame_at(sc.frames, 1).first_ts);
    const std::int64_t last_minute =
        minute_of(frame_at(sc.frames, sc.n_frames).last_ts);
    Pepper sensor_pepper;
    SeededEntropySource entropy(detail::mix_seed(cfg.seed, 0x706570ULL));
    entropy.fill(sensor_pepper);
    const PepperSchedule schedule =
        generate_peppers(first_minute, last_minute, entropy, sensor_pepper,
                         std::max<std::int64_t>(cfg.pepper_retention_minutes,
                                                last_minute - first_minute + 1));
    records = anonymize_stream(sim.probes, schedule);
  } catch (const std::exception& e) {
    throw StageError(StageError::Category::Data, "anonymize", e.what());
  }

  // dump / reload (optional): re-randomize per frame, persist per (sensor, day),
  // then count from what was read back.
  if (cfg.dump_enabled) {
    try {
      std::mt19937_64 rng(detail::mix_seed(cfg.seed, 0x726e64ULL));
      std::map<std::int64_t, std::vector<ProbeRecord>> frames;
      for (const auto& r : records) frames[frame_of(r.ts, sc.frames)].push_back(r);
      for (auto& [k, frame_records] : frames) rerandomize_frame(frame_records, rng);

      std::map<std::pair<std::uint16_t, std::uint32_t>, std::vector<ProbeRecord>> files;
      for (const auto& [k, frame_records] : frames)
        for (const auto& r : frame_records)
          files[{r.sensor_id, day_of(r.ts)}].push_back(r);

      const fs::path dump_dir = cfg.out_dir / cfg.dump_dir;
      fs::create_directories(dump_dir);
      std::vector<ProbeRecord> reloaded;
      reloaded.reserve(records.size());
      for (const auto& [key, file_records] : files) {
        const fs::path path = dump_dir / dump_file_name(key.first, key.second);
        write_dump(file_records, key.first, key.second, path);
        result.artifacts.push_back(path);
        const DumpContent content = read_dump(path);
        reloaded.insert(reloaded.end(), content.records.begin(), content.records.end());
      }
      records = std::move(reloaded);
    } catch (const std::exception& e) {
      throw StageError(StageError::Category::Data, "dump", e.what());
    }
  }

  // count
  std::vector<FrameCount> counts;
  try {
    counts = count_all_frames(records, sc);
  } catch (const std::exception& e) {
    throw StageError(StageError::Category::Data, "count", e.what());
  }
  {
    auto out = artifact("counts.csv");
    out << "frame_start_ts,sensor_id,count\n";
    for (const auto& fc : counts)
      for (const auto& [sensor_id, n] : fc.result.counts_per_sensor)
        out << fc.frame.first_ts << ',' << sensor_id << ',' << n << '\n';
  }
  if (!sc.areas.empty()) {
    auto out = artifact("area_counts.csv");
    out << "frame_start_ts,area_id,count\n";
    for (const auto& fc : counts)
      for (const auto& [area, n] : fc.result.area_counts)
        out << fc.frame.first_ts << ',' << area << ',' << n << '\n';
  }

  // series for calibration: measured = distinct tokens per frame, reference =
  // ground-truth population per frame.
  for (std::size_t i = 0; i < counts.size(); ++i) {
    result.wifi_series.push_back({counts[i].frame.last_ts,
                                  static_cast<double>(counts[i].result.total())});
    result.reference_series.push_back({counts[i].frame.last_ts,
                                       static_cast<double>(sim.truth[i].n_ppl)});
  }
  {
    auto out = artifact("wifi_series.csv");
    write_count_series(out, result.wifi_series);
  }
  {
    auto out = artifact("reference_series.csv");
    write_count_series(out, result.reference_series);
  }

  // calibrate
  try {
    const CountPair pair = preprocess(result.reference_series, result.wifi_series);
    result.report = calibrate(pair);
    result.beta_used = cfg.beta.mode == BetaSource::Mode::Fixed ? cfg.beta.value
                                                                : result.report.beta_tilde;
    // Windows are anchored at the first frame's nominal timestamp so that a
    // window covers whole frames.
    if (cfg.window_seconds)
      result.windowed = fit_windowed(
          pair, WindowSpec{*cfg.window_seconds, sc.frames.epoch + sc.frames.duration});
  } catch (const std::exception& e) {
    throw StageError(StageError::Category::Data, "calibrate", e.what());
  }
  {
    nlohmann::json j = detail::report_to_json(result.report);
    j["beta_used_for_estimates"] = result.beta_used;
    j["beta_mode"] = cfg.beta.mode == BetaSource::Mode::Fixed ? "fixed" : "fitted";
    if (cfg.beta_external) {
      j["beta_external"] = *cfg.beta_external;
      j["implied_kappa"] =
          detail::json_number_or_null(result.report.beta_tilde / *cfg.beta_external);
    }
    auto out = artifact("calibration_report.json");
    out << j.dump(2) << '\n';
  }
  if (result.windowed) {
    auto out = artifact("windows.csv");
    out << "window_start_ts,beta_tilde,mean_reference,rmse,mape_percent\n";
    for (const auto& w : result.windowed->windows)
      out << w.window_start << ',' << detail::format_double(w.report.beta_tilde) << ','
          << detail::format_double(w.report.mean_reference) << ','
          << detail::format_double(w.report.rmse) << ','
          << detail::format_double(w.report.mape_percent) << '\n';
    const auto& agg = result.windowed->aggregate;
    out << "average," << detail::format_double(agg.beta_tilde) << ','
        << detail::format_double(agg.mean_reference) << ','
        << detail::format_double(agg.rmse) << ','
        << detail::format_double(agg.mape_percent) << '\n';
  }

  // estimate
  {
    auto out = artifact("estimates.csv");
    out << "frame_start_ts,distinct_tokens,estimate\n";
    for (const auto& fc : counts) {
      const std::uint64_t x = fc.result.total();
      out << fc.frame.first_ts << ',' << x << ','
          << detail::format_double(estimate_count(x, result.beta_used)) << '\n';
    }
  }

  // theoretical accuracy table for the scenario's mixture
  {
    const double p = mean_tx_probability(sc.population);
    auto out = artifact("bounds.csv");
    out << "phi,concentration_bound,hoeffding_bound,empirical_tail\n";
    if (p > 0.0 && p < 1.0) {
      for (int i = 1; i <= 50; ++i) {
        const double phi = 0.01 * i;
        const BoundQuery q{p, sc.population.n_ppl, phi};
        out << detail::format_double(phi) << ','
            << detail::format_double(concentration_bound(q)) << ','
            << detail::format_double(hoeffding_bound(q)) << ','
            << detail::format_double(empirical_tail(p, sc.population.n_ppl, phi, 20000,
                                                    detail::mix_seed(cfg.seed, 0x626e64ULL)))
            << '\n';
      }
    }
  }

  // manifest: configuration echo so runs are reproducible from artifacts alone
  {
    nlohmann::json j;
    j["scenario_path"] = cfg.scenario_path.string();
    j["scenario_seed"] = sc.seed;
    j["pipeline_seed"] = cfg.seed;
    j["frames"] = sc.n_frames;
    j["frame_duration"] = sc.frames.duration;
    j["epoch"] = sc.frames.epoch;
    j["n_ppl"] = sc.population.n_ppl;
    j["mean_tx_probability"] = mean_tx_probability(sc.population);
    j["dump_enabled"] = cfg.dump_enabled;
    auto out = artifact("run_manifest.json");
    out << j.dump(2) << '\n';
  }

  return result;
}

}  // namespace prbcount
