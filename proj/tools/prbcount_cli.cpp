// prbcount: probe-request crowd counting toolkit.
//
// Subcommands cover the pipeline stage by stage (simulate, peppers,
// anonymize, count, dump, read-dump, calibrate, bounds) plus an end-to-end
// `pipeline` runner. All interchange is CSV with epoch-second timestamps.
// Exit codes: 0 success, 2 configuration error, 3 data error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "prbcount/prbcount.hpp"

namespace fs = std::filesystem;
using namespace prbcount;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw StageError(StageError::Category::Data, "write", "cannot open " + path.string());
  return out;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw StageError(StageError::Category::Data, "read", "cannot open " + path.string());
  return in;
}

Pepper sensor_pepper_from(const std::string& flag_value) {
  if (!flag_value.empty()) return parse_pepper_hex(flag_value);
  if (const char* env = std::getenv("PRBCOUNT_SENSOR_PEPPER")) return parse_pepper_hex(env);
  throw StageError(StageError::Category::Config, "config",
                   "sensor pepper required (--sensor-pepper or PRBCOUNT_SENSOR_PEPPER)");
}

struct SimulateArgs {
  std::string config;
  std::string out_raw;
  std::string out_gt;
  std::optional<std::uint64_t> seed;
  std::optional<std::int64_t> frames;
};

int cmd_simulate(const SimulateArgs& a) {
  Scenario sc = load_scenario(a.config);
  if (a.seed) sc.seed = *a.seed;
  if (a.frames) sc.n_frames = *a.frames;
  const ScenarioResult res = run_scenario(sc.population, sc.sensors, sc.n_frames,
                                          sc.frames, sc.seed, sc.arena, sc.mobility,
                                          sc.monitored);
  {
    auto out = open_output(a.out_raw);
    write_raw_records_csv(out, res.probes);
  }
  {
    auto out = open_output(a.out_gt);
    write_ground_truth_csv(out, res.truth);
  }
  std::cerr << "simulate: " << res.probes.size() << " raw records over "
            << res.truth.size() << " frames\n";
  return 0;
}

struct PeppersArgs {
  std::int64_t first_minute = 0;
  std::int64_t last_minute = 0;
  std::string out;
  std::optional<std::uint64_t> seed;
};

int cmd_peppers(const PeppersArgs& a) {
  Pepper unused_sensor{};
  std::unique_ptr<EntropySource> entropy;
  if (a.seed)
    entropy = std::make_unique<SeededEntropySource>(*a.seed);
  else
    entropy = std::make_unique<SystemEntropySource>();
  const PepperSchedule schedule = generate_peppers(
      a.first_minute, a.last_minute, *entropy, unused_sensor,
      a.last_minute - a.first_minute + 1);
  auto out = open_output(a.out);
  write_pepper_file(out, schedule.snapshot());
  return 0;
}

struct AnonymizeArgs {
  std::string in;
  std::string peppers;
  std::string sensor_pepper;
  std::string out;
};

int cmd_anonymize(const AnonymizeArgs& a) {
  const Pepper sensor = sensor_pepper_from(a.sensor_pepper);
  auto pfile = open_input(a.peppers);
  auto server = read_pepper_file(pfile);
  const PepperSchedule schedule(sensor, std::move(server),
                                std::numeric_limits<std::int64_t>::max() / 2);
  auto in = open_input(a.in);
  const auto raw = read_raw_records_csv(in);
  const auto records = anonymize_stream(raw, schedule);
  auto out = open_output(a.out);
  write_records_csv(out, records);
  return 0;
}

struct CountArgs {
  std::string config;
  std::string in_records;
  std::vector<std::string> dumps;
  std::string out;
  std::string out_areas;
  std::optional<std::int32_t> frame_duration;
  std::optional<std::int64_t> epoch;
  std::vector<std::string> threshold_overrides;
};

void apply_threshold_overrides(std::vector<SensorConfig>& sensors,
                               const std::vector<std::string>& overrides) {
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) {
      const int dbm = static_cast<int>(detail::parse_int(ov, "rssi threshold"));
      for (auto& s : sensors) s.rssi_lower_bound = dbm;
    } else {
      const auto id = static_cast<std::uint16_t>(
          detail::parse_int(ov.substr(0, eq), "sensor id"));
      const int dbm =
          static_cast<int>(detail::parse_int(ov.substr(eq + 1), "rssi threshold"));
      bool found = false;
      for (auto& s : sensors)
        if (s.sensor_id == id) {
          s.rssi_lower_bound = dbm;
          found = true;
        }
      if (!found)
        throw StageError(StageError::Category::Config, "config",
                         "threshold override for unknown sensor " + std::to_string(id));
    }
  }
}

int cmd_count(const CountArgs& a) {
  Scenario sc = load_scenario(a.config);
  if (a.frame_duration) sc.frames.duration = *a.frame_duration;
  if (a.epoch) sc.frames.epoch = *a.epoch;
  apply_threshold_overrides(sc.sensors, a.threshold_overrides);

  std::vector<ProbeRecord> records;
  if (!a.in_records.empty()) {
    auto in = open_input(a.in_records);
    records = read_records_csv(in);
  }
  for (const std::string& d : a.dumps) {
    const DumpContent content = read_dump(d);
    records.insert(records.end(), content.records.begin(), content.records.end());
  }
  if (records.empty() && a.in_records.empty() && a.dumps.empty())
    throw StageError(StageError::Category::Config, "config",
                     "count needs --in or --dump input");

  const auto batches = make_frame_batches(records, sc.frames);
  auto out = open_output(a.out);
  out << "frame_start_ts,sensor_id,count\n";
  std::ofstream areas_out;
  if (!a.out_areas.empty()) {
    areas_out = open_output(a.out_areas);
    areas_out << "frame_start_ts,area_id,count\n";
  }
  for (const auto& batch : batches) {
    const CountResult result = count_frame(batch, sc.sensors, sc.areas);
    const TimeFrame frame = frame_at(sc.frames, batch.frame_index);
    for (const auto& [sensor_id, n] : result.counts_per_sensor)
      out << frame.first_ts << ',' << sensor_id << ',' << n << '\n';
    if (areas_out.is_open())
      for (const auto& [area, n] : result.area_counts)
        areas_out << frame.first_ts << ',' << area << ',' << n << '\n';
  }
  return 0;
}

struct BoundsArgs {
  double p_min = 0.01;
  double p_max = 0.99;
  double p_step = 0.01;
  std::uint64_t n_ppl = 1000;
  double phi = 0.1;
  std::uint32_t trials = 0;  // 0: skip the Monte-Carlo column
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_bounds(const BoundsArgs& a) {
  auto out = open_output(a.out);
  out << "p,variance_proxy,concentration_bound,hoeffding_bound,empirical_tail\n";
  for (double p = a.p_min; p <= a.p_max + 1e-12; p += a.p_step) {
    const BoundQuery q{p, a.n_ppl, a.phi};
    out << detail::format_double(p) << ','
        << detail::format_double(bernoulli_variance_proxy(p)) << ','
        << detail::format_double(concentration_bound(q)) << ','
        << detail::format_double(hoeffding_bound(q)) << ',';
    if (a.trials > 0)
      out << detail::format_double(
          empirical_tail(p, a.n_ppl, a.phi, a.trials, a.seed));
    out << '\n';
  }
  return 0;
}

struct CalibrateArgs {
  std::string ref;
  std::string wifi;
  std::string from_date, to_date;
  std::vector<std::string> exclude;
  std::string open_time, close_time;
  std::string downsample = "point";
  bool weekly = false;
  std::optional<std::int64_t> window_seconds;
  std::string out;
  std::string out_windows;
};

int cmd_calibrate(const CalibrateArgs& a) {
  CalendarConfig cal;
  if (!a.from_date.empty()) cal.first_day = parse_iso_date(a.from_date);
  if (!a.to_date.empty()) cal.last_day = parse_iso_date(a.to_date);
  for (const auto& d : a.exclude) cal.excluded_days.push_back(parse_iso_date(d));
  if (!a.open_time.empty() || !a.close_time.empty()) {
    if (a.open_time.empty() || a.close_time.empty())
      throw StageError(StageError::Category::Config, "config",
                       "--open and --close must be given together");
    cal.daily_window = {parse_time_of_day(a.open_time), parse_time_of_day(a.close_time)};
  }
  if (a.downsample == "mean")
    cal.downsample = CalendarConfig::Downsample::mean;
  else if (a.downsample != "point")
    throw StageError(StageError::Category::Config, "config",
                     "--downsample must be 'point' or 'mean'");

  const CountSeries ref = read_count_series_file(a.ref);
  const CountSeries wifi = read_count_series_file(a.wifi);
  const CountPair pair = preprocess(ref, wifi, cal);
  if (pair.size() == 0)
    throw StageError(StageError::Category::Data, "calibrate",
                     "no overlapping samples after preprocessing");
  const CalibrationReport report = calibrate(pair);

  nlohmann::json j;
  j["beta_tilde"] = report.beta_tilde;
  j["rmse"] = report.rmse;
  j["mape_percent"] = report.mape_percent;
  j["mean_reference"] = report.mean_reference;
  j["n_samples"] = report.n_samples;
  j["mape_excluded"] = report.mape_excluded;
  if (a.out.empty()) {
    std::cout << j.dump(2) << '\n';
  } else {
    auto out = open_output(a.out);
    out << j.dump(2) << '\n';
  }

  if (a.weekly || a.window_seconds) {
    WindowSpec spec = WindowSpec::weekly();
    if (a.window_seconds) spec = WindowSpec{*a.window_seconds, 0};
    const WindowedReport wr = fit_windowed(pair, spec);
    std::ostream* os = &std::cout;
    std::ofstream file;
    if (!a.out_windows.empty()) {
      file = open_output(a.out_windows);
      os = &file;
    }
    *os << "window_start_ts,beta_tilde,mean_reference,rmse,mape_percent\n";
    for (const auto& w : wr.windows)
      *os << w.window_start << ',' << detail::format_double(w.report.beta_tilde) << ','
          << detail::format_double(w.report.mean_reference) << ','
          << detail::format_double(w.report.rmse) << ','
          << detail::format_double(w.report.mape_percent) << '\n';
    *os << "average," << detail::format_double(wr.aggregate.beta_tilde) << ','
        << detail::format_double(wr.aggregate.mean_reference) << ','
        << detail::format_double(wr.aggregate.rmse) << ','
        << detail::format_double(wr.aggregate.mape_percent) << '\n';
  }
  return 0;
}

struct DumpArgs {
  std::string in;
  std::string out_dir;
  std::int32_t frame_duration = 60;
  std::int64_t epoch = 0;
  std::uint64_t seed = 1;
  std::optional<std::int64_t> keep_days;
};

// Parses "<prefix>sensor<id>_day<day>.prbdump"; returns the day or nothing.
std::optional<std::uint32_t> day_from_dump_name(const fs::path& path) {
  unsigned sensor = 0, day = 0;
  if (std::sscanf(path.filename().c_str(), "sensor%u_day%u.prbdump", &sensor, &day) != 2)
    return std::nullopt;
  return day;
}

int cmd_dump(const DumpArgs& a) {
  auto in = open_input(a.in);
  auto records = read_records_csv(in);
  const FrameSpec spec{a.epoch, a.frame_duration};

  std::map<std::int64_t, std::vector<ProbeRecord>> frames;
  for (const auto& r : records) frames[frame_of(r.ts, spec)].push_back(r);
  std::mt19937_64 rng(a.seed);
  for (auto& [k, frame_records] : frames) rerandomize_frame(frame_records, rng);

  std::map<std::pair<std::uint16_t, std::uint32_t>, std::vector<ProbeRecord>> files;
  for (const auto& [k, frame_records] : frames)
    for (const auto& r : frame_records) files[{r.sensor_id, day_of(r.ts)}].push_back(r);

  fs::create_directories(a.out_dir);
  std::uint32_t newest_day = 0;
  for (const auto& [key, file_records] : files) {
    const fs::path path = fs::path(a.out_dir) / dump_file_name(key.first, key.second);
    write_dump(file_records, key.first, key.second, path);
    newest_day = std::max(newest_day, key.second);
    std::cout << path.string() << '\n';
  }

  // Retention: drop dump files older than the newest day minus the window.
  if (a.keep_days) {
    if (*a.keep_days < 1)
      throw StageError(StageError::Category::Config, "config", "--keep-days must be >= 1");
    for (const auto& entry : fs::directory_iterator(a.out_dir)) {
      if (!entry.is_regular_file()) continue;
      const auto day = day_from_dump_name(entry.path());
      if (day && static_cast<std::int64_t>(*day) <=
                     static_cast<std::int64_t>(newest_day) - *a.keep_days)
        fs::remove(entry.path());
    }
  }
  return 0;
}

struct ReadDumpArgs {
  std::string in;
  std::string out;
};

int cmd_read_dump(const ReadDumpArgs& a) {
  const DumpContent content = read_dump(a.in);
  std::cerr << "sensor " << content.meta.sensor_id << " day " << content.meta.day
            << " records " << content.meta.record_count << '\n';
  if (a.out.empty()) {
    write_records_csv(std::cout, content.records);
  } else {
    auto out = open_output(a.out);
    write_records_csv(out, content.records);
  }
  return 0;
}

struct PipelineArgs {
  std::string config;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

int cmd_pipeline(const PipelineArgs& a) {
  PipelineConfig cfg = load_pipeline_config(a.config);
  if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
  if (a.seed) cfg.seed = *a.seed;
  const PipelineResult result = run_pipeline(cfg);
  std::cout << "pipeline: wrote " << result.artifacts.size() << " artifacts to "
            << result.out_dir.string() << '\n';
  std::cout << "beta_tilde=" << detail::format_double(result.report.beta_tilde)
            << " rmse=" << detail::format_double(result.report.rmse)
            << " mape=" << detail::format_double(result.report.mape_percent) << "%\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Privacy-preserving probe-request crowd counting toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate",
                                   "Generate a raw probe stream and ground truth");
  c_sim->add_option("--config", sim.config, "Scenario JSON")->required();
  c_sim->add_option("--out-raw", sim.out_raw, "Raw records CSV (pre-anonymization)")->required();
  c_sim->add_option("--out-gt", sim.out_gt, "Ground truth CSV")->required();
  c_sim->add_option("--seed", sim.seed, "Scenario seed override");
  c_sim->add_option("--frames", sim.frames, "Frame count override");

  PeppersArgs pep;
  auto* c_pep = app.add_subcommand("peppers", "Generate a server pepper file");
  c_pep->add_option("--first-minute", pep.first_minute, "First minute index")->required();
  c_pep->add_option("--last-minute", pep.last_minute, "Last minute index")->required();
  c_pep->add_option("--out", pep.out, "Pepper file")->required();
  c_pep->add_option("--seed", pep.seed,
                    "Deterministic source seed (default: system entropy)");

  AnonymizeArgs anon;
  auto* c_anon = app.add_subcommand("anonymize", "Hash raw records into tokens");
  c_anon->add_option("--in", anon.in, "Raw records CSV")->required();
  c_anon->add_option("--peppers", anon.peppers, "Server pepper file")->required();
  c_anon->add_option("--sensor-pepper", anon.sensor_pepper,
                     "Sensor pepper, 32 hex chars (or PRBCOUNT_SENSOR_PEPPER)");
  c_anon->add_option("--out", anon.out, "Anonymized records CSV")->required();

  CountArgs cnt;
  auto* c_cnt = app.add_subcommand("count", "Per-frame deduplicated counts");
  c_cnt->add_option("--config", cnt.config, "Scenario JSON (sensors, frame grid)")->required();
  c_cnt->add_option("--in", cnt.in_records, "Anonymized records CSV");
  c_cnt->add_option("--dump", cnt.dumps, "Dump file(s) to count");
  c_cnt->add_option("--out", cnt.out, "Counts CSV")->required();
  c_cnt->add_option("--out-areas", cnt.out_areas, "Per-area counts CSV");
  c_cnt->add_option("--frame-duration", cnt.frame_duration, "Frame duration override, seconds");
  c_cnt->add_option("--epoch", cnt.epoch, "Frame grid epoch override");
  c_cnt->add_option("--rssi-threshold", cnt.threshold_overrides,
                    "Threshold override: DBM for all sensors or ID=DBM");

  BoundsArgs bnd;
  auto* c_bnd = app.add_subcommand("bounds", "Concentration bound tables");
  c_bnd->add_option("--p-min", bnd.p_min, "Grid start");
  c_bnd->add_option("--p-max", bnd.p_max, "Grid end");
  c_bnd->add_option("--p-step", bnd.p_step, "Grid step");
  c_bnd->add_option("--n", bnd.n_ppl, "Population size");
  c_bnd->add_option("--phi", bnd.phi, "Relative deviation");
  c_bnd->add_option("--trials", bnd.trials, "Monte-Carlo trials (0 to skip)");
  c_bnd->add_option("--seed", bnd.seed, "Monte-Carlo seed");
  c_bnd->add_option("--out", bnd.out, "Output CSV")->required();

  CalibrateArgs cal;
  auto* c_cal = app.add_subcommand("calibrate", "Fit the extrapolation factor");
  c_cal->add_option("--ref", cal.ref, "Reference series CSV")->required();
  c_cal->add_option("--wifi", cal.wifi, "Measured series CSV")->required();
  c_cal->add_option("--from", cal.from_date, "First date, YYYY-MM-DD");
  c_cal->add_option("--to", cal.to_date, "Last date, YYYY-MM-DD");
  c_cal->add_option("--exclude", cal.exclude, "Excluded date(s), YYYY-MM-DD");
  c_cal->add_option("--open", cal.open_time, "Daily window start, HH:MM");
  c_cal->add_option("--close", cal.close_time, "Daily window end, HH:MM");
  c_cal->add_option("--downsample", cal.downsample, "point (default) or mean");
  c_cal->add_flag("--weekly", cal.weekly, "Also fit per calendar week");
  c_cal->add_option("--window-seconds", cal.window_seconds, "Custom window length");
  c_cal->add_option("--out", cal.out, "Report JSON (default: stdout)");
  c_cal->add_option("--out-windows", cal.out_windows, "Windowed table CSV");

  DumpArgs dmp;
  auto* c_dmp = app.add_subcommand("dump", "Re-randomize and write binary dumps");
  c_dmp->add_option("--in", dmp.in, "Anonymized records CSV")->required();
  c_dmp->add_option("--out-dir", dmp.out_dir, "Dump directory")->required();
  c_dmp->add_option("--frame-duration", dmp.frame_duration, "Frame duration, seconds");
  c_dmp->add_option("--epoch", dmp.epoch, "Frame grid epoch");
  c_dmp->add_option("--seed", dmp.seed, "Re-randomization seed");
  c_dmp->add_option("--keep-days", dmp.keep_days,
                    "Retention: delete dumps older than this many days");

  ReadDumpArgs rdd;
  auto* c_rdd = app.add_subcommand("read-dump", "Decode a binary dump file");
  c_rdd->add_option("--in", rdd.in, "Dump file")->required();
  c_rdd->add_option("--out", rdd.out, "Records CSV (default: stdout)");

  PipelineArgs pip;
  auto* c_pip = app.add_subcommand("pipeline", "Run the full pipeline");
  c_pip->add_option("--config", pip.config, "Pipeline JSON")->required();
  c_pip->add_option("--out", pip.out_dir, "Output directory override");
  c_pip->add_option("--seed", pip.seed, "Pipeline seed override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (c_sim->parsed()) return cmd_simulate(sim);
    if (c_pep->parsed()) return cmd_peppers(pep);
    if (c_anon->parsed()) return cmd_anonymize(anon);
    if (c_cnt->parsed()) return cmd_count(cnt);
    if (c_bnd->parsed()) return cmd_bounds(bnd);
    if (c_cal->parsed()) return cmd_calibrate(cal);
    if (c_dmp->parsed()) return cmd_dump(dmp);
    if (c_rdd->parsed()) return cmd_read_dump(rdd);
    if (c_pip->parsed()) return cmd_pipeline(pip);
  } catch (const StageError& e) {
    std::cerr << "error " << e.what() << '\n';
    return e.category() == StageError::Category::Config ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
