#include "prbcount/pipeline.hpp"

#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <regex>
#include <string>

using namespace prbcount;
namespace fs = std::filesystem;

namespace {

const fs::path kSourceDir = PRBCOUNT_SOURCE_DIR;

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() /
                       ("prbcount_pipe_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir))
    if (entry.is_regular_file())
      out[fs::relative(entry.path(), dir).string()] = read_file(entry.path());
  return out;
}

PipelineConfig demo_config() {
  return load_pipeline_config(kSourceDir / "configs" / "demo_pipeline.json");
}

}  // namespace

TEST(Pipeline, DemoConfigRunsEndToEnd) {
  PipelineConfig cfg = demo_config();
  cfg.out_dir = temp_dir("run");
  const PipelineResult result = run_pipeline(cfg);

  for (const char* name :
       {"ground_truth.csv", "counts.csv", "area_counts.csv", "estimates.csv",
        "wifi_series.csv", "reference_series.csv", "calibration_report.json",
        "windows.csv", "bounds.csv", "run_manifest.json"})
    EXPECT_TRUE(fs::exists(cfg.out_dir / name)) << name;

  // The demo covers the whole arena, so the fitted factor approximates
  // 1/p modulo detection losses at the arena edges.
  const double p = mean_tx_probability(cfg.scenario.population);
  EXPECT_GT(result.report.beta_tilde, 1.0 / p * 0.9);
  EXPECT_LT(result.report.beta_tilde, 1.0 / p * 1.6);
  EXPECT_EQ(result.wifi_series.size(), static_cast<std::size_t>(cfg.scenario.n_frames));
  EXPECT_TRUE(result.windowed.has_value());
  fs::remove_all(cfg.out_dir);
}

TEST(Pipeline, DeterministicAcrossRuns) {
  PipelineConfig cfg = demo_config();
  cfg.out_dir = temp_dir("det_a");
  run_pipeline(cfg);
  PipelineConfig cfg2 = demo_config();
  cfg2.out_dir = temp_dir("det_b");
  run_pipeline(cfg2);
  EXPECT_EQ(dir_contents(cfg.out_dir), dir_contents(cfg2.out_dir));
  fs::remove_all(cfg.out_dir);
  fs::remove_all(cfg2.out_dir);
}

TEST(Pipeline, NoRawMacInAnyArtifact) {
  PipelineConfig cfg = demo_config();
  cfg.out_dir = temp_dir("grep");
  run_pipeline(cfg);
  const std::regex mac_pattern("[0-9a-fA-F]{2}(:[0-9a-fA-F]{2}){5}");
  for (const auto& [name, content] : dir_contents(cfg.out_dir))
    EXPECT_FALSE(std::regex_search(content, mac_pattern)) << name;
  fs::remove_all(cfg.out_dir);
}

TEST(Pipeline, DumpRoundTripDoesNotChangeCounts) {
  // Token re-randomization inside the dump stage must leave every count
  // unchanged: dump-enabled and dump-disabled runs agree on counts.csv.
  PipelineConfig with_dump = demo_config();
  with_dump.out_dir = temp_dir("dump_on");
  with_dump.dump_enabled = true;
  run_pipeline(with_dump);

  PipelineConfig without_dump = demo_config();
  without_dump.out_dir = temp_dir("dump_off");
  without_dump.dump_enabled = false;
  run_pipeline(without_dump);

  EXPECT_EQ(read_file(with_dump.out_dir / "counts.csv"),
            read_file(without_dump.out_dir / "counts.csv"));
  EXPECT_EQ(read_file(with_dump.out_dir / "estimates.csv"),
            read_file(without_dump.out_dir / "estimates.csv"));
  fs::remove_all(with_dump.out_dir);
  fs::remove_all(without_dump.out_dir);
}

TEST(Pipeline, MissingScenarioIsConfigError) {
  const fs::path dir = temp_dir("badcfg");
  const fs::path cfg_path = dir / "pipe.json";
  {
    std::ofstream out(cfg_path);
    out << R"({"scenario": "does_not_exist.json"})";
  }
  try {
    load_pipeline_config(cfg_path);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.category(), StageError::Category::Config);
    EXPECT_EQ(e.stage(), "config");
  }
  fs::remove_all(dir);
}

TEST(Pipeline, MalformedScenarioIsConfigError) {
  const fs::path dir = temp_dir("badjson");
  const fs::path scenario = dir / "scenario.json";
  {
    std::ofstream out(scenario);
    out << "{not json";
  }
  EXPECT_THROW(load_scenario(scenario), StageError);
  {
    std::ofstream out(scenario);
    out << R"({"frames": 10, "population": {"n_ppl": 5, "mixture": []}, "sensors": []})";
  }
  EXPECT_THROW(load_scenario(scenario), StageError);
  fs::remove_all(dir);
}

TEST(Pipeline, FixedBetaModeUsesConfiguredValue) {
  PipelineConfig cfg = demo_config();
  cfg.out_dir = temp_dir("fixed");
  cfg.beta.mode = BetaSource::Mode::Fixed;
  cfg.beta.value = 4.0;
  cfg.dump_enabled = false;
  const PipelineResult result = run_pipeline(cfg);
  EXPECT_DOUBLE_EQ(result.beta_used, 4.0);
  // The report still carries the fitted factor.
  EXPECT_NE(result.report.beta_tilde, 4.0);
  fs::remove_all(cfg.out_dir);
}

TEST(Scenario, LoadsDemoScenario) {
  const Scenario sc = load_scenario(kSourceDir / "configs" / "demo_scenario.json");
  EXPECT_EQ(sc.population.n_ppl, 300u);
  EXPECT_EQ(sc.sensors.size(), 3u);
  EXPECT_EQ(sc.n_frames, 120);
  EXPECT_EQ(sc.frames.duration, 60);
  EXPECT_EQ(sc.areas.size(), 2u);
  EXPECT_NEAR(mean_tx_probability(sc.population), 0.265, 1e-12);
}
