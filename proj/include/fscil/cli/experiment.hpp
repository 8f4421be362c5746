#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fscil/cli/config.hpp"
#include "fscil/core/report.hpp"
#include "fscil/core/schedule.hpp"
#include "fscil/data/dataset.hpp"

namespace fscil::cli {

// Layout of one run directory.
struct RunPaths {
  std::filesystem::path root;
  std::filesystem::path config() const { return root / "config.json"; }
  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path reports() const { return root / "reports"; }
  std::filesystem::path masks() const { return root / "masks"; }
  std::filesystem::path metrics() const { return root / "metrics.csv"; }
  std::filesystem::path session_report(int t) const;
};

// $FSCIL_RUN_ROOT when set, otherwise ./runs.
std::filesystem::path default_run_root();

std::unique_ptr<data::DatasetAdapter> make_dataset(const ExperimentConfig& config);
SessionSchedule make_schedule(const ExperimentConfig& config, const data::DatasetAdapter& adapter);

struct MetricsRow {
  int session = 0;
  double top1 = 0.0;
  double ba = 0.0;
  std::optional<double> na;
  double aa = 0.0;
  std::optional<double> nn;
  std::optional<double> gap;
};

void write_metrics_csv(const std::filesystem::path& path, const std::vector<EvalReport>& reports);
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

struct RunSummary {
  std::filesystem::path run_dir;
  bool schedule_only = false;
  std::vector<ScheduleRow> schedule_rows;
  std::vector<EvalReport> reports;
  nlohmann::json analysis;  // null when disabled or schedule-only
};

// Dataset, schedule, base training, incremental sessions and analysis, with
// every artifact written under `run_dir`. On divergence the dump is written
// to run_dir/divergence.json and protocol::TrainingDiverged propagates.
RunSummary run_experiment(const ExperimentConfig& config, const std::filesystem::path& run_dir,
                          std::ostream* log = nullptr);

}  // namespace fscil::cli
