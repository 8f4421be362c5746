#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fscil/cli/config.hpp"

namespace fscil::cli {

// Which loss terms a cell switches on. "base" is the plain objective, "alr"
// and "ali" add one dummy term each, "full" adds both.
enum class LossVariant { kBase, kAlr, kAli, kFull };
std::string to_string(LossVariant variant);
LossVariant loss_variant_from_string(const std::string& text);

struct GridConfig {
  std::string name = "ablation";
  nlohmann::json base;  // experiment config document every cell starts from
  std::vector<std::uint64_t> seeds{0};
  std::vector<LossVariant> variants{LossVariant::kBase, LossVariant::kAlr, LossVariant::kAli,
                                    LossVariant::kFull};
  // Optional sweeps; empty keeps the base config's value.
  std::vector<double> lambdas;
  std::vector<double> betas;
  std::vector<double> thresholds;
};

// Base config path is resolved relative to the grid file.
GridConfig load_grid_config(const std::filesystem::path& path);

struct Cell {
  std::string id;  // also the run directory name
  LossVariant variant = LossVariant::kBase;
  double lambda = 0.0;
  double beta = 0.0;
  double threshold = 0.0;
  std::uint64_t seed = 0;
  ExperimentConfig config;
};

std::vector<Cell> expand_grid(const GridConfig& grid);

struct CellOutcome {
  Cell cell;
  bool ok = false;
  std::string error;
  double novel = 0.0;    // final-session NA
  double average = 0.0;  // mean session top-1
  double gap = 0.0;      // final-session NN - NA
};

// Runs one cell in some other way (e.g. a child process) and leaves a
// finished run directory behind; the default runs in-process.
using CellRunner = std::function<void(const Cell&, const std::filesystem::path& run_dir)>;

struct AblationResult {
  std::vector<CellOutcome> outcomes;
  std::filesystem::path table;  // ablation.csv, one row per setting, seeds averaged
  bool all_ok() const;
};

// A failing cell is recorded and the rest still run.
AblationResult run_ablation(const GridConfig& grid, const std::filesystem::path& out_dir,
                            std::ostream* log = nullptr, const CellRunner& runner = {},
                            int jobs = 1);

// Summary numbers of a finished run directory.
CellOutcome summarize_run(const Cell& cell, const std::filesystem::path& run_dir);

}  // namespace fscil::cli
