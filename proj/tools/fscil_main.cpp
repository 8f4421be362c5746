// fscil: run, ablate, report and validate-config over experiment configs.

#include <spawn.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "fscil/cli/ablation.hpp"
#include "fscil/cli/config.hpp"
#include "fscil/cli/experiment.hpp"
#include "fscil/cli/report.hpp"
#include "fscil/protocol/trainer.hpp"

extern char** environ;

namespace fs = std::filesystem;
using namespace fscil;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

// Runs one grid cell as a child `run` process of this same binary.
cli::CellRunner process_runner(const fs::path& out_dir) {
  return [out_dir](const cli::Cell& cell, const fs::path& run_dir) {
    fs::create_directories(out_dir / "cell_configs");
    const fs::path config = out_dir / "cell_configs" / (cell.id + ".json");
    std::ofstream(config) << cli::to_json(cell.config).dump(2) << '\n';
    const std::string exe = fs::read_symlink("/proc/self/exe").string();
    std::vector<std::string> args{exe,       "run", "--config", config.string(), "--run-root",
                                  out_dir.string(), "--run-id", run_dir.filename().string(),
                                  "--quiet"};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    if (posix_spawn(&pid, exe.c_str(), nullptr, nullptr, argv.data(), environ) != 0) {
      throw std::runtime_error("cannot spawn child for cell " + cell.id);
    }
    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      throw std::runtime_error("child run for cell " + cell.id + " exited with status " +
                               std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
    }
  };
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Few-shot class-incremental experiments with redundancy decoupling"};
  app.require_subcommand(1);

  std::string config_path, run_root, run_id, grid_path, run_dir, compare_dir;
  bool quiet = false, as_grid = false;
  int jobs = 1;

  auto* run = app.add_subcommand("run", "Train and evaluate one experiment");
  run->add_option("--config", config_path, "Experiment config (.toml or .json)")->required();
  run->add_option("--run-root", run_root, "Parent of run directories (default $FSCIL_RUN_ROOT or ./runs)");
  run->add_option("--run-id", run_id, "Run directory name (default: config name)");
  run->add_flag("--quiet", quiet, "Only print errors");

  auto* ablate = app.add_subcommand("ablate", "Run a loss-term ablation grid");
  ablate->add_option("--grid", grid_path, "Grid config")->required();
  ablate->add_option("--run-root", run_root, "Parent of the grid directory");
  ablate->add_option("--jobs", jobs, "Cells run concurrently as child processes")->check(CLI::PositiveNumber);
  ablate->add_flag("--quiet", quiet, "Only print errors");

  auto* report = app.add_subcommand("report", "Render a markdown summary and plots for a run");
  report->add_option("--run", run_dir, "Run directory")->required();
  report->add_option("--compare", compare_dir, "Second run directory to compare against");

  auto* validate = app.add_subcommand("validate-config", "Check a config and print it resolved");
  validate->add_option("--config", config_path, "Experiment or grid config")->required();
  validate->add_flag("--grid", as_grid, "Treat the file as an ablation grid");

  CLI11_PARSE(app, argc, argv);

  const fs::path root = run_root.empty() ? cli::default_run_root() : fs::path(run_root);
  std::ostream* log = quiet ? nullptr : &std::cout;
  try {
    if (*run) {
      const cli::ExperimentConfig config = cli::load_experiment_config(config_path);
      const fs::path dir = root / (run_id.empty() ? config.name : run_id);
      const auto summary = cli::run_experiment(config, dir, log);
      if (log) *log << "run directory: " << summary.run_dir.string() << '\n';
    } else if (*ablate) {
      const cli::GridConfig grid = cli::load_grid_config(grid_path);
      const fs::path dir = root / grid.name;
      const auto result = cli::run_ablation(grid, dir, log, jobs > 1 ? process_runner(dir) : cli::CellRunner{}, jobs);
      if (log) *log << "table: " << result.table.string() << '\n';
      if (!result.all_ok()) {
        std::cerr << "some cells failed; see " << (dir / "ablation_runs.csv").string() << '\n';
        return kExitRuntime;
      }
    } else if (*report) {
      const auto out = cli::render_report(run_dir, compare_dir.empty() ? std::nullopt
                                                                       : std::optional<fs::path>(compare_dir));
      std::cout << out.markdown.string() << '\n';
      for (const auto& g : out.gaps) std::cerr << "missing: " << g << '\n';
    } else if (*validate) {
      if (as_grid) {
        const auto cells = cli::expand_grid(cli::load_grid_config(config_path));
        for (const auto& c : cells) std::cout << c.id << '\n';
      } else {
        std::cout << cli::to_json(cli::load_experiment_config(config_path)).dump(2) << '\n';
      }
    }
  } catch (const cli::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const protocol::TrainingDiverged& e) {
    std::cerr << "diverged: " << e.what() << '\n' << e.dump().dump(2) << '\n';
    return kExitDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
