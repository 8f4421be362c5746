#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fscil/cli/ablation.hpp"
#include "fscil/cli/config.hpp"
#include "fscil/cli/experiment.hpp"
#include "fscil/cli/report.hpp"
#include "fscil/core/report.hpp"

namespace fs = std::filesystem;
using namespace fscil;
using namespace fscil::cli;

namespace {

// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fscil_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

// Six 16x16 classes, a two-session curriculum and a one-epoch-per-stage model.
const char* kTiny = R"(name = "tiny"
seed = 3
[data]
class_count = 6
image_size = 16
samples_per_class = 6
test_samples_per_class = 3
signal_patch_size = 8
nuisance_patch_size = 4
placement_grid = 4
base_classes = 2
sessions = 2
way = 2
shot = 2
[model]
input = [16, 16, 1]
widths = [4, 4, 4, 4]
pooled_blocks = 2
[protocol]
pretrain_epochs = 1
decouple_epochs = 1
batch_size = 4
learning_rate = 0.01
clip_norm = 5.0
[analysis]
export_masks = 2
)";

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(FSCIL_BINARY) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults survive a json round trip") {
    ExperimentConfig c;
    c.validate();
    c.model.input.channels = 3;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c.model.input.channels = 1;
    const nlohmann::json j = to_json(c);
    CHECK(to_json(experiment_config_from_json(j)) == j);
    CHECK(j["protocol"]["head_init"] == "CLASS_MEANS");
    CHECK(j["model"]["widths"].size() == 4);
  }

  TEST_CASE("toml and json spell the same config") {
    const fs::path dir = scratch("toml_json");
    spit(dir / "tiny.toml", kTiny);
    const ExperimentConfig from_toml = load_experiment_config(dir / "tiny.toml");
    spit(dir / "tiny.json", to_json(from_toml).dump(2));
    const ExperimentConfig from_json = load_experiment_config(dir / "tiny.json");
    CHECK(to_json(from_toml) == to_json(from_json));
    CHECK(from_toml.data.synthetic.image_size == 16);
    CHECK(from_toml.model.widths == std::vector<int>{4, 4, 4, 4});
    CHECK(from_toml.training.optimizer.clip_norm == 5.0);
    CHECK(from_toml.seed == 3);
  }

  TEST_CASE("strict parsing names the offending field") {
    auto err = [](const std::string& toml) {
      try {
        experiment_config_from_json(parse_toml(toml)).validate();
      } catch (const ConfigError& e) {
        return std::string(e.what());
      }
      return std::string("accepted");
    };
    CHECK(err("bogus = 1") == "bogus: unknown key");
    CHECK(err("[data]\nwidth = 3").find("data.width: unknown key") != std::string::npos);
    CHECK(err("[mystery]").find("mystery") != std::string::npos);
    CHECK(err("[data]\nshot = \"five\"").find("data.shot: expected an integer") != std::string::npos);
    CHECK(err("seed = -1").find("seed") != std::string::npos);
    CHECK(err("[rdi]\nlambda = true").find("rdi.lambda") != std::string::npos);
    CHECK(err("[protocol]\nhead_init = \"ZEROS\"").find("protocol.head_init") != std::string::npos);
    CHECK(err("[protocol]\nclip_norm = -1.0").find("clip_norm") != std::string::npos);
    CHECK(err("[data]\nsource = \"index\"").find("data.schedule_only") != std::string::npos);
    CHECK(err("[model]\narchitecture = \"vgg\"").find("model") != std::string::npos);
    CHECK(err("name = \"\"").find("name") != std::string::npos);
    CHECK_THROWS_AS(parse_toml("[data\nshot = 1"), ConfigError);
    CHECK_THROWS_AS(load_experiment_config("/nonexistent/x.toml"), ConfigError);
  }

  TEST_CASE("sub-seeds differ from each other and across masters") {
    ExperimentConfig a, b;
    b.seed = 1;
    const std::set<std::uint64_t> all{a.data_seed(), a.schedule_seed(), a.init_seed(), a.train_seed(),
                                      b.data_seed(), b.schedule_seed(), b.init_seed(), b.train_seed()};
    CHECK(all.size() == 8);
  }

  TEST_CASE("shipped configs validate") {
    for (const auto& entry : fs::directory_iterator(FSCIL_CONFIG_DIR)) {
      if (entry.path().filename() == "desk_ablation.toml") continue;
      CAPTURE(entry.path().string());
      CHECK_NOTHROW(load_experiment_config(entry.path()).validate());
    }
    const auto desk = load_experiment_config(fs::path(FSCIL_CONFIG_DIR) / "desk_synthetic.toml");
    const auto base = load_experiment_config(fs::path(FSCIL_CONFIG_DIR) / "baseline.toml");
    CHECK(base.rdi.lambda == 0.0);
    CHECK(base.rdi.beta == 0.0);
    // The baseline differs from the desk run only in its name and loss weights.
    nlohmann::json dj = to_json(desk), bj = to_json(base);
    for (auto* j : {&dj, &bj}) {
      j->erase("name");
      (*j)["rdi"].erase("lambda");
      (*j)["rdi"].erase("beta");
    }
    CHECK(dj == bj);
  }
}

TEST_SUITE("schedules") {
  TEST_CASE("index-only benchmark schedules") {
    struct Expect {
      const char* file;
      int first, step, rows;
    };
    for (const Expect e : {Expect{"cifar100_schedule.toml", 60, 5, 9}, Expect{"cub200_schedule.toml", 100, 10, 11}}) {
      CAPTURE(e.file);
      const auto cfg = load_experiment_config(fs::path(FSCIL_CONFIG_DIR) / e.file);
      const auto adapter = make_dataset(cfg);
      CHECK_FALSE(adapter->has_images());
      const auto schedule = make_schedule(cfg, *adapter);
      CHECK(validate_schedule(schedule).ok());
      const auto rows = summarize_schedule(schedule);
      REQUIRE(rows.size() == static_cast<std::size_t>(e.rows));
      for (int t = 0; t < e.rows; ++t) CHECK(rows[t].cumulative_classes == e.first + t * e.step);
    }
  }

  TEST_CASE("schedule-only run writes the schedule and nothing else") {
    const fs::path dir = scratch("schedule_only");
    const auto cfg = load_experiment_config(fs::path(FSCIL_CONFIG_DIR) / "cifar100_schedule.toml");
    const RunSummary s = run_experiment(cfg, dir / "run");
    CHECK(s.schedule_only);
    CHECK(s.reports.empty());
    CHECK(s.schedule_rows.size() == 9);
    const std::string csv = slurp(dir / "run" / "reports" / "schedule.csv");
    CHECK(csv.find("0,60,0,60,30000,6000") != std::string::npos);
    CHECK(csv.find("8,5,5,100,25,10000") != std::string::npos);
    CHECK_FALSE(fs::exists(dir / "run" / "metrics.csv"));
  }
}

TEST_SUITE("runs") {
  TEST_CASE("metrics csv round trips") {
    const fs::path dir = scratch("metrics");
    const std::vector<EvalReport> reports{EvalReport::base_session(0.9, 0.9),
                                          EvalReport::incremental(1, 0.8, 0.85, 0.5, 0.8, 0.625)};
    write_metrics_csv(dir / "m.csv", reports);
    const auto rows = read_metrics_csv(dir / "m.csv");
    REQUIRE(rows.size() == 2);
    CHECK_FALSE(rows[0].na.has_value());
    CHECK_FALSE(rows[0].gap.has_value());
    CHECK(rows[1].na.value() == doctest::Approx(0.5));
    CHECK(rows[1].nn.value() == doctest::Approx(0.625));
    CHECK(rows[1].gap.value() == doctest::Approx(0.125));
  }

  TEST_CASE("a full run is byte-identical under a fixed seed") {
    const fs::path dir = scratch("determinism");
    spit(dir / "tiny.toml", kTiny);
    const auto cfg = load_experiment_config(dir / "tiny.toml");
    const RunSummary a = run_experiment(cfg, dir / "a");
    const RunSummary b = run_experiment(cfg, dir / "b");
    REQUIRE(a.reports.size() == 3);
    CHECK(slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv"));
    CHECK(slurp(dir / "a" / "reports" / "training_log.csv") == slurp(dir / "b" / "reports" / "training_log.csv"));
    CHECK(slurp(dir / "a" / "checkpoints" / "base.ckpt") == slurp(dir / "b" / "checkpoints" / "base.ckpt"));
    // Every session saw the same backbone.
    const auto hashes = a.analysis.at("backbone_hashes");
    REQUIRE(hashes.size() == 3);
    for (const auto& h : hashes) CHECK(h == hashes[0]);
    CHECK(fs::exists(dir / "a" / "reports" / "session_2.json"));
    CHECK(fs::exists(dir / "a" / "masks"));

    ExperimentConfig other = cfg;
    other.seed = 4;
    run_experiment(other, dir / "c");
    CHECK(slurp(dir / "a" / "reports" / "training_log.csv") != slurp(dir / "c" / "reports" / "training_log.csv"));
  }

  TEST_CASE("reports render and list what is missing") {
    const fs::path dir = scratch("report");
    spit(dir / "tiny.toml", kTiny);
    const auto cfg = load_experiment_config(dir / "tiny.toml");
    run_experiment(cfg, dir / "a");
    run_experiment(cfg, dir / "b");
    const RenderedReport r = render_report(dir / "a", dir / "b");
    CHECK(fs::exists(r.markdown));
    CHECK(r.gaps.empty());
    CHECK_FALSE(r.images.empty());
    for (const auto& img : r.images) CHECK(fs::file_size(img) > 0);
    const std::string md = slurp(r.markdown);
    CHECK(md.find("tiny") != std::string::npos);

    fs::remove(dir / "b" / "metrics.csv");
    const RenderedReport partial = render_report(dir / "b");
    CHECK_FALSE(partial.gaps.empty());
  }
}

TEST_SUITE("ablation") {
  TEST_CASE("grid expands variants, sweeps and seeds") {
    const fs::path dir = scratch("grid");
    spit(dir / "tiny.toml", kTiny);
    spit(dir / "grid.toml", "base_config = \"tiny.toml\"\nseeds = [0, 1]\n");
    auto cells = expand_grid(load_grid_config(dir / "grid.toml"));
    REQUIRE(cells.size() == 8);
    std::map<std::string, std::pair<double, double>> weights;
    for (const auto& c : cells) {
      weights[to_string(c.variant)] = {c.config.rdi.lambda, c.config.rdi.beta};
      CHECK(c.config.name == c.id);
      CHECK(c.config.seed == c.seed);
    }
    CHECK(weights["base"] == std::pair{0.0, 0.0});
    CHECK(weights["alr"] == std::pair{1.0, 0.0});
    CHECK(weights["ali"] == std::pair{0.0, 1.0});
    CHECK(weights["full"] == std::pair{1.0, 1.0});
    CHECK(cells.front().id == "base_seed0");

    spit(dir / "sweep.toml",
         "base_config = \"tiny.toml\"\nvariants = [\"full\"]\nlambda = [0.5, 2.0]\nthreshold = [0.1]\n");
    cells = expand_grid(load_grid_config(dir / "sweep.toml"));
    REQUIRE(cells.size() == 2);
    CHECK(cells[0].id == "full_lam0.5_beta1_thr0.1_seed0");
    CHECK(cells[1].config.rdi.lambda == 2.0);
    CHECK(cells[1].config.rdi.threshold == 0.1);

    spit(dir / "bad.toml", "base_config = \"tiny.toml\"\nsurprise = 1\n");
    CHECK_THROWS_AS(load_grid_config(dir / "bad.toml"), ConfigError);
    spit(dir / "bad2.toml", "base_config = \"tiny.toml\"\nvariants = [\"half\"]\n");
    CHECK_THROWS_AS(load_grid_config(dir / "bad2.toml"), ConfigError);
    spit(dir / "bad3.toml", "base_config = \"tiny.toml\"\nseeds = [-1]\n");
    CHECK_THROWS_AS(load_grid_config(dir / "bad3.toml"), ConfigError);
  }

  TEST_CASE("a failing cell is recorded and the rest still run") {
    const fs::path dir = scratch("ablate");
    spit(dir / "tiny.toml", kTiny);
    spit(dir / "grid.toml", "base_config = \"tiny.toml\"\nvariants = [\"base\", \"full\"]\n");
    const GridConfig grid = load_grid_config(dir / "grid.toml");
    const CellRunner flaky = [](const Cell& cell, const fs::path& run_dir) {
      if (cell.variant == LossVariant::kFull) throw std::runtime_error("boom");
      run_experiment(cell.config, run_dir);
    };
    const AblationResult r = run_ablation(grid, dir / "out", nullptr, flaky);
    REQUIRE(r.outcomes.size() == 2);
    CHECK_FALSE(r.all_ok());
    CHECK(r.outcomes[0].ok);
    CHECK_FALSE(r.outcomes[1].ok);
    CHECK(r.outcomes[1].error.find("boom") != std::string::npos);
    const std::string table = slurp(r.table);
    CHECK(table.find("variant,lambda,beta,threshold,runs,failed,novel,average,gap") == 0);
    CHECK(table.find("base,") != std::string::npos);
    CHECK(slurp(dir / "out" / "ablation_runs.csv").find("failed") != std::string::npos);
  }
}

TEST_SUITE("binary") {
  TEST_CASE("exit codes") {
    const fs::path dir = scratch("binary");
    spit(dir / "tiny.toml", kTiny);
    spit(dir / "bad.toml", "bogus = 1\n");
    std::string boom = kTiny;
    boom.replace(boom.find("pooled_blocks = 2"), 17, "pooled_blocks = 2\ntemperature = 1e308");
    boom.replace(boom.find("clip_norm = 5.0"), 15, "clip_norm = 0.0");
    spit(dir / "boom.toml", boom);
    spit(dir / "dir.toml", "name = \"d\"\n[data]\nsource = \"directory\"\nroot = \"/nonexistent\"\n"
                           "[model]\ninput = [8, 8, 1]\n");
    const fs::path log = dir / "log.txt";
    const std::string root = " --run-root " + (dir / "runs").string();

    CHECK(run_cli("validate-config --config " + (dir / "tiny.toml").string(), log) == 0);
    CHECK(nlohmann::json::parse(slurp(log))["name"] == "tiny");
    CHECK(run_cli("validate-config --config " + (dir / "bad.toml").string(), log) == 2);
    CHECK(slurp(log).find("bogus: unknown key") != std::string::npos);
    CHECK(run_cli("validate-config --grid --config " + std::string(FSCIL_CONFIG_DIR) + "/desk_ablation.toml",
                  log) == 0);
    CHECK(slurp(log).find("full_seed2") != std::string::npos);

    CHECK(run_cli("run --quiet --config " + (dir / "tiny.toml").string() + root, log) == 0);
    CHECK(fs::exists(dir / "runs" / "tiny" / "metrics.csv"));
    CHECK(run_cli("report --run " + (dir / "runs" / "tiny").string(), log) == 0);
    CHECK(fs::exists(dir / "runs" / "tiny" / "report" / "report.md"));

    CHECK(run_cli("run --quiet --config " + (dir / "dir.toml").string() + root, log) == 1);
    CHECK(run_cli("run --quiet --config " + (dir / "boom.toml").string() + root + " --run-id boom", log) == 3);
    const auto dump = nlohmann::json::parse(slurp(dir / "runs" / "boom" / "divergence.json"));
    CHECK(dump.contains("parameter_norms"));
    CHECK(dump["stage"] == 1);
  }
}
