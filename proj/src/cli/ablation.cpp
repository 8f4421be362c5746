#include "fscil/cli/ablation.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <thread>

#include "fscil/cli/experiment.hpp"

namespace fs = std::filesystem;

namespace fscil::cli {

std::string to_string(LossVariant variant) {
  switch (variant) {
    case LossVariant::kBase: return "base";
    case LossVariant::kAlr: return "alr";
    case LossVariant::kAli: return "ali";
    case LossVariant::kFull: return "full";
  }
  return "?";
}

LossVariant loss_variant_from_string(const std::string& text) {
  if (text == "base") return LossVariant::kBase;
  if (text == "alr") return LossVariant::kAlr;
  if (text == "ali") return LossVariant::kAli;
  if (text == "full") return LossVariant::kFull;
  throw std::invalid_argument("unknown variant '" + text + "' (expected base, alr, ali or full)");
}

bool AblationResult::all_ok() const {
  for (const auto& o : outcomes) {
    if (!o.ok) return false;
  }
  return true;
}

namespace {

std::vector<double> numbers(const nlohmann::json& doc, const char* key) {
  std::vector<double> out;
  if (!doc.contains(key)) return out;
  const auto& v = doc.at(key);
  if (!v.is_array()) throw ConfigError(std::string(key) + ": expected an array of numbers");
  for (const auto& e : v) {
    if (!e.is_number()) throw ConfigError(std::string(key) + ": expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

GridConfig load_grid_config(const fs::path& path) {
  const nlohmann::json doc = read_config_document(path);
  if (!doc.is_object()) throw ConfigError("grid: expected a table");
  static const std::set<std::string> known = {"name",    "base_config", "seeds",    "variants",
                                              "lambda",  "beta",        "threshold"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw ConfigError("grid." + key + ": unknown key");
  }
  GridConfig grid;
  if (doc.contains("name")) {
    if (!doc["name"].is_string()) throw ConfigError("grid.name: expected a string");
    grid.name = doc["name"].get<std::string>();
  }
  if (!doc.contains("base_config") || !doc["base_config"].is_string()) {
    throw ConfigError("grid.base_config: required path to an experiment config");
  }
  grid.base = read_config_document(path.parent_path() / doc["base_config"].get<std::string>());
  if (doc.contains("seeds")) {
    grid.seeds.clear();
    for (const auto& s : doc["seeds"]) {
      // TOML integers arrive signed.
      if (!s.is_number_integer() || s.get<std::int64_t>() < 0) {
        throw ConfigError("grid.seeds: expected nonnegative integers");
      }
      grid.seeds.push_back(s.get<std::uint64_t>());
    }
    if (grid.seeds.empty()) throw ConfigError("grid.seeds: must not be empty");
  }
  if (doc.contains("variants")) {
    grid.variants.clear();
    for (const auto& v : doc["variants"]) {
      try {
        grid.variants.push_back(loss_variant_from_string(v.get<std::string>()));
      } catch (const std::exception& e) {
        throw ConfigError(std::string("grid.variants: ") + e.what());
      }
    }
    if (grid.variants.empty()) throw ConfigError("grid.variants: must not be empty");
  }
  grid.lambdas = numbers(doc, "lambda");
  grid.betas = numbers(doc, "beta");
  grid.thresholds = numbers(doc, "threshold");
  return grid;
}

std::vector<Cell> expand_grid(const GridConfig& grid) {
  const ExperimentConfig reference = experiment_config_from_json(grid.base);
  const double on_lambda = reference.rdi.lambda > 0.0 ? reference.rdi.lambda : 1.0;
  const double on_beta = reference.rdi.beta > 0.0 ? reference.rdi.beta : 1.0;
  const auto or_default = [](const std::vector<double>& v, double d) {
    return v.empty() ? std::vector<double>{d} : v;
  };
  const bool tag_params = !grid.lambdas.empty() || !grid.betas.empty() || !grid.thresholds.empty();

  std::vector<Cell> cells;
  for (LossVariant variant : grid.variants) {
    const bool use_alr = variant == LossVariant::kAlr || variant == LossVariant::kFull;
    const bool use_ali = variant == LossVariant::kAli || variant == LossVariant::kFull;
    for (double lambda : use_alr ? or_default(grid.lambdas, on_lambda) : std::vector<double>{0.0}) {
      for (double beta : use_ali ? or_default(grid.betas, on_beta) : std::vector<double>{0.0}) {
        for (double threshold : or_default(grid.thresholds, reference.rdi.threshold)) {
          for (std::uint64_t seed : grid.seeds) {
            Cell cell;
            cell.variant = variant;
            cell.lambda = lambda;
            cell.beta = beta;
            cell.threshold = threshold;
            cell.seed = seed;
            cell.id = to_string(variant);
            if (tag_params) {
              cell.id += "_lam" + short_number(lambda) + "_beta" + short_number(beta) + "_thr" +
                         short_number(threshold);
            }
            cell.id += "_seed" + std::to_string(seed);
            nlohmann::json doc = grid.base;
            doc["name"] = cell.id;
            doc["seed"] = seed;
            doc["rdi"]["lambda"] = lambda;
            doc["rdi"]["beta"] = beta;
            doc["rdi"]["threshold"] = threshold;
            cell.config = experiment_config_from_json(doc);
            cells.push_back(std::move(cell));
          }
        }
      }
    }
  }
  return cells;
}

CellOutcome summarize_run(const Cell& cell, const fs::path& run_dir) {
  CellOutcome out;
  out.cell = cell;
  const auto rows = read_metrics_csv(RunPaths{run_dir}.metrics());
  if (rows.empty()) throw std::runtime_error(run_dir.string() + ": empty metrics.csv");
  double sum = 0.0;
  for (const auto& r : rows) sum += r.top1;
  out.average = sum / static_cast<double>(rows.size());
  out.novel = rows.back().na.value_or(0.0);
  out.gap = rows.back().gap.value_or(0.0);
  out.ok = true;
  return out;
}

AblationResult run_ablation(const GridConfig& grid, const fs::path& out_dir, std::ostream* log,
                            const CellRunner& runner, int jobs) {
  const std::vector<Cell> cells = expand_grid(grid);
  fs::create_directories(out_dir);
  AblationResult result;
  result.outcomes.resize(cells.size());
  std::mutex log_mutex;
  auto say = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard lock(log_mutex);
    *log << msg << std::endl;
  };

  auto run_one = [&](std::size_t k) {
    const Cell& cell = cells[k];
    const fs::path dir = out_dir / cell.id;
    say("cell " + cell.id + ": start");
    try {
      if (runner) {
        runner(cell, dir);
      } else {
        run_experiment(cell.config, dir);
      }
      result.outcomes[k] = summarize_run(cell, dir);
      say("cell " + cell.id + ": novel " + fixed(result.outcomes[k].novel) + " average " +
          fixed(result.outcomes[k].average));
    } catch (const std::exception& e) {
      result.outcomes[k].cell = cell;
      result.outcomes[k].ok = false;
      result.outcomes[k].error = e.what();
      say("cell " + cell.id + ": failed: " + e.what());
    }
  };

  if (jobs <= 1 || cells.size() <= 1) {
    for (std::size_t k = 0; k < cells.size(); ++k) run_one(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; ++w) {
      workers.emplace_back([&] {
        for (std::size_t k = next++; k < cells.size(); k = next++) run_one(k);
      });
    }
    for (auto& t : workers) t.join();
  }

  {
    std::ofstream runs(out_dir / "ablation_runs.csv");
    runs << "cell,variant,lambda,beta,threshold,seed,status,novel,average,gap\n";
    for (const auto& o : result.outcomes) {
      runs << o.cell.id << ',' << to_string(o.cell.variant) << ',' << short_number(o.cell.lambda)
           << ',' << short_number(o.cell.beta) << ',' << short_number(o.cell.threshold) << ','
           << o.cell.seed << ',' << (o.ok ? "ok" : "failed") << ',' << (o.ok ? fixed(o.novel) : "")
           << ',' << (o.ok ? fixed(o.average) : "") << ',' << (o.ok ? fixed(o.gap) : "") << '\n';
    }
  }

  // Seeds of one setting collapse into a single row, in grid order.
  struct Agg {
    const Cell* cell = nullptr;
    int runs = 0, failed = 0;
    double novel = 0, average = 0, gap = 0;
  };
  std::vector<std::string> order;
  std::map<std::string, Agg> rows;
  for (const auto& o : result.outcomes) {
    const std::string key = to_string(o.cell.variant) + "|" + short_number(o.cell.lambda) + "|" +
                            short_number(o.cell.beta) + "|" + short_number(o.cell.threshold);
    auto [it, fresh] = rows.try_emplace(key);
    if (fresh) order.push_back(key);
    Agg& a = it->second;
    if (!a.cell) a.cell = &o.cell;
    if (!o.ok) {
      ++a.failed;
      continue;
    }
    ++a.runs;
    a.novel += o.novel;
    a.average += o.average;
    a.gap += o.gap;
  }
  result.table = out_dir / "ablation.csv";
  std::ofstream table(result.table);
  table << "variant,lambda,beta,threshold,runs,failed,novel,average,gap\n";
  for (const auto& key : order) {
    const Agg& a = rows.at(key);
    const auto mean = [&](double s) { return a.runs ? fixed(s / a.runs) : std::string(); };
    table << to_string(a.cell->variant) << ',' << short_number(a.cell->lambda) << ','
          << short_number(a.cell->beta) << ',' << short_number(a.cell->threshold) << ',' << a.runs
          << ',' << a.failed << ',' << mean(a.novel) << ',' << mean(a.average) << ',' << mean(a.gap)
          << '\n';
  }
  return result;
}

}  // namespace fscil::cli
