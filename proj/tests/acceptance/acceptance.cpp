// Acceptance harness: one PASS/FAIL line per criterion.
//
//   acceptance [--strict] [--keep DIR] [--only N]
//
// Verdicts go to stdout and to acceptance_report.txt in the working
// directory. The exit status is 0 once every selected criterion has been
// evaluated; --strict makes any FAIL exit 1.

#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fscil/cli/ablation.hpp"
#include "fscil/cli/config.hpp"
#include "fscil/cli/experiment.hpp"
#include "fscil/data/schedule_builder.hpp"
#include "fscil/model/backbone.hpp"
#include "fscil/model/cosine.hpp"
#include "fscil/protocol/session.hpp"
#include "fscil/protocol/trainer.hpp"
#include "fscil/rdi/losses.hpp"
#include "fscil/rdi/masks.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using namespace fscil;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Random micro-instance within the oracle bounds: h, w <= 3, d <= 8, n <= 5.
struct Instance {
  oracle::Grid grid;
  oracle::Mat columns;  // base columns, then the dummy
  int base_count = 0;
  int label = 0;
  double tau = 16.0;
  double rho = 0.0;
  double lambda = 1.0;
  double beta = 1.0;
  bool masked_mean = true;
};

Instance draw(testing::Rng& rng) {
  Instance in;
  const int h = testing::uniform_int(rng, 1, 3), w = testing::uniform_int(rng, 1, 3);
  const int d = testing::uniform_int(rng, 1, 8);
  in.base_count = testing::uniform_int(rng, 2, 4);
  in.grid = testing::random_grid(rng, h, w, d);
  in.columns = testing::random_columns(rng, d, in.base_count + 1);
  in.label = testing::uniform_int(rng, 0, in.base_count - 1);
  in.tau = testing::uniform(rng, 1.0, 16.0);
  in.rho = testing::uniform(rng, -0.6, 0.8);
  in.lambda = testing::uniform(rng, 0.1, 2.0);
  in.beta = testing::uniform(rng, 0.1, 2.0);
  in.masked_mean = testing::uniform_int(rng, 0, 1) == 1;
  return in;
}

rdi::RdiConfig rdi_config(const Instance& in) {
  rdi::RdiConfig c;
  c.threshold = in.rho;
  c.lambda = in.lambda;
  c.beta = in.beta;
  c.pooling_mode = in.masked_mean ? rdi::PoolingMode::kMaskedMean : rdi::PoolingMode::kGlobalMean;
  return c;
}

std::vector<int> first_n(int n) {
  std::vector<int> v;
  for (int i = 0; i < n; ++i) v.push_back(i);
  return v;
}

constexpr int kCases = 250;

Verdict oracle_suite() {
  testing::Rng rng(101);
  std::map<std::string, double> worst;
  std::map<std::string, int> cases;
  auto record = [&](const std::string& k, double err) {
    worst[k] = std::max(worst[k], err);
    ++cases[k];
  };
  for (int t = 0; t < kCases; ++t) {
    const Instance in = draw(rng);
    const FeatureMap map = testing::to_map(in.grid);
    const CosineClassifier head(testing::to_eigen(in.columns), in.tau, in.base_count);
    const int d = map.channels();

    const oracle::Vec g = oracle::global_pool(in.grid);
    const PooledFeature pooled = model::global_pool(map);
    double e = 0.0;
    for (int k = 0; k < d; ++k) e = std::max(e, std::abs(pooled.vector()[k] - g[k]));
    record("global_pool", e);

    if (oracle::norm(g) > 0.0) {
      const Eigen::VectorXd z = model::cosine_logits(head, pooled);
      const oracle::Vec zo = oracle::logits(in.columns, in.tau, g);
      e = 0.0;
      for (std::size_t k = 0; k < zo.size(); ++k) e = std::max(e, std::abs(z[static_cast<Eigen::Index>(k)] - zo[k]));
      record("cosine_logits", e);
      record("cross_entropy",
             std::abs(model::cross_entropy_cosine(head, pooled, in.label) -
                      oracle::cross_entropy(zo, in.label)));
    }

    const int pred = rdi::predicted_label(head, map);
    const oracle::Mat base(in.columns.begin(), in.columns.begin() + in.base_count);
    record("predicted_label", pred == oracle::argmax_cosine(base, g, first_n(in.base_count)) ? 0.0 : 1.0);

    const oracle::Bits want = oracle::threshold_mask(in.grid, in.columns[static_cast<std::size_t>(pred)], in.rho);
    const PatchMask alr = rdi::alr_mask(map, head, pred, in.rho);
    record("alr_mask", testing::to_bits(alr) == want ? 0.0 : 1.0);
    record("ali_mask", testing::to_bits(rdi::ali_mask(alr)) == oracle::complement(want) ? 0.0 : 1.0);

    for (const bool mm : {true, false}) {
      int support = 0;
      const oracle::Vec po = oracle::masked_pool(in.grid, want, mm, &support);
      const PooledFeature pm =
          rdi::masked_pool(map, alr, mm ? rdi::PoolingMode::kMaskedMean : rdi::PoolingMode::kGlobalMean);
      e = pm.support_count() == support ? 0.0 : 1.0;
      for (int k = 0; k < d; ++k) e = std::max(e, std::abs(pm.vector()[k] - po[static_cast<std::size_t>(k)]));
      record("masked_pool", e);
    }

    const rdi::SampleLoss s = rdi::sample_loss(map, head.weights(), in.tau, in.label, in.base_count, rdi_config(in));
    const oracle::SampleTerms so = oracle::sample_loss(in.grid, in.columns, in.tau, in.label, in.base_count,
                                                       in.rho, in.lambda, in.beta, in.masked_mean);
    e = std::abs(s.total - so.total);
    e = std::max(e, std::abs(s.base - so.base));
    e = std::max(e, std::abs(s.alr.value_or(0.0) - so.alr.value_or(0.0)));
    e = std::max(e, std::abs(s.ali.value_or(0.0) - so.ali.value_or(0.0)));
    if (s.ali.has_value() != so.ali.has_value()) e = 1.0;
    record("sample_loss", e);
  }
  // Prototype means.
  for (int t = 0; t < kCases; ++t) {
    const int d = testing::uniform_int(rng, 1, 8), n = testing::uniform_int(rng, 1, 5);
    std::map<int, std::vector<Eigen::VectorXd>> feats;
    std::vector<oracle::Vec> raw;
    for (int i = 0; i < n; ++i) {
      raw.push_back(testing::random_vec(rng, d));
      feats[0].push_back(testing::to_eigen(raw.back()));
    }
    const oracle::Vec m = oracle::mean(raw);
    const auto store = protocol::prototypes_from_features(feats, d);
    double e = 0.0;
    for (int k = 0; k < d; ++k) e = std::max(e, std::abs(store.at(0).mean[k] - m[static_cast<std::size_t>(k)]));
    record("prototype_mean", e);
  }

  Verdict v{true, ""};
  for (const auto& [k, err] : worst) {
    v.pass = v.pass && err <= 1e-6 && cases[k] >= 200;
    v.detail += k + " " + std::to_string(cases[k]) + " cases max err " + fmt("%.1e", err) + "; ";
  }
  return v;
}

// Central differences with step 1e-4 against the analytic gradients, masks fixed.
Verdict gradient_suite() {
  testing::Rng rng(202);
  double worst = 0.0;
  long compared = 0;
  for (int t = 0; t < kCases; ++t) {
    Instance in = draw(rng);
    const oracle::Mat base(in.columns.begin(), in.columns.begin() + in.base_count);
    const int pred = oracle::argmax_cosine(base, oracle::global_pool(in.grid), first_n(in.base_count));
    const oracle::Bits bits = oracle::threshold_mask(in.grid, in.columns[static_cast<std::size_t>(pred)], in.rho);
    const rdi::FixedMasks fixed{pred, testing::from_bits(bits, MaskKind::kAlr)};
    const rdi::SampleLoss g = rdi::sample_loss(testing::to_map(in.grid), testing::to_eigen(in.columns), in.tau,
                                               in.label, in.base_count, rdi_config(in), &fixed);
    const auto f = [&] {
      return oracle::sample_loss(in.grid, in.columns, in.tau, in.label, in.base_count, in.rho, in.lambda, in.beta,
                                 in.masked_mean, pred, &bits)
          .total;
    };
    const int h = static_cast<int>(in.grid.size()), w = static_cast<int>(in.grid[0].size());
    const int d = static_cast<int>(in.grid[0][0].size());
    for (int a = 0; a < h; ++a)
      for (int b = 0; b < w; ++b)
        for (int k = 0; k < d; ++k) {
          const double num = testing::central_difference(f, in.grid[a][b][k], 1e-4);
          worst = std::max(worst, testing::gradient_error(g.grad_map(a, b, k), num));
          ++compared;
        }
    for (std::size_t j = 0; j < in.columns.size(); ++j)
      for (int k = 0; k < d; ++k) {
        const double num = testing::central_difference(f, in.columns[j][static_cast<std::size_t>(k)], 1e-4);
        worst = std::max(worst, testing::gradient_error(g.grad_weights(k, static_cast<Eigen::Index>(j)), num));
        ++compared;
      }
  }
  return {worst <= 1e-3, std::to_string(kCases) + " instances, " + std::to_string(compared) +
                             " partials (feature map and all head columns), worst relative error " +
                             fmt("%.2e", worst)};
}

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
pretrain_epochs = 2
decouple_epochs = 2
batch_size = 4
learning_rate = 0.01
clip_norm = 5.0
[analysis]
export_masks = 2
)";

Verdict structural(const fs::path& work) {
  std::vector<std::string> broken;
  testing::Rng rng(303);

  int partition_ok = 0, monotone_ok = 0;
  for (int t = 0; t < kCases; ++t) {
    const Instance in = draw(rng);
    const FeatureMap map = testing::to_map(in.grid);
    const CosineClassifier head(testing::to_eigen(in.columns), in.tau, in.base_count);
    const int pred = rdi::predicted_label(head, map);
    const PatchMask alr = rdi::alr_mask(map, head, pred, in.rho), ali = rdi::ali_mask(alr);
    bool ok = alr.count() + ali.count() == map.patch_count();
    for (int a = 0; a < alr.height(); ++a)
      for (int b = 0; b < alr.width(); ++b) ok = ok && (alr(a, b) != ali(a, b));
    partition_ok += ok;
    const PatchMask hi = rdi::alr_mask(map, head, pred, in.rho + testing::uniform(rng, 0.0, 0.5));
    bool mono = true;
    for (int a = 0; a < alr.height(); ++a)
      for (int b = 0; b < alr.width(); ++b) mono = mono && (!hi(a, b) || alr(a, b));
    monotone_ok += mono;
  }
  if (partition_ok != kCases) broken.push_back("mask partition");
  if (monotone_ok != kCases) broken.push_back("threshold monotonicity");

  // A dummy column aligned with the feature must still lose.
  {
    Eigen::MatrixXd w(2, 3);
    w << 0.0, 1.0, 1.0, 1.0, 0.1, 0.0;
    const CosineClassifier head(w, 16.0, 2);
    const PooledFeature f(Eigen::Vector2d(1.0, 0.0), MaskKind::kNone, 1);
    if (model::predict(head, f) == 2 || head.without_dummy().has_dummy()) broken.push_back("dummy exclusion");
  }

  // Tiny end-to-end run twice.
  fs::create_directories(work);
  std::ofstream(work / "tiny.toml") << kTiny;
  const auto cfg = cli::load_experiment_config(work / "tiny.toml");
  const auto adapter = cli::make_dataset(cfg);
  const auto schedule = cli::make_schedule(cfg, *adapter);
  const auto trained = protocol::train_base(schedule, *adapter, model::Backbone(cfg.model, cfg.init_seed()), cfg.rdi,
                                            cfg.training);
  const std::uint64_t hash = trained.backbone.parameter_hash();
  const auto inc = protocol::run_incremental(schedule, *adapter, trained.backbone, trained.classifier);
  bool frozen = trained.backbone.parameter_hash() == hash, no_dummy = true, aa_ok = true, nn_ok = true;
  for (std::size_t t = 0; t < inc.states.size(); ++t) {
    frozen = frozen && inc.states[t].backbone_hash == hash;
    const int seen = schedule.cumulative_class_count(static_cast<int>(t));
    no_dummy = no_dummy && !inc.states[t].classifier.has_dummy() && inc.states[t].classifier.column_count() == seen;
    std::size_t base_n = 0, base_hit = 0, novel_n = 0, novel_hit = 0;
    for (const auto& p : inc.predictions[t]) {
      no_dummy = no_dummy && p.predicted < seen;
      if (p.label < schedule.base_class_count()) {
        ++base_n;
        base_hit += p.predicted == p.label;
      } else {
        ++novel_n;
        novel_hit += p.predicted == p.label;
      }
    }
    const auto& r = inc.reports[t];
    if (t > 0) {
      const double na = *r.na_acc(), ba = r.ba_acc();
      const double weighted = (ba * base_n + na * novel_n) / static_cast<double>(base_n + novel_n);
      aa_ok = aa_ok && std::abs(r.aa_acc() - weighted) <= 1e-12 &&
              std::abs(r.aa_acc() - static_cast<double>(base_hit + novel_hit) / (base_n + novel_n)) <= 1e-12;
      nn_ok = nn_ok && *r.nn_acc() >= na;
    }
  }
  if (!frozen) broken.push_back("frozen backbone hash");
  if (!no_dummy) broken.push_back("dummy exclusion at inference");
  if (!aa_ok) broken.push_back("AA weighted mean");
  if (!nn_ok) broken.push_back("NN >= NA");

  cli::run_experiment(cfg, work / "run_a");
  cli::run_experiment(cfg, work / "run_b");
  const std::string a = slurp(work / "run_a" / "metrics.csv"), b = slurp(work / "run_b" / "metrics.csv");
  if (a.empty() || a != b) broken.push_back("metrics.csv byte identity");

  std::string detail = "partition " + std::to_string(partition_ok) + "/" + std::to_string(kCases) +
                       ", monotone " + std::to_string(monotone_ok) + "/" + std::to_string(kCases) +
                       ", dummy exclusion, frozen hash over " + std::to_string(inc.states.size()) +
                       " sessions, AA weighted mean, NN >= NA, metrics.csv identical across two runs";
  if (!broken.empty()) {
    detail = "broken:";
    for (const auto& s : broken) detail += " [" + s + "]";
  }
  return {broken.empty(), detail};
}

// Per-seed numbers read back from a finished desk run.
struct DeskRun {
  double novel = 0.0, gap = 0.0;
  double intra = 0.0, inter = 0.0;
  double ali_in_nuisance = 0.0, nuisance_base_rate = 0.0;
  double red_own = 0.0, red_others = 0.0, cen_own = 0.0, cen_others = 0.0;
  bool categories = false;
};

DeskRun read_run(const fs::path& dir) {
  DeskRun r;
  const auto rows = cli::read_metrics_csv(dir / "metrics.csv");
  r.novel = rows.back().na.value_or(0.0);
  r.gap = rows.back().gap.value_or(0.0);
  const auto a = nlohmann::json::parse(slurp(dir / "reports" / "analysis.json"));
  r.intra = a.at("distances").at("intra_mean");
  r.inter = a.at("distances").at("inter_mean");
  if (!a.at("alignment").is_null()) {
    r.ali_in_nuisance = a["alignment"]["ali_in_nuisance"];
    r.nuisance_base_rate = a["alignment"]["nuisance_base_rate"];
  }
  const auto& ps = a.at("patch_similarity");
  const auto num = [](const nlohmann::json& j) { return j.is_null() ? std::nan("") : j.get<double>(); };
  r.red_own = num(ps["redundant"]["own"]);
  r.red_others = num(ps["redundant"]["others"]);
  r.cen_own = num(ps["central"]["own"]);
  r.cen_others = num(ps["central"]["others"]);
  r.categories = !std::isnan(r.red_own) && !std::isnan(r.cen_own);
  return r;
}

struct Desk {
  bool ok = false;
  std::string error;
  // variant -> per-seed runs
  std::map<std::string, std::vector<DeskRun>> runs;
};

Desk run_desk(const fs::path& work) {
  Desk desk;
  const cli::GridConfig grid = cli::load_grid_config(fs::path(FSCIL_CONFIG_DIR) / "desk_ablation.toml");
  const auto result = cli::run_ablation(grid, work / "desk", &std::cerr);
  for (const auto& o : result.outcomes) {
    if (!o.ok) {
      desk.error += o.cell.id + ": " + o.error + "; ";
      continue;
    }
    desk.runs[cli::to_string(o.cell.variant)].push_back(read_run(work / "desk" / o.cell.id));
  }
  desk.ok = result.all_ok();
  return desk;
}

double mean_of(const std::vector<DeskRun>& v, double DeskRun::*field) {
  double s = 0.0;
  for (const auto& r : v) s += r.*field;
  return v.empty() ? std::nan("") : s / static_cast<double>(v.size());
}

std::vector<std::pair<std::string, Verdict>> planted_redundancy(const Desk& desk) {
  if (!desk.ok) {
    const Verdict v{false, "desk runs failed: " + desk.error};
    return {{"4a", v}, {"4b", v}, {"4c", v}, {"4d", v}};
  }
  const auto& base = desk.runs.at("base");
  const auto& full = desk.runs.at("full");
  std::vector<std::pair<std::string, Verdict>> out;

  const double gb = mean_of(base, &DeskRun::gap), gf = mean_of(full, &DeskRun::gap);
  out.push_back({"4a", {gb - gf >= 0.05, "mean final gap (NN - NA) baseline " + fmt("%.4f", gb) + ", RDI " +
                                             fmt("%.4f", gf) + ", reduction " + fmt("%.4f", gb - gf) +
                                             " (need >= 0.05)"}});

  const double ib = mean_of(base, &DeskRun::intra), i_f = mean_of(full, &DeskRun::intra);
  const double eb = mean_of(base, &DeskRun::inter), ef = mean_of(full, &DeskRun::inter);
  out.push_back({"4b", {i_f < ib && ef < eb, "mean intra distance baseline " + fmt("%.4f", ib) + ", RDI " +
                                                 fmt("%.4f", i_f) + "; mean inter baseline " + fmt("%.4f", eb) +
                                                 ", RDI " + fmt("%.4f", ef)}});

  const double mass = mean_of(full, &DeskRun::ali_in_nuisance);
  const double rate = mean_of(full, &DeskRun::nuisance_base_rate);
  out.push_back({"4c", {rate > 0.0 && mass >= 2.0 * rate, "RDI ALI mass on the nuisance patch " + fmt("%.4f", mass) +
                                                            ", base rate " + fmt("%.4f", rate) + ", ratio " +
                                                            fmt("%.2f", rate > 0 ? mass / rate : 0.0) + " (need >= 2)"}});

  bool cats = true;
  for (const auto& r : full) cats = cats && r.categories;
  const double ro = mean_of(full, &DeskRun::red_own), co = mean_of(full, &DeskRun::cen_own);
  const double rx = mean_of(full, &DeskRun::red_others), cx = mean_of(full, &DeskRun::cen_others);
  out.push_back({"4d", {cats && ro < co && rx < cx,
                        std::string(cats ? "" : "a patch category was empty; ") + "RDI redundant own " +
                            fmt("%.4f", ro) + " vs central own " + fmt("%.4f", co) + ", redundant others " +
                            fmt("%.4f", rx) + " vs central others " + fmt("%.4f", cx)}});
  return out;
}

Verdict ablation(const Desk& desk) {
  if (!desk.ok) return {false, "desk runs failed: " + desk.error};
  std::map<std::string, double> na;
  for (const auto& [k, v] : desk.runs) na[k] = mean_of(v, &DeskRun::novel);
  const double b = na["base"], l = na["alr"], i = na["ali"], f = na["full"];
  const bool order = b <= l && b <= i && l <= f && i <= f;
  return {order && f - b >= 0.03, "mean final novel accuracy base " + fmt("%.4f", b) + ", alr " + fmt("%.4f", l) +
                                      ", ali " + fmt("%.4f", i) + ", full " + fmt("%.4f", f) + "; ordering " +
                                      (order ? "holds" : "violated") + ", full - base " + fmt("%.4f", f - b) +
                                      " (need >= 0.03)"};
}

Verdict schedules(const fs::path& work) {
  struct Expect {
    const char* file;
    int first, step, rows;
  };
  std::string detail;
  bool pass = true;
  for (const Expect e : {Expect{"cifar100_schedule.toml", 60, 5, 9}, Expect{"cub200_schedule.toml", 100, 10, 11}}) {
    const auto cfg = cli::load_experiment_config(fs::path(FSCIL_CONFIG_DIR) / e.file);
    const auto summary = cli::run_experiment(cfg, work / cfg.name);
    bool ok = summary.schedule_only && summary.reports.empty() &&
              summary.schedule_rows.size() == static_cast<std::size_t>(e.rows);
    std::string seq;
    for (std::size_t t = 0; t < summary.schedule_rows.size(); ++t) {
      const int c = summary.schedule_rows[t].cumulative_classes;
      ok = ok && c == e.first + static_cast<int>(t) * e.step;
      seq += (t ? "," : "") + std::to_string(c);
    }
    pass = pass && ok;
    detail += cfg.name + " " + std::to_string(summary.schedule_rows.size()) + " rows [" + seq + "]; ";
  }
  return {pass, detail};
}

}  // namespace

int main(int argc, char** argv) {
  bool strict = false;
  fs::path keep;
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (!std::strcmp(argv[i], "--strict")) {
      strict = true;
    } else if (!std::strcmp(argv[i], "--keep") && i + 1 < argc) {
      keep = argv[++i];
    } else if (!std::strcmp(argv[i], "--only") && i + 1 < argc) {
      only.insert(std::atoi(argv[++i]));
    } else {
      std::cerr << "usage: acceptance [--strict] [--keep DIR] [--only N]...\n";
      return 2;
    }
  }
  const fs::path work =
      keep.empty() ? fs::temp_directory_path() / ("fscil_acceptance_" + std::to_string(::getpid())) : keep;
  fs::create_directories(work);
  auto want = [&](int n) { return only.empty() || only.contains(n); };

  std::vector<std::pair<std::string, Verdict>> verdicts;
  auto guarded = [&](const std::string& id, const std::function<Verdict()>& f) {
    try {
      verdicts.push_back({id, f()});
    } catch (const std::exception& e) {
      verdicts.push_back({id, {false, std::string("threw: ") + e.what()}});
    }
    const auto& [name, v] = verdicts.back();
    std::cout << "criterion " << name << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << std::endl;
  };

  if (want(1)) guarded("1", oracle_suite);
  if (want(2)) guarded("2", gradient_suite);
  if (want(3)) guarded("3", [&] { return structural(work / "structural"); });
  if (want(4) || want(5)) {
    Desk desk;
    try {
      desk = run_desk(work);
    } catch (const std::exception& e) {
      desk.error = e.what();
    }
    if (want(4)) {
      for (auto& [id, v] : planted_redundancy(desk)) guarded(id, [v = v] { return v; });
    }
    if (want(5)) guarded("5", [&] { return ablation(desk); });
  }
  if (want(6)) guarded("6", [&] { return schedules(work / "schedules"); });

  std::ofstream report("acceptance_report.txt");
  int failed = 0;
  for (const auto& [id, v] : verdicts) {
    report << "criterion " << id << ": " << (v.pass ? "PASS" : "FAIL") << "  " << v.detail << '\n';
    failed += !v.pass;
  }
  std::cout << "acceptance: " << verdicts.size() - failed << " passed, " << failed << " failed\n";
  if (keep.empty()) fs::remove_all(work);
  return strict && failed ? 1 : 0;
}
