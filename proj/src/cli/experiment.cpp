#include "fscil/cli/experiment.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "fscil/analysis/alignment.hpp"
#include "fscil/analysis/distances.hpp"
#include "fscil/analysis/patch_stats.hpp"
#include "fscil/analysis/plots.hpp"
#include "fscil/core/serialization.hpp"
#include "fscil/data/schedule_builder.hpp"
#include "fscil/model/checkpoint.hpp"
#include "fscil/model/cosine.hpp"
#include "fscil/protocol/session.hpp"
#include "fscil/protocol/trainer.hpp"
#include "fscil/rdi/mask_export.hpp"
#include "fscil/rdi/masks.hpp"

namespace fs = std::filesystem;

namespace fscil::cli {

fs::path RunPaths::session_report(int t) const {
  return reports() / ("session_" + std::to_string(t) + ".json");
}

fs::path default_run_root() {
  if (const char* env = std::getenv("FSCIL_RUN_ROOT"); env && *env) return env;
  return "runs";
}

std::unique_ptr<data::DatasetAdapter> make_dataset(const ExperimentConfig& config) {
  switch (config.data.source) {
    case DataSource::kSynthetic:
      return data::generate_synthetic(config.data.synthetic);
    case DataSource::kDirectory:
      return std::make_unique<data::DirectoryDataset>(config.data.root);
    case DataSource::kIndexOnly:
      return std::make_unique<data::IndexOnlyDataset>(config.data.name, config.data.class_count,
                                                      config.data.train_per_class,
                                                      config.data.test_per_class);
  }
  throw std::logic_error("unknown data source");
}

SessionSchedule make_schedule(const ExperimentConfig& config, const data::DatasetAdapter& adapter) {
  SessionSchedule schedule = data::build_schedule(
      adapter, {config.data.base_classes, config.data.sessions, config.data.way, config.data.shot,
                config.schedule_seed()});
  const ScheduleVerdict verdict = validate_schedule(schedule);
  if (!verdict.ok()) throw std::runtime_error("invalid schedule: " + verdict.violations.front());
  return schedule;
}

namespace {

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fixed(const std::optional<double>& v) { return v ? fixed(*v) : ""; }

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

void write_schedule(const RunPaths& paths, const SessionSchedule& schedule) {
  write_json(paths.reports() / "schedule.json", to_json(schedule));
  std::ofstream out(paths.reports() / "schedule.csv");
  out << "session,way,shot,cumulative_classes,train_samples,test_samples\n";
  for (const auto& r : summarize_schedule(schedule)) {
    out << r.session << ',' << r.way << ',' << r.shot << ',' << r.cumulative_classes << ','
        << r.train_samples << ',' << r.test_samples << '\n';
  }
}

void write_training_log(const fs::path& path, const std::vector<protocol::EpochLog>& log) {
  std::ofstream out(path);
  out << "stage,epoch,learning_rate,total,base,alr,ali,alr_terms,ali_terms,alr_fallbacks,max_grad_norm\n";
  for (const auto& e : log) {
    out << e.stage << ',' << e.epoch << ',' << fixed(e.learning_rate) << ',' << fixed(e.mean.total)
        << ',' << fixed(e.mean.base) << ',' << fixed(e.mean.alr) << ',' << fixed(e.mean.ali) << ','
        << e.mean.alr_terms << ',' << e.mean.ali_terms << ',' << e.mean.alr_fallbacks << ','
        << fixed(e.max_grad_norm) << '\n';
  }
}

nlohmann::json category_json(const analysis::PatchCategory& c) {
  return {{"count", c.count},
          {"own", c.own ? nlohmann::json(*c.own) : nlohmann::json()},
          {"others", c.others ? nlohmann::json(*c.others) : nlohmann::json()}};
}

// Diagnostics over the base-class test samples with the trained model.
nlohmann::json run_analysis(const ExperimentConfig& config, const RunPaths& paths,
                            const SessionSchedule& schedule, const data::DatasetAdapter& adapter,
                            const protocol::BaseTrainingResult& trained,
                            const protocol::IncrementalResult& inc) {
  const double threshold = config.rdi.threshold;
  const int stride = trained.backbone.cumulative_stride();
  nlohmann::json out;
  out["threshold"] = threshold;
  out["training"] = {{"stage2_start_loss", trained.stage2_start_loss},
                     {"stage2_end_loss", trained.stage2_end_loss}};

  std::map<int, std::vector<Eigen::VectorXd>> features;
  std::vector<FeatureMap> maps;
  std::vector<int> labels;
  std::vector<PatchMask> masks;
  std::vector<const data::RegionAnnotation*> regions;
  bool annotated = true;
  const ClassManifest& base_tests = schedule.test_manifest.front();
  for (const auto& [c, indices] : base_tests) {
    for (std::size_t i : indices) {
      features[c].push_back(inc.test_features.at(i));
      FeatureMap map = trained.backbone.forward(to_tensor(adapter.load(data::Partition::kTest, i)));
      const int predicted = rdi::predicted_label(trained.classifier, map);
      masks.push_back(rdi::alr_mask(map, trained.classifier, predicted, threshold));
      const auto* r = adapter.regions(data::Partition::kTest, i);
      annotated = annotated && r != nullptr;
      regions.push_back(r);
      maps.push_back(std::move(map));
      labels.push_back(c);
    }
  }

  if (features.size() >= 2) {
    const auto d = analysis::class_distance_cdfs(features, config.analysis.inter_mode);
    out["distances"] = {{"intra_mean", d.intra_mean},
                        {"inter_mean", d.inter_mean},
                        {"intra_pairs", d.intra.values.size()},
                        {"inter_pairs", d.inter.values.size()},
                        {"warnings", d.warnings}};
    analysis::write_cdf_csv(paths.reports() / "cdf_intra.csv", d.intra);
    analysis::write_cdf_csv(paths.reports() / "cdf_inter.csv", d.inter);
  }

  const auto stats = analysis::patch_similarity_stats(maps, labels, trained.classifier, threshold);
  out["patch_similarity"] = {{"threshold", threshold},
                             {"central", category_json(stats.central)},
                             {"redundant", category_json(stats.redundant)}};
  {
    std::ofstream csv(paths.reports() / "patch_similarity.csv");
    csv << "category,count,own,others\n";
    for (const auto& [name, cat] : {std::pair{"central", &stats.central}, {"redundant", &stats.redundant}}) {
      csv << name << ',' << cat->count << ',' << fixed(cat->own) << ',' << fixed(cat->others) << '\n';
    }
  }

  if (annotated && !masks.empty()) {
    const auto a = analysis::planted_redundancy_alignment(masks, regions, stride);
    out["alignment"] = {{"alr_in_signal", a.alr_in_signal},
                        {"ali_in_nuisance", a.ali_in_nuisance},
                        {"alr_in_nuisance", a.alr_in_nuisance},
                        {"ali_in_signal", a.ali_in_signal},
                        {"signal_base_rate", a.signal_base_rate},
                        {"nuisance_base_rate", a.nuisance_base_rate},
                        {"alr_mass", a.alr_mass},
                        {"ali_mass", a.ali_mass},
                        {"samples", a.samples}};
  } else {
    out["alignment"] = nullptr;
  }

  // Round-robin over classes so the exported masks cover several of them.
  int exported = 0;
  const auto& test_info = adapter.samples(data::Partition::kTest);
  for (std::size_t round = 0; exported < config.analysis.export_masks; ++round) {
    bool any = false;
    std::size_t offset = 0;
    for (const auto& [c, indices] : base_tests) {
      if (round < indices.size() && exported < config.analysis.export_masks) {
        const std::size_t i = indices[round];
        const std::size_t k = offset + round;
        const FeatureMap& map = maps[k];
        const int predicted = rdi::predicted_label(trained.classifier, map);
        rdi::export_mask(paths.masks(), test_info[i].id, adapter.load(data::Partition::kTest, i), c,
                         predicted, threshold, masks[k],
                         rdi::patch_scores(map, trained.classifier.weights().col(predicted)), stride);
        ++exported;
        any = true;
      }
      offset += indices.size();
    }
    if (!any) break;
  }
  return out;
}

}  // namespace

void write_metrics_csv(const fs::path& path, const std::vector<EvalReport>& reports) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "session,top1,ba,na,aa,nn,gap\n";
  for (const auto& r : reports) {
    out << r.session() << ',' << fixed(r.session_top1()) << ',' << fixed(r.ba_acc()) << ','
        << fixed(r.na_acc()) << ',' << fixed(r.aa_acc()) << ',' << fixed(r.nn_acc()) << ','
        << fixed(r.confusion_gap()) << '\n';
  }
}

std::vector<MetricsRow> read_metrics_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "session,top1,ba,na,aa,nn,gap") throw std::runtime_error(path.string() + ": unexpected header");
  std::vector<MetricsRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    while (cells.size() < 7) cells.emplace_back();
    const auto opt = [](const std::string& s) -> std::optional<double> {
      if (s.empty()) return std::nullopt;
      return std::stod(s);
    };
    rows.push_back({std::stoi(cells[0]), std::stod(cells[1]), std::stod(cells[2]), opt(cells[3]),
                    std::stod(cells[4]), opt(cells[5]), opt(cells[6])});
  }
  return rows;
}

RunSummary run_experiment(const ExperimentConfig& config, const fs::path& run_dir, std::ostream* log) {
  config.validate();
  const RunPaths paths{run_dir};
  fs::create_directories(paths.reports());
  write_json(paths.config(), to_json(config));
  auto say = [&](const std::string& msg) {
    if (log) *log << msg << std::endl;
  };

  const auto adapter = make_dataset(config);
  const SessionSchedule schedule = make_schedule(config, *adapter);
  write_schedule(paths, schedule);
  RunSummary summary;
  summary.run_dir = run_dir;
  summary.schedule_rows = summarize_schedule(schedule);
  say("schedule: " + std::to_string(schedule.session_count()) + " sessions, " +
      std::to_string(schedule.cumulative_class_count(schedule.session_count() - 1)) + " classes");
  if (config.data.schedule_only) {
    summary.schedule_only = true;
    return summary;
  }
  if (!adapter->has_images()) throw std::runtime_error("dataset '" + adapter->name() + "' has no images");

  model::Backbone backbone(config.model, config.init_seed());
  say("backbone: " + config.model.architecture + ", " + std::to_string(backbone.parameter_count()) +
      " parameters");
  protocol::BaseTrainingResult trained = [&] {
    try {
      return protocol::train_base(schedule, *adapter, backbone, config.rdi, config.training,
                                  [&](const protocol::EpochLog& e) {
                                    say("stage " + std::to_string(e.stage) + " epoch " +
                                        std::to_string(e.epoch) + " loss " + fixed(e.mean.total));
                                  });
    } catch (const protocol::TrainingDiverged& e) {
      write_json(run_dir / "divergence.json", e.dump());
      throw;
    }
  }();
  write_training_log(paths.reports() / "training_log.csv", trained.log);
  if (config.save_checkpoints) {
    fs::create_directories(paths.checkpoints());
    model::save_checkpoint(paths.checkpoints() / "base.ckpt", trained.backbone, trained.classifier);
  }

  protocol::PrototypeOptions proto;
  proto.pooling = config.prototype_pooling;
  proto.mask_head = &trained.classifier;
  proto.threshold = config.rdi.threshold;
  const protocol::IncrementalResult inc =
      protocol::run_incremental(schedule, *adapter, trained.backbone, trained.classifier, proto);
  summary.reports = inc.reports;

  nlohmann::json hashes = nlohmann::json::array();
  for (const auto& s : inc.states) hashes.push_back(std::to_string(s.backbone_hash));
  if (config.analysis.enabled) {
    fs::create_directories(paths.masks());
    summary.analysis = run_analysis(config, paths, schedule, *adapter, trained, inc);
    summary.analysis["backbone_hashes"] = hashes;
    write_json(paths.reports() / "analysis.json", summary.analysis);
    summary.reports.back().set_diagnostics(summary.analysis);
  }
  for (const auto& r : summary.reports) write_json(paths.session_report(r.session()), to_json(r));
  write_metrics_csv(paths.metrics(), summary.reports);
  say("final session top-1 " + fixed(summary.reports.back().session_top1()));
  return summary;
}

}  // namespace fscil::cli
