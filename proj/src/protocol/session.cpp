#include "fscil/protocol/session.hpp"

#include <stdexcept>

#include "fscil/model/cosine.hpp"
#include "fscil/rdi/masks.hpp"

namespace fscil::protocol {

std::string to_string(PrototypePooling pooling) {
  return pooling == PrototypePooling::kGlobal ? "global" : "alr";
}

PrototypePooling prototype_pooling_from_string(const std::string& text) {
  if (text == "global") return PrototypePooling::kGlobal;
  if (text == "alr") return PrototypePooling::kAlr;
  throw std::invalid_argument("unknown prototype pooling '" + text + "' (expected global or alr)");
}

PrototypeStore prototypes_from_features(const std::map<int, std::vector<Eigen::VectorXd>>& features,
                                        int feature_dim) {
  PrototypeStore store(feature_dim);
  for (const auto& [label, list] : features) {
    if (list.empty()) {
      throw std::invalid_argument("compute_prototypes: class " + std::to_string(label) +
                                  " has no training samples");
    }
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(feature_dim);
    for (const auto& f : list) {
      if (f.size() != feature_dim) throw std::invalid_argument("compute_prototypes: feature size mismatch");
      sum += f;
    }
    store.insert(label, {sum / static_cast<double>(list.size()), static_cast<int>(list.size())});
  }
  return store;
}

namespace {

Eigen::VectorXd embed(const model::Backbone& backbone, const data::Image& image,
                      const PrototypeOptions& options) {
  const FeatureMap map = backbone.forward(to_tensor(image));
  if (options.pooling == PrototypePooling::kGlobal) return model::global_pool(map).vector();
  if (!options.mask_head) throw std::invalid_argument("compute_prototypes: alr pooling needs a mask head");
  const int predicted = rdi::predicted_label(*options.mask_head, map);
  const PatchMask mask = rdi::alr_mask(map, *options.mask_head, predicted, options.threshold);
  const PooledFeature pooled = rdi::masked_pool(map, mask, rdi::PoolingMode::kMaskedMean);
  return pooled.support_count() > 0 ? pooled.vector() : model::global_pool(map).vector();
}

}  // namespace

PrototypeStore compute_prototypes(const model::Backbone& backbone, const SessionSchedule& schedule,
                                  const data::DatasetAdapter& adapter, int session,
                                  const PrototypeOptions& options) {
  if (session < 0 || session >= schedule.session_count()) {
    throw std::out_of_range("compute_prototypes: no session " + std::to_string(session));
  }
  const ClassManifest& manifest = schedule.train_manifest.at(static_cast<std::size_t>(session));
  std::map<int, std::vector<Eigen::VectorXd>> features;
  for (int c : schedule.classes_of(session)) {
    auto& list = features[c];
    const auto it = manifest.find(c);
    if (it == manifest.end()) continue;
    for (std::size_t i : it->second) {
      list.push_back(embed(backbone, adapter.load(data::Partition::kTrain, i), options));
    }
  }
  return prototypes_from_features(features, backbone.output_shape().channels);
}

IncrementalResult run_incremental(const SessionSchedule& schedule,
                                  const data::DatasetAdapter& adapter,
                                  const model::Backbone& backbone,
                                  const CosineClassifier& trained,
                                  const PrototypeOptions& options) {
  const int base_count = schedule.base_class_count();
  if (trained.real_class_count() != base_count) {
    throw std::invalid_argument("run_incremental: trained classifier has " +
                                std::to_string(trained.real_class_count()) + " classes, schedule has " +
                                std::to_string(base_count) + " base classes");
  }
  const auto& test_samples = adapter.samples(data::Partition::kTest);
  IncrementalResult out;

  // Frozen backbone: each test image is embedded once and reused by every session.
  for (const auto& [c, indices] : schedule.test_manifest.back()) {
    for (std::size_t i : indices) {
      if (i >= test_samples.size() ||
          test_samples[i].label != schedule.source_classes.at(static_cast<std::size_t>(c))) {
        throw std::invalid_argument("run_incremental: test sample " + std::to_string(i) +
                                    " does not belong to class " + std::to_string(c));
      }
      out.test_features.emplace(
          i, model::global_pool(backbone.forward(to_tensor(adapter.load(data::Partition::kTest, i))))
                 .vector());
    }
  }

  PrototypeOptions proto = options;
  if (proto.pooling == PrototypePooling::kAlr && !proto.mask_head) proto.mask_head = &trained;
  const double tau = trained.temperature();
  CosineClassifier classifier(compute_prototypes(backbone, schedule, adapter, 0, proto).as_columns(), tau);

  for (int t = 0; t < schedule.session_count(); ++t) {
    if (t > 0) {
      classifier = classifier.with_columns_appended(
          compute_prototypes(backbone, schedule, adapter, t, proto).as_columns());
    }
    const int seen = schedule.cumulative_class_count(t);
    if (classifier.column_count() != seen) throw std::logic_error("run_incremental: classifier width drifted");

    std::vector<int> novel_columns;
    for (int c = base_count; c < seen; ++c) novel_columns.push_back(c);

    const ClassManifest& tests = schedule.test_manifest.at(static_cast<std::size_t>(t));
    for (int c = 0; c < seen; ++c) {
      if (!tests.contains(c)) {
        throw std::invalid_argument("run_incremental: session " + std::to_string(t) +
                                    " test set lacks seen class " + std::to_string(c));
      }
    }
    std::vector<analysis::Prediction> preds;
    for (const auto& [c, indices] : tests) {
      if (c >= seen) {
        throw std::invalid_argument("run_incremental: session " + std::to_string(t) +
                                    " tests unseen class " + std::to_string(c));
      }
      for (std::size_t i : indices) {
        const auto it = out.test_features.find(i);
        if (it == out.test_features.end()) {
          throw std::invalid_argument("run_incremental: test sample " + std::to_string(i) +
                                      " missing from the final session");
        }
        const PooledFeature f(it->second, MaskKind::kNone, 0);
        // A dead (all-zero) embedding has no direction and counts as a miss.
        analysis::Prediction p{c, -1, std::nullopt};
        if (c >= base_count) p.novel_only = -1;
        if (f.vector().squaredNorm() > 0.0) {
          p.predicted = model::predict(classifier, f);
          if (c >= base_count) p.novel_only = model::predict_among(classifier, f, novel_columns);
        }
        preds.push_back(p);
      }
    }
    const auto acc = analysis::accuracy_decomposition(preds, base_count, t);
    out.reports.push_back(t == 0 ? EvalReport::base_session(acc.aa, acc.ba)
                                 : EvalReport::incremental(t, acc.aa, acc.ba, *acc.na, acc.aa, *acc.nn));
    out.states.push_back({t, classifier, backbone.parameter_hash()});
    out.predictions.push_back(std::move(preds));
  }
  return out;
}

}  // namespace fscil::protocol
