#include "fscil/protocol/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "fscil/core/random.hpp"
#include "fscil/model/cosine.hpp"
#include "fscil/rdi/masks.hpp"

namespace fscil::protocol {

void TrainingConfig::validate() const {
  if (pretrain_epochs < 0) throw std::invalid_argument("protocol.pretrain_epochs must be >= 0");
  if (decouple_epochs < 0) throw std::invalid_argument("protocol.decouple_epochs must be >= 0");
  if (!(temperature > 0.0)) throw std::invalid_argument("model.temperature must be > 0");
  if (crop_padding < 0) throw std::invalid_argument("protocol.crop_padding must be >= 0");
  SgdMomentum(optimizer, 0);  // validates
}

namespace {

struct LabelledImage {
  data::Image image;
  int label = 0;
};

std::vector<LabelledImage> load_base(const SessionSchedule& schedule,
                                     const data::DatasetAdapter& adapter) {
  if (!adapter.has_images()) {
    throw std::invalid_argument("train_base: dataset '" + adapter.name() + "' has no images");
  }
  if (schedule.train_manifest.empty()) throw std::invalid_argument("train_base: empty schedule");
  std::vector<LabelledImage> out;
  for (const auto& [label, indices] : schedule.train_manifest.front()) {
    for (std::size_t i : indices) out.push_back({adapter.load(data::Partition::kTrain, i), label});
  }
  if (out.empty()) throw std::invalid_argument("train_base: session 0 has no training samples");
  return out;
}

// Zero-padded random crop and horizontal flip, applied in tensor space.
Tensor3 augment(const Tensor3& x, const TrainingConfig& cfg, Rng& rng) {
  Tensor3 out = x;
  if (cfg.random_crop && cfg.crop_padding > 0) {
    const int p = cfg.crop_padding;
    const int dy = static_cast<int>(rng() % (2 * p + 1)) - p;
    const int dx = static_cast<int>(rng() % (2 * p + 1)) - p;
    out.fill(0.0);
    for (int a = 0; a < x.height(); ++a) {
      const int sa = a + dy;
      if (sa < 0 || sa >= x.height()) continue;
      for (int b = 0; b < x.width(); ++b) {
        const int sb = b + dx;
        if (sb < 0 || sb >= x.width()) continue;
        std::copy_n(x.pixel(sa, sb), x.channels(), out.pixel(a, b));
      }
    }
  }
  if (cfg.random_flip && (rng() & 1U)) {
    const Tensor3 src = out;
    for (int a = 0; a < x.height(); ++a) {
      for (int b = 0; b < x.width(); ++b) {
        std::copy_n(src.pixel(a, x.width() - 1 - b), x.channels(), out.pixel(a, b));
      }
    }
  }
  return out;
}

double norm_of(const std::vector<double>& v) {
  return std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
}

bool finite(const rdi::LossBreakdown& l) {
  return std::isfinite(l.total) && std::isfinite(l.base) && std::isfinite(l.alr) &&
         std::isfinite(l.ali);
}

nlohmann::json breakdown_json(const rdi::LossBreakdown& l) {
  return {{"total", l.total}, {"base", l.base},           {"alr", l.alr},
          {"ali", l.ali},     {"alr_terms", l.alr_terms}, {"ali_terms", l.ali_terms}};
}

class StageRunner {
 public:
  StageRunner(const std::vector<LabelledImage>& data, const TrainingConfig& cfg)
      : data_(data), cfg_(cfg) {}

  // Runs `epochs` epochs of minibatch SGD on backbone + head. The optimizer
  // is fresh for every stage.
  void run(int stage, int epochs, model::Backbone& backbone, model::Param& head, int base_count,
           const rdi::RdiConfig& rdi, const rdi::MaskProvider& masks,
           std::vector<EpochLog>& log, const EpochCallback& on_epoch) {
    if (epochs == 0) return;
    const std::size_t n = data_.size();
    const std::size_t batch = static_cast<std::size_t>(cfg_.optimizer.batch_size);
    const std::size_t steps_per_epoch = (n + batch - 1) / batch;
    SgdMomentum opt(cfg_.optimizer, steps_per_epoch * static_cast<std::size_t>(epochs));
    Rng rng(derive_seed(cfg_.seed, "train/stage" + std::to_string(stage)));

    std::vector<model::Param*> params = backbone.params();
    params.push_back(&head);
    const auto d = static_cast<Eigen::Index>(backbone.output_shape().channels);
    const auto m = static_cast<Eigen::Index>(head.value.size()) / d;

    std::vector<std::size_t> order(n);
    for (int epoch = 0; epoch < epochs; ++epoch) {
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::shuffle(order.begin(), order.end(), rng);
      const double lr = opt.learning_rate();
      rdi::LossBreakdown sum;
      double max_grad_norm = 0.0;
      for (std::size_t s = 0; s < n; s += batch) {
        std::vector<rdi::Example> examples;
        for (std::size_t i = s; i < std::min(n, s + batch); ++i) {
          const auto& src = data_[order[i]];
          examples.push_back({augment(to_tensor(src.image), cfg_, rng), src.label});
        }
        backbone.zero_grad();
        Eigen::MatrixXd grad_w = Eigen::MatrixXd::Zero(d, m);
        const Eigen::Map<const Eigen::MatrixXd> w(head.value.data(), d, m);
        auto diverged = [&](const std::string& why, const rdi::LossBreakdown& l) {
          nlohmann::json dump = {{"stage", stage},
                                 {"epoch", epoch},
                                 {"step", opt.steps_taken()},
                                 {"learning_rate", opt.learning_rate()},
                                 {"reason", why},
                                 {"loss", breakdown_json(l)}};
          for (const auto* p : params) dump["parameter_norms"][p->name] = norm_of(p->value);
          return TrainingDiverged("training diverged: " + why + " in stage " + std::to_string(stage) +
                                      ", epoch " + std::to_string(epoch),
                                  std::move(dump));
        };
        rdi::LossBreakdown l;
        try {
          l = rdi::total_loss(examples, backbone, w, cfg_.temperature, base_count, rdi, &grad_w, masks);
        } catch (const model::DegenerateFeature&) {
          // Every unit of some sample went dead; no direction is left to learn from.
          throw diverged("all-zero feature", l);
        }
        if (!finite(l)) throw diverged("non-finite loss", l);
        std::copy(grad_w.data(), grad_w.data() + grad_w.size(), head.grad.begin());
        opt.step(params);
        max_grad_norm = std::max(max_grad_norm, opt.last_grad_norm());
        const double k = static_cast<double>(examples.size());
        sum.total += k * l.total;
        sum.base += k * l.base;
        sum.alr += k * l.alr;
        sum.ali += k * l.ali;
        sum.alr_terms += l.alr_terms;
        sum.ali_terms += l.ali_terms;
        sum.alr_fallbacks += l.alr_fallbacks;
      }
      const double inv = 1.0 / static_cast<double>(n);
      sum.total *= inv;
      sum.base *= inv;
      sum.alr *= inv;
      sum.ali *= inv;
      log.push_back({stage, epoch, lr, sum, max_grad_norm});
      if (on_epoch) on_epoch(log.back());
    }
  }

 private:
  const std::vector<LabelledImage>& data_;
  const TrainingConfig& cfg_;
};

CosineClassifier head_classifier(const model::Param& head, int d, double tau,
                                 std::optional<int> dummy) {
  const auto m = static_cast<Eigen::Index>(head.value.size()) / d;
  return CosineClassifier(Eigen::Map<const Eigen::MatrixXd>(head.value.data(), d, m), tau, dummy);
}

model::Param head_param(const Eigen::MatrixXd& w) {
  model::Param p("head.weight", static_cast<std::size_t>(w.size()));
  std::copy(w.data(), w.data() + w.size(), p.value.begin());
  return p;
}

// Mean objective over the whole set in fixed order, without augmentation.
double full_set_loss(const std::vector<LabelledImage>& data, const model::Backbone& backbone,
                     const CosineClassifier& classifier, int base_count,
                     const rdi::RdiConfig& rdi, const rdi::MaskProvider& masks) {
  model::Backbone copy = backbone;
  double sum = 0.0;
  for (const auto& item : data) {
    const rdi::Example ex{to_tensor(item.image), item.label};
    sum += rdi::total_loss(std::span(&ex, 1), copy, classifier.weights(), classifier.temperature(),
                           base_count, rdi, nullptr, masks)
               .total;
  }
  return sum / static_cast<double>(data.size());
}

// Class means of the pooled features, one column per class.
Eigen::MatrixXd class_means(const std::vector<LabelledImage>& data,
                            const model::Backbone& backbone, int base_count) {
  const int d = backbone.output_shape().channels;
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(d, base_count);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(base_count);
  for (const auto& item : data) {
    sums.col(item.label) += model::global_pool(backbone.forward(to_tensor(item.image))).vector();
    counts[item.label] += 1.0;
  }
  for (int c = 0; c < base_count; ++c) sums.col(c) /= std::max(1.0, counts[c]);
  return sums;
}

}  // namespace

std::string to_string(HeadInit init) {
  return init == HeadInit::kNormal ? "NORMAL" : "CLASS_MEANS";
}

HeadInit head_init_from_string(const std::string& text) {
  if (text == "NORMAL") return HeadInit::kNormal;
  if (text == "CLASS_MEANS") return HeadInit::kClassMeans;
  throw std::invalid_argument("unknown head_init '" + text + "'");
}

std::vector<rdi::Example> base_examples(const SessionSchedule& schedule,
                                        const data::DatasetAdapter& adapter) {
  std::vector<rdi::Example> out;
  for (auto& item : load_base(schedule, adapter)) out.push_back({to_tensor(item.image), item.label});
  return out;
}

rdi::MaskProvider frozen_mask_provider(const model::Backbone& backbone,
                                       const CosineClassifier& classifier, double threshold) {
  // Shared snapshots: the provider may outlive the trainer's copies.
  auto net = std::make_shared<const model::Backbone>(backbone);
  auto head = std::make_shared<const CosineClassifier>(classifier);
  return [net, head, threshold](const Tensor3& image) {
    const FeatureMap map = net->forward(image);
    const int predicted = rdi::predicted_label(*head, map);
    return rdi::FixedMasks{predicted, rdi::alr_mask(map, *head, predicted, threshold)};
  };
}

BaseTrainingResult train_base(const SessionSchedule& schedule, const data::DatasetAdapter& adapter,
                              model::Backbone backbone, const rdi::RdiConfig& rdi,
                              const TrainingConfig& config, const EpochCallback& on_epoch) {
  rdi.validate();
  config.validate();
  const std::vector<LabelledImage> data = load_base(schedule, adapter);
  const int base_count = schedule.base_class_count();
  const int d = backbone.output_shape().channels;
  const double tau = config.temperature;

  Rng init(derive_seed(config.seed, "init/head"));
  std::normal_distribution<double> normal(0.0, 1.0);
  Eigen::MatrixXd w0(d, base_count);
  for (Eigen::Index i = 0; i < w0.size(); ++i) w0.data()[i] = normal(init);
  if (config.head_init == HeadInit::kClassMeans) {
    // A zero mean (all features dead for that class) keeps the random draw.
    const Eigen::MatrixXd means = class_means(data, backbone, base_count);
    for (Eigen::Index c = 0; c < means.cols(); ++c) {
      if (means.col(c).norm() > 1e-12) w0.col(c) = means.col(c);
    }
  }
  model::Param head = head_param(w0);

  std::vector<EpochLog> log;
  StageRunner runner(data, config);

  rdi::RdiConfig stage1 = rdi;
  stage1.lambda = 0.0;
  stage1.beta = 0.0;
  runner.run(1, config.pretrain_epochs, backbone, head, base_count, stage1, {}, log, on_epoch);
  const CosineClassifier pretrain = head_classifier(head, d, tau, std::nullopt);

  const CosineClassifier extended =
      rdi::extend_with_dummy(pretrain, derive_seed(config.seed, "init/dummy"));
  head = head_param(extended.weights());

  rdi::MaskProvider masks;
  if (rdi.mask_source == rdi::MaskSource::kFrozenPretrain) {
    masks = frozen_mask_provider(backbone, pretrain, rdi.threshold);
  }

  const double start = full_set_loss(data, backbone, extended, base_count, rdi, masks);
  runner.run(2, config.decouple_epochs, backbone, head, base_count, rdi, masks, log, on_epoch);
  const CosineClassifier final_head = head_classifier(head, d, tau, base_count);
  const double end = config.decouple_epochs == 0
                         ? start
                         : full_set_loss(data, backbone, final_head, base_count, rdi, masks);

  return {std::move(backbone), final_head, pretrain, std::move(log), start, end};
}

}  // namespace fscil::protocol
