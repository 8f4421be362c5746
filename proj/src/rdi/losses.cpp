#include "fscil/rdi/losses.hpp"

#include <stdexcept>
#include <string>

#include "fscil/model/cosine.hpp"
#include "fscil/rdi/masks.hpp"

namespace fscil::rdi {

namespace {

void require_dummy(const CosineClassifier& classifier, const char* who) {
  if (!classifier.has_dummy()) {
    throw std::invalid_argument(std::string(who) + ": classifier has no dummy column");
  }
}

void require_support(const PooledFeature& f, const char* who) {
  if (f.support_count() == 0) {
    throw std::invalid_argument(std::string(who) +
                                ": feature pooled from an empty mask; apply the empty-mask policy");
  }
}

// Adds the gradient of the global mean pool to every patch.
void add_global_pool_backward(Tensor3& grad_map, const Eigen::VectorXd& grad_pooled,
                              double scale) {
  const double w = scale / (grad_map.height() * grad_map.width());
  for (int a = 0; a < grad_map.height(); ++a) {
    for (int b = 0; b < grad_map.width(); ++b) {
      double* g = grad_map.pixel(a, b);
      for (int k = 0; k < grad_map.channels(); ++k) g[k] += w * grad_pooled[k];
    }
  }
}

void add_scaled(Tensor3& dst, const Tensor3& src, double scale) {
  auto d = dst.data();
  const auto s = src.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * s[i];
}

struct ResolvedFeature {
  const PooledFeature* feature = nullptr;
  bool global = false;
};

ResolvedFeature resolve(const PooledFeature& masked, const PooledFeature& global,
                        EmptyMaskPolicy policy) {
  const bool empty = masked.support_count() == 0 || masked.vector().squaredNorm() == 0.0;
  if (!empty) return {&masked, false};
  if (policy == EmptyMaskPolicy::kSkipTerm) return {};
  return {&global, true};
}

}  // namespace

double loss_alr_dummy(const CosineClassifier& classifier, const PooledFeature& f_alr, int label) {
  require_dummy(classifier, "loss_alr_dummy");
  require_support(f_alr, "loss_alr_dummy");
  if (label < 0 || label >= classifier.real_class_count()) {
    throw std::out_of_range("loss_alr_dummy: label must be a real class");
  }
  return model::cosine_cross_entropy(classifier.weights(), classifier.temperature(),
                                     f_alr.vector(), label)
      .loss;
}

double loss_ali_dummy(const CosineClassifier& classifier, const PooledFeature& f_ali) {
  require_dummy(classifier, "loss_ali_dummy");
  require_support(f_ali, "loss_ali_dummy");
  return model::cosine_cross_entropy(classifier.weights(), classifier.temperature(),
                                     f_ali.vector(), *classifier.dummy_index())
      .loss;
}

SampleLoss sample_loss(const FeatureMap& map, const Eigen::MatrixXd& weights, double temperature,
                       int label, int base_count, const RdiConfig& cfg, const FixedMasks* masks) {
  const auto columns = static_cast<int>(weights.cols());
  const bool has_dummy = columns == base_count + 1;
  if (!has_dummy && columns != base_count) {
    throw std::invalid_argument("sample_loss: weights must have base_count or base_count + 1 columns");
  }
  if (weights.rows() != map.channels()) {
    throw std::invalid_argument("sample_loss: classifier dimension does not match feature map");
  }
  if (label < 0 || label >= base_count) {
    throw std::out_of_range("sample_loss: label " + std::to_string(label) + " is not a base class");
  }
  if (!has_dummy && cfg.beta > 0.0) {
    throw std::invalid_argument("sample_loss: the ALI term needs a dummy column");
  }

  SampleLoss out;
  out.grad_map = Tensor3(map.shape());
  out.grad_weights = Eigen::MatrixXd::Zero(weights.rows(), columns);

  const PooledFeature global = model::global_pool(map);
  const int base_columns = (cfg.base_loss_includes_dummy && has_dummy) ? columns : base_count;
  {
    auto term = model::cosine_cross_entropy(weights.leftCols(base_columns), temperature,
                                            global.vector(), label);
    out.base = term.loss;
    out.total = term.loss;
    add_global_pool_backward(out.grad_map, term.grad_feature, 1.0);
    out.grad_weights.leftCols(base_columns) += term.grad_weights;
  }

  if (masks) {
    if (masks->alr.height() != map.height() || masks->alr.width() != map.width()) {
      throw std::invalid_argument("sample_loss: fixed mask grid does not match feature map");
    }
    out.predicted = masks->predicted;
    out.alr_mask = masks->alr;
  } else {
    const CosineClassifier base_head(weights.leftCols(base_count), temperature);
    out.predicted = model::predict(base_head, global);
    out.alr_mask = alr_mask_from_scores(map.height(), map.width(),
                                        patch_scores(map, weights.col(out.predicted)),
                                        cfg.threshold);
  }
  const PatchMask ali = ali_mask(out.alr_mask);

  auto add_term = [&](const PatchMask& mask, EmptyMaskPolicy policy, int target, double weight,
                      std::optional<double>& slot, bool* fell_back) {
    const PooledFeature pooled = masked_pool(map, mask, cfg.pooling_mode);
    const ResolvedFeature use = resolve(pooled, global, policy);
    if (!use.feature) return;
    if (fell_back) *fell_back = use.global;
    auto term = model::cosine_cross_entropy(weights, temperature, use.feature->vector(), target);
    slot = term.loss;
    if (weight == 0.0) return;
    out.total += weight * term.loss;
    if (use.global) {
      add_global_pool_backward(out.grad_map, term.grad_feature, weight);
    } else {
      add_scaled(out.grad_map,
                 masked_pool_backward(map.shape(), mask, cfg.pooling_mode, term.grad_feature),
                 weight);
    }
    out.grad_weights += weight * term.grad_weights;
  };

  add_term(out.alr_mask, cfg.alr_empty_policy, label, cfg.lambda, out.alr, &out.alr_fell_back);
  if (has_dummy) add_term(ali, cfg.ali_empty_policy, columns - 1, cfg.beta, out.ali, nullptr);
  return out;
}

LossBreakdown total_loss(std::span<const Example> batch, model::Backbone& backbone,
                         const Eigen::MatrixXd& weights, double temperature, int base_count,
                         const RdiConfig& cfg, Eigen::MatrixXd* grad_weights,
                         const MaskProvider& masks) {
  if (batch.empty()) throw std::invalid_argument("total_loss: empty batch");
  const double scale = 1.0 / static_cast<double>(batch.size());
  LossBreakdown out;
  for (const Example& ex : batch) {
    std::optional<FixedMasks> fixed;
    if (masks) fixed = masks(ex.image);
    SampleLoss s;
    if (grad_weights) {
      model::LayerCache trace;
      FeatureMap map(backbone.forward_train(ex.image, trace));
      s = sample_loss(map, weights, temperature, ex.label, base_count, cfg,
                      fixed ? &*fixed : nullptr);
      for (double& g : s.grad_map.data()) g *= scale;
      backbone.backward(s.grad_map, trace);
      *grad_weights += scale * s.grad_weights;
    } else {
      s = sample_loss(backbone.forward(ex.image), weights, temperature, ex.label, base_count, cfg,
                      fixed ? &*fixed : nullptr);
    }
    out.total += scale * s.total;
    out.base += scale * s.base;
    if (s.alr) {
      out.alr += scale * *s.alr;
      ++out.alr_terms;
    }
    if (s.ali) {
      out.ali += scale * *s.ali;
      ++out.ali_terms;
    }
    if (s.alr_fell_back) ++out.alr_fallbacks;
  }
  return out;
}

LossBreakdown total_loss(std::span<const Example> batch, const model::Backbone& backbone,
                         const CosineClassifier& classifier, int base_count,
                         const RdiConfig& cfg) {
  model::Backbone copy = backbone;
  return total_loss(batch, copy, classifier.weights(), classifier.temperature(), base_count, cfg,
                    nullptr);
}

}  // namespace fscil::rdi
