#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "fscil/analysis/accuracy.hpp"
#include "fscil/data/image.hpp"
#include "fscil/data/schedule_builder.hpp"
#include "fscil/data/synthetic.hpp"
#include "fscil/model/cosine.hpp"
#include "fscil/protocol/optimizer.hpp"
#include "fscil/protocol/session.hpp"
#include "fscil/protocol/trainer.hpp"
#include "fscil/rdi/masks.hpp"
#include "helpers.hpp"

using namespace fscil;
using namespace fscil::protocol;
using testing::close;

namespace {

model::Param make_param(std::vector<double> value) {
  model::Param p("p", value.size());
  p.value = std::move(value);
  return p;
}

// 6 classes of 16x16 images: 2 base, then 2 sessions of 2-way 2-shot.
struct TinyWorld {
  std::unique_ptr<data::InMemoryDataset> data;
  SessionSchedule schedule;
  model::BackboneConfig backbone_config;

  TinyWorld() {
    data::SyntheticSpec spec;
    spec.image_size = 16;
    spec.class_count = 6;
    spec.samples_per_class = 6;
    spec.test_samples_per_class = 3;
    spec.signal_patch_size = 8;
    spec.nuisance_patch_size = 4;
    spec.placement_grid = 4;
    spec.seed = 5;
    data = data::generate_synthetic(spec);
    schedule = data::build_schedule(*data, {2, 2, 2, 2, 5});
    backbone_config.input = {16, 16, 1};
    backbone_config.widths = {4, 4, 4, 4};
    backbone_config.pooled_blocks = 2;
  }

  TrainingConfig training() const {
    TrainingConfig tc;
    tc.pretrain_epochs = 1;
    tc.decouple_epochs = 1;
    tc.optimizer.batch_size = 4;
    tc.optimizer.learning_rate = 0.01;
    tc.optimizer.clip_norm = 5.0;
    tc.seed = 3;
    return tc;
  }

  model::Backbone fresh() const { return model::Backbone(backbone_config, 11); }
};

Eigen::VectorXd embed(const model::Backbone& b, const data::Image& img) {
  return model::global_pool(b.forward(data::to_tensor(img))).vector();
}

}  // namespace

TEST_SUITE("optimizer") {
  TEST_CASE("cosine learning rate follows the half cosine") {
    OptimizerConfig cfg;
    cfg.learning_rate = 0.2;
    SgdMomentum opt(cfg, 10);
    model::Param p = make_param({1.0});
    std::vector<model::Param*> params{&p};
    for (int s = 0; s <= 12; ++s) {
      const double expected = 0.1 * (1.0 + std::cos(std::numbers::pi * std::min(1.0, s / 10.0)));
      CHECK(close(opt.learning_rate(), expected, 1e-12));
      CHECK(opt.steps_taken() == static_cast<std::size_t>(s));
      opt.step(params);
    }
    cfg.cosine_decay = false;
    SgdMomentum flat(cfg, 10);
    for (int s = 0; s < 5; ++s) flat.step(params);
    CHECK(flat.learning_rate() == 0.2);
  }

  TEST_CASE("momentum and weight decay match a hand-rolled update") {
    testing::Rng rng(1);
    OptimizerConfig cfg;
    cfg.learning_rate = 0.05;
    cfg.momentum = 0.8;
    cfg.weight_decay = 0.01;
    cfg.cosine_decay = false;
    for (int trial = 0; trial < 50; ++trial) {
      const int n = testing::uniform_int(rng, 1, 6);
      model::Param a = make_param(testing::random_vec(rng, n));
      model::Param b = make_param(testing::random_vec(rng, 2));
      std::vector<double> wa = a.value, wb = b.value, va(n, 0.0), vb(2, 0.0);
      SgdMomentum opt(cfg, 100);
      for (int s = 0; s < 4; ++s) {
        a.grad = testing::random_vec(rng, n);
        b.grad = testing::random_vec(rng, 2);
        auto ref = [&](std::vector<double>& w, std::vector<double>& v, const std::vector<double>& g) {
          for (std::size_t j = 0; j < w.size(); ++j) {
            v[j] = 0.8 * v[j] + g[j] + 0.01 * w[j];
            w[j] -= 0.05 * v[j];
          }
        };
        ref(wa, va, a.grad);
        ref(wb, vb, b.grad);
        opt.step({&a, &b});
        for (int j = 0; j < n; ++j) CHECK(close(a.value[j], wa[j], 1e-12));
        for (int j = 0; j < 2; ++j) CHECK(close(b.value[j], wb[j], 1e-12));
      }
    }
  }

  TEST_CASE("clipping rescales only large gradients") {
    OptimizerConfig cfg;
    cfg.learning_rate = 1.0;
    cfg.momentum = 0.0;
    cfg.weight_decay = 0.0;
    cfg.cosine_decay = false;
    cfg.clip_norm = 1.0;
    model::Param a = make_param({0.0, 0.0});
    a.grad = {3.0, 4.0};
    SgdMomentum opt(cfg, 1);
    opt.step({&a});
    CHECK(opt.last_grad_norm() == doctest::Approx(5.0));
    CHECK(a.value[0] == doctest::Approx(-0.6));
    CHECK(a.value[1] == doctest::Approx(-0.8));
    a.value = {0.0, 0.0};
    a.grad = {0.3, 0.4};
    opt.step({&a});
    CHECK(a.value[0] == doctest::Approx(-0.3));
    CHECK(a.value[1] == doctest::Approx(-0.4));
  }

  TEST_CASE("bad settings are rejected") {
    auto bad = [](auto edit) {
      OptimizerConfig cfg;
      edit(cfg);
      return cfg;
    };
    CHECK_THROWS_AS(SgdMomentum(bad([](auto& c) { c.learning_rate = 0.0; }), 1), std::invalid_argument);
    CHECK_THROWS_AS(SgdMomentum(bad([](auto& c) { c.momentum = 1.0; }), 1), std::invalid_argument);
    CHECK_THROWS_AS(SgdMomentum(bad([](auto& c) { c.weight_decay = -1.0; }), 1), std::invalid_argument);
    CHECK_THROWS_AS(SgdMomentum(bad([](auto& c) { c.batch_size = 0; }), 1), std::invalid_argument);
    CHECK_THROWS_AS(SgdMomentum(bad([](auto& c) { c.clip_norm = -1.0; }), 1), std::invalid_argument);

    model::Param a = make_param({1.0}), b = make_param({1.0});
    SgdMomentum opt(OptimizerConfig{}, 5);
    opt.step({&a});
    CHECK_THROWS_AS(opt.step({&a, &b}), std::logic_error);
  }
}

TEST_SUITE("prototypes") {
  TEST_CASE("prototypes are per-class arithmetic means") {
    testing::Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
      const int d = testing::uniform_int(rng, 1, 8);
      std::map<int, std::vector<Eigen::VectorXd>> feats;
      std::map<int, oracle::Vec> sums;
      for (int c = 0; c < testing::uniform_int(rng, 1, 5); ++c) {
        const int n = testing::uniform_int(rng, 1, 5);
        oracle::Vec s(d, 0.0);
        for (int i = 0; i < n; ++i) {
          const oracle::Vec v = testing::random_vec(rng, d);
          for (int k = 0; k < d; ++k) s[k] += v[k];
          feats[c * 3].push_back(testing::to_eigen(v));
        }
        for (double& x : s) x /= n;
        sums[c * 3] = s;
      }
      const PrototypeStore store = prototypes_from_features(feats, d);
      REQUIRE(store.size() == sums.size());
      for (const auto& [c, mean] : sums) {
        CHECK(store.at(c).sample_count == static_cast<int>(feats[c].size()));
        for (int k = 0; k < d; ++k) CHECK(close(store.at(c).mean[k], mean[k], 1e-12));
      }
    }
  }

  TEST_CASE("a class without samples is an error") {
    std::map<int, std::vector<Eigen::VectorXd>> feats{{0, {}}};
    CHECK_THROWS_WITH_AS(prototypes_from_features(feats, 2), doctest::Contains("no training samples"),
                         std::invalid_argument);
    feats[0].push_back(Eigen::VectorXd::Zero(3));
    CHECK_THROWS_AS(prototypes_from_features(feats, 2), std::invalid_argument);
  }

  TEST_CASE("session prototypes average the embedded training images") {
    const TinyWorld w;
    const model::Backbone b = w.fresh();
    for (int t = 0; t < w.schedule.session_count(); ++t) {
      const PrototypeStore store = compute_prototypes(b, w.schedule, *w.data, t);
      CHECK(store.size() == w.schedule.classes_of(t).size());
      for (const auto& [c, idx] : w.schedule.train_manifest[t]) {
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(4);
        for (auto i : idx) sum += embed(b, w.data->load(data::Partition::kTrain, i));
        sum /= static_cast<double>(idx.size());
        CHECK((store.at(c).mean - sum).norm() < 1e-12);
      }
    }
    CHECK_THROWS_AS(compute_prototypes(b, w.schedule, *w.data, 3), std::out_of_range);
    PrototypeOptions alr;
    alr.pooling = PrototypePooling::kAlr;
    CHECK_THROWS_AS(compute_prototypes(b, w.schedule, *w.data, 0, alr), std::invalid_argument);
  }

  TEST_CASE("pooling names round trip") {
    for (auto p : {PrototypePooling::kGlobal, PrototypePooling::kAlr})
      CHECK(prototype_pooling_from_string(to_string(p)) == p);
    for (auto h : {HeadInit::kNormal, HeadInit::kClassMeans}) CHECK(head_init_from_string(to_string(h)) == h);
    CHECK_THROWS_AS(prototype_pooling_from_string("max"), std::invalid_argument);
    CHECK_THROWS_AS(head_init_from_string("zeros"), std::invalid_argument);
  }
}

TEST_SUITE("training") {
  TEST_CASE("two stages leave a dummy-extended head") {
    const TinyWorld w;
    rdi::RdiConfig rc;
    std::vector<EpochLog> seen;
    const auto res = train_base(w.schedule, *w.data, w.fresh(), rc, w.training(),
                                [&](const EpochLog& l) { seen.push_back(l); });
    REQUIRE(res.log.size() == 2);
    CHECK(seen.size() == 2);
    CHECK(res.log[0].stage == 1);
    CHECK(res.log[1].stage == 2);
    // Stage 1 reports the dummy terms but does not weigh them in.
    CHECK(res.log[0].mean.total == doctest::Approx(res.log[0].mean.base));
    for (const auto& l : res.log) {
      CHECK(std::isfinite(l.mean.total));
      CHECK(l.max_grad_norm > 0.0);
    }
    CHECK(res.pretrain_classifier.column_count() == 2);
    CHECK_FALSE(res.pretrain_classifier.has_dummy());
    CHECK(res.classifier.column_count() == 3);
    CHECK(res.classifier.dummy_index() == 2);
    CHECK(res.classifier.real_class_count() == 2);
    CHECK(std::isfinite(res.stage2_start_loss));
    CHECK(std::isfinite(res.stage2_end_loss));
  }

  TEST_CASE("training is reproducible and seed sensitive") {
    const TinyWorld w;
    rdi::RdiConfig rc;
    const auto a = train_base(w.schedule, *w.data, w.fresh(), rc, w.training());
    const auto b = train_base(w.schedule, *w.data, w.fresh(), rc, w.training());
    CHECK(a.backbone.parameter_hash() == b.backbone.parameter_hash());
    CHECK(a.classifier == b.classifier);
    TrainingConfig other = w.training();
    other.seed = 4;
    const auto c = train_base(w.schedule, *w.data, w.fresh(), rc, other);
    CHECK(a.backbone.parameter_hash() != c.backbone.parameter_hash());
  }

  TEST_CASE("class-mean head starts at the feature means") {
    const TinyWorld w;
    TrainingConfig tc = w.training();
    tc.pretrain_epochs = 0;
    tc.decouple_epochs = 0;
    const model::Backbone b = w.fresh();
    const auto res = train_base(w.schedule, *w.data, b, rdi::RdiConfig{}, tc);
    CHECK(res.backbone.parameter_hash() == b.parameter_hash());
    for (const auto& [c, idx] : w.schedule.train_manifest[0]) {
      Eigen::VectorXd mean = Eigen::VectorXd::Zero(4);
      for (auto i : idx) mean += embed(b, w.data->load(data::Partition::kTrain, i));
      mean /= static_cast<double>(idx.size());
      CHECK((res.pretrain_classifier.weights().col(c) - mean).norm() < 1e-12);
    }
  }

  TEST_CASE("bad training settings are rejected") {
    TrainingConfig tc;
    tc.pretrain_epochs = -1;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc = {};
    tc.temperature = 0.0;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
    tc = {};
    tc.optimizer.momentum = 2.0;
    CHECK_THROWS_AS(tc.validate(), std::invalid_argument);
  }

  TEST_CASE("frozen masks come from the snapshot") {
    const TinyWorld w;
    model::Backbone b = w.fresh();
    testing::Rng rng(4);
    const CosineClassifier head(testing::to_eigen(testing::random_columns(rng, 4, 2)), 16.0);
    const auto provider = frozen_mask_provider(b, head, 0.1);
    const Tensor3 img = data::to_tensor(w.data->load(data::Partition::kTrain, 0));
    const FeatureMap map = b.forward(img);
    const int y = rdi::predicted_label(head, map);
    // Later edits to the live backbone must not leak into the provider.
    for (auto* p : b.params())
      for (double& v : p->value) v = 0.0;
    const rdi::FixedMasks m = provider(img);
    CHECK(m.predicted == y);
    CHECK(m.alr == rdi::alr_mask(map, head, y, 0.1));
  }
}

TEST_SUITE("incremental") {
  TEST_CASE("sessions keep the backbone frozen and report consistent accuracies") {
    const TinyWorld w;
    const auto trained = train_base(w.schedule, *w.data, w.fresh(), rdi::RdiConfig{}, w.training());
    const std::uint64_t before = trained.backbone.parameter_hash();
    const auto inc = run_incremental(w.schedule, *w.data, trained.backbone, trained.classifier);
    CHECK(trained.backbone.parameter_hash() == before);
    REQUIRE(inc.states.size() == 3);
    REQUIRE(inc.reports.size() == 3);

    for (int t = 0; t < 3; ++t) {
      const auto& state = inc.states[t];
      CHECK(state.session == t);
      CHECK(state.backbone_hash == before);
      CHECK_FALSE(state.classifier.has_dummy());
      CHECK(state.classifier.column_count() == w.schedule.cumulative_class_count(t));

      // Columns are the session prototypes, appended in order.
      const PrototypeStore protos = compute_prototypes(trained.backbone, w.schedule, *w.data, t);
      for (const auto& [c, p] : protos.entries())
        CHECK((state.classifier.weights().col(c) - p.mean).norm() < 1e-12);

      const int seen = w.schedule.cumulative_class_count(t);
      std::size_t base_n = 0, base_hit = 0, novel_n = 0, novel_hit = 0, nn_hit = 0;
      for (const auto& p : inc.predictions[t]) {
        CHECK(p.predicted < seen);
        if (p.label < 2) {
          ++base_n;
          base_hit += p.predicted == p.label;
          CHECK_FALSE(p.novel_only.has_value());
        } else {
          ++novel_n;
          novel_hit += p.predicted == p.label;
          REQUIRE(p.novel_only.has_value());
          CHECK(*p.novel_only >= 2);
          nn_hit += *p.novel_only == p.label;
        }
      }
      const EvalReport& r = inc.reports[t];
      CHECK(close(r.ba_acc(), static_cast<double>(base_hit) / base_n, 1e-12));
      const double aa = static_cast<double>(base_hit + novel_hit) / (base_n + novel_n);
      CHECK(close(r.aa_acc(), aa, 1e-12));
      if (t == 0) {
        CHECK_FALSE(r.na_acc().has_value());
      } else {
        CHECK(close(*r.na_acc(), static_cast<double>(novel_hit) / novel_n, 1e-12));
        CHECK(close(*r.nn_acc(), static_cast<double>(nn_hit) / novel_n, 1e-12));
        CHECK(*r.nn_acc() >= *r.na_acc());
      }
    }
  }

  TEST_CASE("test features are the pooled embeddings of every test image") {
    const TinyWorld w;
    const model::Backbone b = w.fresh();
    const CosineClassifier head(compute_prototypes(b, w.schedule, *w.data, 0).as_columns(), 16.0);
    const auto inc = run_incremental(w.schedule, *w.data, b, rdi::extend_with_dummy(head, 1));
    std::size_t total = 0;
    for (const auto& [c, idx] : w.schedule.test_manifest.back()) total += idx.size();
    CHECK(inc.test_features.size() == total);
    for (const auto& [i, f] : inc.test_features)
      CHECK((f - embed(b, w.data->load(data::Partition::kTest, i))).norm() < 1e-12);
  }

  TEST_CASE("mismatched inputs are rejected") {
    const TinyWorld w;
    const model::Backbone b = w.fresh();
    testing::Rng rng(6);
    const CosineClassifier three(testing::to_eigen(testing::random_columns(rng, 4, 3)), 16.0);
    CHECK_THROWS_WITH_AS(run_incremental(w.schedule, *w.data, b, three), doctest::Contains("base classes"),
                         std::invalid_argument);
    SessionSchedule broken = w.schedule;
    broken.test_manifest.back().begin()->second.push_back(
        w.schedule.test_manifest.back().rbegin()->second.front());
    const CosineClassifier two(testing::to_eigen(testing::random_columns(rng, 4, 2)), 16.0);
    CHECK_THROWS_WITH_AS(run_incremental(broken, *w.data, b, two), doctest::Contains("does not belong"),
                         std::invalid_argument);
  }
}
