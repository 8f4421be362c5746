#include "fscil/data/schedule_builder.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

#include "fscil/core/random.hpp"

namespace fscil::data {

SessionSchedule build_schedule(const DatasetAdapter& adapter, const ScheduleRequest& req) {
  const int classes = adapter.class_count();
  if (req.base_count < 1) throw std::invalid_argument("build_schedule: base_count must be >= 1");
  if (req.sessions < 0) throw std::invalid_argument("build_schedule: sessions must be >= 0");
  if (req.sessions > 0 && (req.way < 1 || req.shot < 1)) {
    throw std::invalid_argument("build_schedule: way and shot must be >= 1");
  }
  const long needed = req.base_count + static_cast<long>(req.sessions) * req.way;
  if (needed > classes) {
    throw std::invalid_argument("build_schedule: need " + std::to_string(needed) +
                                " classes but dataset '" + adapter.name() + "' has " +
                                std::to_string(classes));
  }

  std::vector<std::vector<std::size_t>> train_by_class(static_cast<std::size_t>(classes));
  std::vector<std::vector<std::size_t>> test_by_class(static_cast<std::size_t>(classes));
  const auto& train = adapter.samples(Partition::kTrain);
  const auto& test = adapter.samples(Partition::kTest);
  for (std::size_t i = 0; i < train.size(); ++i) {
    train_by_class[static_cast<std::size_t>(train[i].label)].push_back(i);
  }
  for (std::size_t i = 0; i < test.size(); ++i) {
    test_by_class[static_cast<std::size_t>(test[i].label)].push_back(i);
  }

  std::vector<int> novel_pool(static_cast<std::size_t>(classes - req.base_count));
  std::iota(novel_pool.begin(), novel_pool.end(), req.base_count);
  Rng order_rng(derive_seed(req.seed, "schedule/novel-order"));
  std::shuffle(novel_pool.begin(), novel_pool.end(), order_rng);

  SessionSchedule s;
  for (int c = 0; c < req.base_count; ++c) {
    s.base_classes.push_back(c);
    s.source_classes.push_back(c);
  }
  int next_id = req.base_count;
  for (int t = 0; t < req.sessions; ++t) {
    IncrementalSession session{req.way, req.shot, {}};
    for (int j = 0; j < req.way; ++j) {
      s.source_classes.push_back(novel_pool[static_cast<std::size_t>(t * req.way + j)]);
      session.classes.push_back(next_id++);
    }
    s.incremental_sessions.push_back(std::move(session));
  }

  Rng shot_rng(derive_seed(req.seed, "schedule/shots"));
  ClassManifest base_train;
  for (int c : s.base_classes) {
    const auto& pool = train_by_class[static_cast<std::size_t>(s.source_classes[static_cast<std::size_t>(c)])];
    if (pool.empty()) {
      throw std::invalid_argument("build_schedule: base class " + std::to_string(c) +
                                  " has no training samples");
    }
    base_train[c] = pool;
  }
  s.train_manifest.push_back(std::move(base_train));
  for (const auto& session : s.incremental_sessions) {
    ClassManifest m;
    for (int c : session.classes) {
      const int src = s.source_classes[static_cast<std::size_t>(c)];
      auto pool = train_by_class[static_cast<std::size_t>(src)];
      if (static_cast<int>(pool.size()) < req.shot) {
        throw std::invalid_argument("build_schedule: source class " + std::to_string(src) +
                                    " has " + std::to_string(pool.size()) +
                                    " training samples, fewer than shot=" + std::to_string(req.shot));
      }
      std::shuffle(pool.begin(), pool.end(), shot_rng);
      pool.resize(static_cast<std::size_t>(req.shot));
      std::sort(pool.begin(), pool.end());
      m[c] = std::move(pool);
    }
    s.train_manifest.push_back(std::move(m));
  }

  ClassManifest seen_test;
  for (int t = 0; t < s.session_count(); ++t) {
    for (int c : s.classes_of(t)) {
      const int src = s.source_classes[static_cast<std::size_t>(c)];
      const auto& pool = test_by_class[static_cast<std::size_t>(src)];
      if (pool.empty()) {
        throw std::invalid_argument("build_schedule: source class " + std::to_string(src) +
                                    " has no test samples");
      }
      seen_test[c] = pool;
    }
    s.test_manifest.push_back(seen_test);
  }
  return s;
}

}  // namespace fscil::data
