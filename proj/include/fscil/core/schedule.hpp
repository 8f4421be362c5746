#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace fscil {

struct IncrementalSession {
  int way = 0;
  int shot = 0;
  std::vector<int> classes;

  friend bool operator==(const IncrementalSession&, const IncrementalSession&) = default;
};

// class id -> sample indices into the adapter partition.
using ClassManifest = std::map<int, std::vector<std::size_t>>;

// The full curriculum. Class ids are dense: base classes take 0..n-1 and
// novel classes follow session by session, so a class id is also its
// classifier column.
struct SessionSchedule {
  std::vector<int> base_classes;
  std::vector<IncrementalSession> incremental_sessions;
  // Indexed by session; session 0 is the base session.
  std::vector<ClassManifest> train_manifest;
  std::vector<ClassManifest> test_manifest;
  // Dense class id -> class index in the source dataset.
  std::vector<int> source_classes;

  int session_count() const { return 1 + static_cast<int>(incremental_sessions.size()); }
  int base_class_count() const { return static_cast<int>(base_classes.size()); }
  const std::vector<int>& classes_of(int session) const;
  int cumulative_class_count(int session) const;
  bool is_base_class(int class_id) const { return class_id < base_class_count(); }

  friend bool operator==(const SessionSchedule&, const SessionSchedule&) = default;
};

struct ScheduleVerdict {
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

ScheduleVerdict validate_schedule(const SessionSchedule& schedule);

// One row per session, used for schedule-only summaries.
struct ScheduleRow {
  int session = 0;
  int way = 0;
  int shot = 0;
  int cumulative_classes = 0;
  std::size_t train_samples = 0;
  std::size_t test_samples = 0;
};

std::vector<ScheduleRow> summarize_schedule(const SessionSchedule& schedule);

}  // namespace fscil
