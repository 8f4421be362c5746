#include "fscil/core/schedule.hpp"

#include <set>
#include <sstream>
#include <stdexcept>

namespace fscil {

const std::vector<int>& SessionSchedule::classes_of(int session) const {
  if (session == 0) return base_classes;
  if (session < 0 || session > static_cast<int>(incremental_sessions.size())) {
    throw std::out_of_range("SessionSchedule: session index out of range");
  }
  return incremental_sessions[static_cast<std::size_t>(session) - 1].classes;
}

int SessionSchedule::cumulative_class_count(int session) const {
  int total = 0;
  for (int t = 0; t <= session; ++t) total += static_cast<int>(classes_of(t).size());
  return total;
}

namespace {

std::string describe_keys(const ClassManifest& manifest) {
  std::ostringstream out;
  out << "{";
  bool first = true;
  for (const auto& [cls, samples] : manifest) {
    out << (first ? "" : ",") << cls;
    first = false;
  }
  out << "}";
  return out.str();
}

}  // namespace

ScheduleVerdict validate_schedule(const SessionSchedule& schedule) {
  ScheduleVerdict verdict;
  auto fail = [&](std::string message) { verdict.violations.push_back(std::move(message)); };

  if (schedule.base_classes.empty()) fail("base session has no classes");

  const int sessions = schedule.session_count();
  if (static_cast<int>(schedule.train_manifest.size()) != sessions) {
    fail("train manifest has " + std::to_string(schedule.train_manifest.size()) +
         " sessions, expected " + std::to_string(sessions));
  }
  if (static_cast<int>(schedule.test_manifest.size()) != sessions) {
    fail("test manifest has " + std::to_string(schedule.test_manifest.size()) +
         " sessions, expected " + std::to_string(sessions));
  }

  std::map<int, int> first_session;
  int expected_id = 0;
  bool dense = true;
  for (int t = 0; t < sessions; ++t) {
    for (int cls : schedule.classes_of(t)) {
      auto [it, inserted] = first_session.emplace(cls, t);
      if (!inserted) {
        fail("overlapping label spaces: class " + std::to_string(cls) + " appears in sessions " +
             std::to_string(it->second) + " and " + std::to_string(t));
      }
      if (cls != expected_id) dense = false;
      ++expected_id;
    }
  }
  if (!dense) fail("class ids are not dense in schedule order");
  if (!schedule.source_classes.empty() &&
      static_cast<int>(schedule.source_classes.size()) != expected_id) {
    fail("source class table has " + std::to_string(schedule.source_classes.size()) +
         " entries for " + std::to_string(expected_id) + " classes");
  }

  for (std::size_t i = 0; i < schedule.incremental_sessions.size(); ++i) {
    const auto& s = schedule.incremental_sessions[i];
    const int t = static_cast<int>(i) + 1;
    if (s.way < 1 || s.shot < 1) fail("session " + std::to_string(t) + " has way/shot below 1");
    if (static_cast<int>(s.classes.size()) != s.way) {
      fail("session " + std::to_string(t) + " lists " + std::to_string(s.classes.size()) +
           " classes for a " + std::to_string(s.way) + "-way task");
    }
  }

  std::set<int> seen;
  for (int t = 0; t < sessions; ++t) {
    const auto& classes = schedule.classes_of(t);
    seen.insert(classes.begin(), classes.end());

    if (t < static_cast<int>(schedule.train_manifest.size())) {
      const auto& train = schedule.train_manifest[static_cast<std::size_t>(t)];
      std::set<int> expected(classes.begin(), classes.end());
      std::set<int> actual;
      for (const auto& [cls, samples] : train) actual.insert(cls);
      if (actual != expected) {
        fail("train manifest of session " + std::to_string(t) + " covers classes " +
             describe_keys(train) + " instead of the session label space");
      }
      for (const auto& [cls, samples] : train) {
        if (t == 0 && samples.empty()) {
          fail("base class " + std::to_string(cls) + " has no training samples");
        }
        if (t > 0) {
          const int shot = schedule.incremental_sessions[static_cast<std::size_t>(t) - 1].shot;
          if (static_cast<int>(samples.size()) != shot) {
            fail("class " + std::to_string(cls) + " in session " + std::to_string(t) + " has " +
                 std::to_string(samples.size()) + " training samples, expected " +
                 std::to_string(shot));
          }
        }
      }
    }

    if (t < static_cast<int>(schedule.test_manifest.size())) {
      const auto& test = schedule.test_manifest[static_cast<std::size_t>(t)];
      std::set<int> actual;
      for (const auto& [cls, samples] : test) {
        actual.insert(cls);
        if (samples.empty()) {
          fail("test manifest of session " + std::to_string(t) + " has no samples for class " +
               std::to_string(cls));
        }
      }
      if (actual != seen) {
        fail("missing test coverage: test manifest of session " + std::to_string(t) +
             " covers " + describe_keys(test) + " but " + std::to_string(seen.size()) +
             " classes have been seen");
      }
    }
  }
  return verdict;
}

std::vector<ScheduleRow> summarize_schedule(const SessionSchedule& schedule) {
  std::vector<ScheduleRow> rows;
  for (int t = 0; t < schedule.session_count(); ++t) {
    ScheduleRow row;
    row.session = t;
    if (t > 0) {
      row.way = schedule.incremental_sessions[static_cast<std::size_t>(t) - 1].way;
      row.shot = schedule.incremental_sessions[static_cast<std::size_t>(t) - 1].shot;
    } else {
      row.way = schedule.base_class_count();
    }
    row.cumulative_classes = schedule.cumulative_class_count(t);
    if (t < static_cast<int>(schedule.train_manifest.size())) {
      for (const auto& [cls, samples] : schedule.train_manifest[static_cast<std::size_t>(t)]) {
        row.train_samples += samples.size();
      }
    }
    if (t < static_cast<int>(schedule.test_manifest.size())) {
      for (const auto& [cls, samples] : schedule.test_manifest[static_cast<std::size_t>(t)]) {
        row.test_samples += samples.size();
      }
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fscil
