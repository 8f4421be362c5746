#pragma once

#include <cstdint>

#include "fscil/core/schedule.hpp"
#include "fscil/data/dataset.hpp"

namespace fscil::data {

struct ScheduleRequest {
  int base_count = 0;
  int sessions = 0;
  int way = 0;
  int shot = 0;
  std::uint64_t seed = 0;
};

// Base classes are the lowest source class indices; the remaining classes are
// shuffled by the seed and dealt out way-at-a-time. The base session keeps all
// training samples, each novel class keeps a seeded draw of exactly `shot`.
SessionSchedule build_schedule(const DatasetAdapter& adapter, const ScheduleRequest& request);

}  // namespace fscil::data
