/*
 * Copyright 2026 The dtsim Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DTSIM_TIMELINE_H_
#define DTSIM_TIMELINE_H_

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "dtsim/workload.h"

namespace dtsim {

struct TimelineEvent {
  RankId rank = 0;
  Lane lane = Lane::kCompute;
  OpId op_id = 0;
  std::size_t op_index = 0;  // position in RankWorkload::ops
  double start_us = 0.0;
  double end_us = 0.0;

  double duration_us() const { return end_us - start_us; }
  friend bool operator==(const TimelineEvent&, const TimelineEvent&) = default;
};

// Composed schedule. Events are sorted by (rank, lane, start_us, op_id); within
// one (rank, lane) they never intersect.
struct Timeline {
  std::vector<TimelineEvent> events;

  double step_time_us() const;
  friend bool operator==(const Timeline&, const Timeline&) = default;
};

void SortEvents(std::vector<TimelineEvent>& events);

struct OverlapRecord {
  RankId rank = 0;
  std::size_t compute_event = 0;  // indices into Timeline::events
  std::size_t comm_event = 0;
  double overlap_us = 0.0;
  // Set on the longest-overlapping comm event of each compute event (first
  // one wins a tie).
  bool longest = false;
};

// Every positive-length intersection between a compute-lane event and a
// comm-lane event of the same rank, ordered by (rank, compute start, comm
// start).
std::vector<OverlapRecord> DetectOverlaps(const Timeline& timeline);

struct RankStats {
  double compute_busy_us = 0.0;
  double comm_busy_us = 0.0;
  double overlap_us = 0.0;  // time with both compute and comm active
  double idle_us = 0.0;     // step time with no lane active
};

std::map<RankId, RankStats> ComputeRankStats(const Timeline& timeline, const WorkloadSet& ws);

// Chrome Trace Event Format: a JSON array of complete ("ph":"X") events with
// pid = rank and tid = lane (0 compute, 1 comm, 2 memcpy).
std::string ToChromeTrace(const Timeline& timeline, const WorkloadSet& ws);

}  // namespace dtsim

#endif  // DTSIM_TIMELINE_H_
