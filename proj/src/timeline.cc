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

#include "dtsim/timeline.h"

#include <algorithm>
#include <tuple>

#include <fmt/format.h>
#include <json.hpp>

namespace dtsim {

double Timeline::step_time_us() const {
  double end = 0.0;
  for (const TimelineEvent& e : events) end = std::max(end, e.end_us);
  return end;
}

void SortEvents(std::vector<TimelineEvent>& events) {
  std::sort(events.begin(), events.end(), [](const TimelineEvent& a, const TimelineEvent& b) {
    return std::tie(a.rank, a.lane, a.start_us, a.op_id) <
           std::tie(b.rank, b.lane, b.start_us, b.op_id);
  });
}

namespace {

// Event indices of one rank, split by lane, each ordered by start time.
struct RankLanes {
  std::vector<std::size_t> lanes[kNumLanes];
};

std::map<RankId, RankLanes> GroupByRank(const Timeline& timeline) {
  std::map<RankId, RankLanes> out;
  for (std::size_t i = 0; i < timeline.events.size(); ++i) {
    const TimelineEvent& e = timeline.events[i];
    out[e.rank].lanes[static_cast<int>(e.lane)].push_back(i);
  }
  for (auto& [rank, rl] : out) {
    for (auto& lane : rl.lanes) {
      std::sort(lane.begin(), lane.end(), [&](std::size_t a, std::size_t b) {
        const TimelineEvent& ea = timeline.events[a];
        const TimelineEvent& eb = timeline.events[b];
        return std::tie(ea.start_us, ea.op_id) < std::tie(eb.start_us, eb.op_id);
      });
    }
  }
  return out;
}

}  // namespace

std::vector<OverlapRecord> DetectOverlaps(const Timeline& timeline) {
  std::vector<OverlapRecord> out;
  for (const auto& [rank, rl] : GroupByRank(timeline)) {
    const auto& compute = rl.lanes[static_cast<int>(Lane::kCompute)];
    const auto& comm = rl.lanes[static_cast<int>(Lane::kComm)];
    std::size_t first = 0;  // first comm event that may still intersect
    for (std::size_t ci : compute) {
      const TimelineEvent& c = timeline.events[ci];
      // Comm events do not intersect one another, so their ends are ordered
      // like their starts.
      while (first < comm.size() && timeline.events[comm[first]].end_us <= c.start_us) ++first;
      const std::size_t begin = out.size();
      for (std::size_t j = first; j < comm.size(); ++j) {
        const TimelineEvent& m = timeline.events[comm[j]];
        if (m.start_us >= c.end_us) break;
        const double overlap = std::min(c.end_us, m.end_us) - std::max(c.start_us, m.start_us);
        if (overlap > 0.0) out.push_back({rank, ci, comm[j], overlap, false});
      }
      if (out.size() > begin) {
        std::size_t best = begin;
        for (std::size_t k = begin + 1; k < out.size(); ++k) {
          if (out[k].overlap_us > out[best].overlap_us) best = k;
        }
        out[best].longest = true;
      }
    }
  }
  return out;
}

std::map<RankId, RankStats> ComputeRankStats(const Timeline& timeline, const WorkloadSet& ws) {
  std::map<RankId, RankStats> out;
  const double step = timeline.step_time_us();
  for (const auto& [rank, rw] : ws.ranks) out[rank].idle_us = step;

  for (const OverlapRecord& r : DetectOverlaps(timeline)) out[r.rank].overlap_us += r.overlap_us;

  for (const auto& [rank, rl] : GroupByRank(timeline)) {
    RankStats& s = out[rank];
    std::vector<std::pair<double, double>> intervals;
    for (int lane = 0; lane < kNumLanes; ++lane) {
      for (std::size_t i : rl.lanes[lane]) {
        const TimelineEvent& e = timeline.events[i];
        if (e.lane == Lane::kCompute) s.compute_busy_us += e.duration_us();
        if (e.lane == Lane::kComm) s.comm_busy_us += e.duration_us();
        intervals.emplace_back(e.start_us, e.end_us);
      }
    }
    std::sort(intervals.begin(), intervals.end());
    double busy = 0.0;
    double cur_start = 0.0;
    double cur_end = -1.0;
    for (const auto& [a, b] : intervals) {
      if (a > cur_end) {
        if (cur_end > cur_start) busy += cur_end - cur_start;
        cur_start = a;
        cur_end = b;
      } else {
        cur_end = std::max(cur_end, b);
      }
    }
    if (cur_end > cur_start) busy += cur_end - cur_start;
    s.idle_us = std::max(0.0, step - busy);
  }
  return out;
}

namespace {

std::string EventName(const Operation& op) {
  struct Visitor {
    std::string operator()(const ComputeOp& c) const { return c.kernel_name; }
    std::string operator()(const CollectiveOp& c) const {
      return fmt::format("{}({})", ToString(c.collective), c.group_id);
    }
    std::string operator()(const P2POp& p) const {
      return fmt::format("{}({})", ToString(p.direction), p.peer_rank);
    }
    std::string operator()(const MemcpyOp& m) const {
      return fmt::format("memcpy_{}", ToString(m.direction));
    }
  };
  return std::visit(Visitor{}, op.kind);
}

}  // namespace

std::string ToChromeTrace(const Timeline& timeline, const WorkloadSet& ws) {
  nlohmann::json out = nlohmann::json::array();
  for (const TimelineEvent& e : timeline.events) {
    std::string name = fmt::format("op{}", e.op_id);
    if (auto it = ws.ranks.find(e.rank); it != ws.ranks.end() && e.op_index < it->second.ops.size()) {
      name = EventName(it->second.ops[e.op_index]);
    }
    out.push_back({{"name", std::move(name)},
                   {"cat", ToString(e.lane)},
                   {"ph", "X"},
                   {"pid", e.rank},
                   {"tid", static_cast<int>(e.lane)},
                   {"ts", e.start_us},
                   {"dur", e.duration_us()},
                   {"args", {{"op_id", e.op_id}}}});
  }
  return out.dump();
}

}  // namespace dtsim
