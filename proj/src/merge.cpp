#include "moeforge/merge.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace moeforge {
namespace {

std::vector<int> order_by_count_desc(std::span<const std::int64_t> counts) {
  std::vector<int> order(counts.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return counts[a] > counts[b]; });
  return order;
}

}  // namespace

void reset_counts(MoEBlock& blk) {
  std::fill(blk.counter.counts.begin(), blk.counter.counts.end(), 0);
}

std::optional<MergeTriplet> select_merge_triplet(std::span<const std::int64_t> counts,
                                                 const std::vector<bool>& frozen) {
  if (counts.size() != frozen.size() || counts.size() < 3) return std::nullopt;
  const auto order = order_by_count_desc(counts);
  MergeTriplet t;
  t.t1 = order[0];
  t.t2 = order[1];
  for (int i = 0; i < static_cast<int>(counts.size()); ++i) {
    if (frozen[i] || i == t.t1 || i == t.t2) continue;
    if (t.b1 < 0 || counts[i] < counts[t.b1]) t.b1 = i;
  }
  if (t.b1 < 0) return std::nullopt;
  return t;
}

MergeEvent merge_step(MoEBlock& blk, const MergeTriplet& triplet,
                      ExpertMoments* target_moments) {
  const int n = blk.num_experts();
  auto in_range = [n](int i) { return i >= 0 && i < n; };
  if (!in_range(triplet.t1) || !in_range(triplet.t2) || !in_range(triplet.b1)) {
    throw ArgumentError("merge_step: triplet index out of range");
  }
  if (triplet.t1 == triplet.t2 || triplet.b1 == triplet.t1 || triplet.b1 == triplet.t2) {
    throw PolicyError("merge_step: sources and target must be distinct");
  }
  Expert& target = blk.experts[triplet.b1];
  if (target.frozen) {
    throw PolicyError("merge_step: expert " + std::to_string(triplet.b1) + " is frozen");
  }
  const Expert& a = blk.experts[triplet.t1];
  const Expert& b = blk.experts[triplet.t2];
  target.down = (a.down + b.down) / 2.0;
  target.up = (a.up + b.up) / 2.0;
  if (target_moments) {
    target_moments->down.reset(target.down);
    target_moments->up.reset(target.up);
  }
  MergeEvent ev;
  ev.t1 = triplet.t1;
  ev.t2 = triplet.t2;
  ev.b1 = triplet.b1;
  ev.applied = true;
  return ev;
}

std::vector<MergeEvent> maybe_merge(int iteration, const MergeConfig& cfg, TaskId task,
                                    std::span<MoEBlock> blocks,
                                    std::span<BlockMoments> moments) {
  std::vector<MergeEvent> events;
  if (!cfg.enabled || cfg.cycle < 1 || iteration % cfg.cycle != 0) return events;
  if (!moments.empty() && moments.size() != blocks.size()) {
    throw ArgumentError("maybe_merge: moments must be empty or parallel to blocks");
  }
  for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
    MoEBlock& blk = blocks[bi];
    const auto triplet = select_merge_triplet(blk.counter.counts, blk.frozen_mask());
    MergeEvent ev;
    if (triplet) {
      ExpertMoments* m = moments.empty() ? nullptr : &moments[bi].experts[triplet->b1];
      ev = merge_step(blk, *triplet, m);
    } else {
      const auto order = order_by_count_desc(blk.counter.counts);
      if (order.size() > 0) ev.t1 = order[0];
      if (order.size() > 1) ev.t2 = order[1];
    }
    ev.task = task;
    ev.iteration = iteration;
    ev.block = static_cast<int>(bi);
    events.push_back(ev);
  }
  return events;
}

std::vector<int> freeze_topk(MoEBlock& blk, int k) {
  if (k < 1) throw ArgumentError("freeze_topk: k must be >= 1");
  const auto order = order_by_count_desc(blk.counter.counts);
  const int m = std::min<int>(k, static_cast<int>(order.size()));
  std::vector<int> chosen(order.begin(), order.begin() + m);
  for (int i : chosen) blk.experts[i].frozen = true;
  return chosen;
}

}  // namespace moeforge
