#pragma once

#include <optional>
#include <span>
#include <vector>

#include "moeforge/moe.hpp"

namespace moeforge {

struct MergeConfig {
  int cycle = 100;     ///< merge every `cycle` batch iterations
  int k_freeze = 2;    ///< experts frozen per block at the end of each task
  bool enabled = true;
};

struct MergeTriplet {
  int t1 = -1;  ///< most selected
  int t2 = -1;  ///< second most selected
  int b1 = -1;  ///< overwrite target: least selected non-frozen, not a source
};

struct MergeEvent {
  TaskId task = 0;
  int iteration = 0;
  int block = 0;
  int t1 = -1;
  int t2 = -1;
  int b1 = -1;
  bool applied = false;
};

void reset_counts(MoEBlock& blk);

/// Sources are the two largest counts over all experts, frozen ones included.
/// The target is the smallest count among non-frozen experts other than the
/// sources. Ties go to the lower index. nullopt when no valid target exists.
std::optional<MergeTriplet> select_merge_triplet(std::span<const std::int64_t> counts,
                                                 const std::vector<bool>& frozen);

/// expert[b1] = (expert[t1] + expert[t2]) / 2 for both factors. The target's
/// optimizer moments are reset when given.
MergeEvent merge_step(MoEBlock& blk, const MergeTriplet& triplet,
                      ExpertMoments* target_moments = nullptr);

/// Fires on iterations that are multiples of the cycle (iterations count from
/// 1). `moments` is either empty or parallel to `blocks`.
std::vector<MergeEvent> maybe_merge(int iteration, const MergeConfig& cfg, TaskId task,
                                    std::span<MoEBlock> blocks,
                                    std::span<BlockMoments> moments = {});

/// Marks the k most selected experts of this task as frozen (cumulative).
/// Returns their indices in selection-count order.
std::vector<int> freeze_topk(MoEBlock& blk, int k);

}  // namespace moeforge
