#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "moeforge/evaluator.hpp"
#include "moeforge/merge.hpp"
#include "moeforge/model.hpp"
#include "moeforge/task_inference.hpp"
#include "moeforge/task_suite.hpp"

namespace moeforge {

/// Fixed stream ids so every consumer draws from its own sequence and
/// toggling one feature never perturbs another's randomness.
namespace streams {
inline constexpr std::uint64_t kSuite = 1;
inline constexpr std::uint64_t kModelInit = 2;
inline constexpr std::uint64_t kBatching = 3;
inline constexpr std::uint64_t kAutoencoders = 4;
}  // namespace streams

struct TrainConfig {
  int num_experts = 8;
  int top_k = 2;
  int merge_cycle = 25;
  int batch = 16;
  int iterations = 400;
  double lr = 3e-3;
  double weight_decay = 0.01;
  double smoothing = 0.1;
  double temperature = 0.07;
  bool merge_enabled = true;
  std::uint64_t seed = 0;

  int dim = 32;
  int hidden = 64;
  int rank = 4;
  int depth = 3;
  /// The backbone (input projection, layer norms, MLPs) trains during the
  /// first task only.
  bool train_backbone_first_task = true;

  AutoencoderConfig autoencoder;

  /// N_E = 55, M = 100, B = 64, 1000 iterations per task.
  static TrainConfig reference_scale();

  void validate() const;
  ModelShape model_shape(Index input_dim, int class_pool) const;
  MergeConfig merge_config() const;
  AdamWConfig optimizer() const;
};

/// Line-oriented, tab-separated event log. Lines are kept in memory and,
/// when a file is attached, flushed as they arrive.
class RunLog {
 public:
  RunLog() = default;
  explicit RunLog(const std::filesystem::path& path, bool append = false);

  void event(const std::string& line);
  const std::vector<std::string>& lines() const { return lines_; }

 private:
  std::vector<std::string> lines_;
  std::ofstream file_;
};

/// Everything that evolves during a run.
struct Learner {
  TrainConfig config;
  Model model;
  ModelMoments moments;
  std::vector<TaskAutoencoder> autoencoders;
  Rng init_rng{0, streams::kModelInit};
  Rng batch_rng{0, streams::kBatching};
  Rng ae_rng{0, streams::kAutoencoders};
  int tasks_done = 0;
};

Learner make_learner(const TrainConfig& cfg, Index input_dim, int class_pool);

struct TaskLog {
  TaskId task = 0;
  std::vector<double> losses;  ///< one per iteration
  std::vector<MergeEvent> merges;
  std::vector<std::vector<int>> frozen_now;  ///< per block, this task's top-k
  std::vector<std::vector<std::int64_t>> final_counts;  ///< per block
};

/// One task of the continual loop: new router, count reset, iterations of
/// {batch, counted forward, loss, backward, AdamW, periodic merge}, then
/// per-block freezing and the task's autoencoder.
TaskLog train_task(Learner& learner, const TaskSpec& task, RunLog* log = nullptr);

/// One optimization iteration on a fixed batch; returns the batch loss.
/// Exposed for tests.
double train_step(Learner& learner, const TaskSpec& task, std::span<const LabeledSample> batch,
                  bool counting = true);

/// Per-checkpoint evaluation stored alongside the checkpoint.
struct CheckpointEval {
  std::vector<double> accuracy;         ///< inferred routing, one per task
  std::vector<double> oracle_accuracy;  ///< oracle routing, one per task
  std::vector<double> routed_correct;   ///< fraction routed to own task
  std::vector<double> routed_ood;       ///< fraction sent to the fallback
  double train_accuracy = 0.0;          ///< oracle routing, just-trained task
};

CheckpointEval evaluate_checkpoint(const Learner& learner, const TaskSequence& suite);

inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  int format_version = kCheckpointFormatVersion;
  Learner learner;
  SuiteConfig suite;
  std::vector<std::string> task_names;
  CheckpointEval eval;
};

/// Directory with manifest.json (version, config echo, scalar state, tensor
/// index with shapes/offsets/CRC32) and tensors.bin (little-endian f64
/// concatenated in index order).
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

std::filesystem::path checkpoint_dir(const std::filesystem::path& run_dir, int task_index);

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  ///< checkpoints + run.log
  int stop_after = -1;                           ///< train only this many tasks when >= 0
};

/// Full continual sequence from a fresh model: train each task, checkpoint,
/// and evaluate that checkpoint on every task.
RunResult run_sequence(const TaskSequence& suite, const TrainConfig& cfg,
                       const RunOptions& options = {});

/// Continues from a loaded checkpoint through the remaining tasks.
RunResult resume_sequence(const TaskSequence& suite, Checkpoint ckpt,
                          const RunOptions& options = {});

/// Rebuilds a RunResult from the checkpoints and run.log in a run directory.
/// Only completed checkpoints contribute rows.
RunResult load_run(const std::filesystem::path& run_dir);

}  // namespace moeforge
