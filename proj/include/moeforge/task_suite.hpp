#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "moeforge/rng.hpp"
#include "moeforge/types.hpp"

namespace moeforge {

struct SuiteConfig {
  int tasks = 5;
  int input_dim = 32;
  int class_pool = 20;
  int classes_per_task = 5;
  double separation = 3.0;   ///< prototype norm
  double overlap = 0.4;      ///< fraction of each task's classes shared by every task
  double noise = 0.1;        ///< per-coordinate sigma in prototype space
  double shift_scale = 0.5;  ///< stddev of the per-task shift vector entries
  int train_per_class = 200;
  int test_per_class = 100;
  bool identical_transforms = false;
  std::uint64_t seed = 0;

  /// Classes shared by every pair of tasks: round-half-up(overlap * classes_per_task).
  int shared_classes() const;

  /// Throws ConfigError when the class pool cannot satisfy the overlap rule.
  void validate() const;
};

struct Dataset {
  Matrix features;          ///< N x input_dim
  std::vector<int> labels;  ///< global class ids

  Index size() const { return features.rows(); }
};

struct TaskSpec {
  TaskId id = 0;
  std::string name;
  std::vector<int> categories;  ///< global class ids, ascending
  Matrix transform;             ///< orthogonal, input_dim x input_dim
  Vector shift;
  double noise = 0.0;
  Dataset train;
  Dataset test;

  bool has_class(int c) const;
};

struct TaskSequence {
  SuiteConfig config;
  Matrix prototypes;  ///< class_pool x input_dim, rows of norm `separation`
  std::vector<TaskSpec> tasks;
};

struct LabeledSample {
  Vector features;
  int label = 0;
};

/// Haar-distributed orthogonal matrix from the QR of a Gaussian matrix.
Matrix random_orthogonal(Index n, Rng& rng);

/// Every task shares the same `shared_classes()` core classes and otherwise
/// draws fresh classes, so each pair of tasks overlaps in exactly that many.
/// Samples are transform * (prototype + noise) + shift.
TaskSequence generate_suite(const SuiteConfig& cfg);

/// Uniform draws with replacement from the train split.
std::vector<LabeledSample> sample_batch(const TaskSpec& task, int batch, Rng& rng);

nlohmann::ordered_json to_json(const SuiteConfig& cfg);
SuiteConfig suite_config_from_json(const nlohmann::json& j);

/// Directory export: manifest.json plus one little-endian tensor file per
/// array. Sample files carry the label in the last column.
void save_suite(const TaskSequence& suite, const std::filesystem::path& dir);
TaskSequence load_suite(const std::filesystem::path& dir);

}  // namespace moeforge
