#pragma once

#include <string>
#include <vector>

#include "moeforge/evaluator.hpp"

namespace moeforge::fixtures {

/// Published per-checkpoint accuracies (11 x 11) and the matching summary
/// rows for one method on the eleven-dataset benchmark.
struct PublishedMethod {
  std::string name;
  AccuracyMatrix raw;
  std::vector<double> transfer;  ///< 10 per-task values (first task blank) + mean
  std::vector<double> average;   ///< 11 per-task values + mean
  std::vector<double> last;      ///< 11 per-task values + mean
};

/// Baseline adapter MoE and the merging variant, in that order.
std::vector<PublishedMethod> published_methods();

const std::vector<std::string>& benchmark_task_names();

struct Mismatch {
  std::string method;
  std::string metric;
  std::string cell;  ///< task name or "mean"
  double expected = 0.0;
  double got = 0.0;
};

struct FixtureReport {
  struct Row {
    std::string method;
    std::string metric;
    std::vector<std::optional<double>> recomputed;  ///< per task then mean
  };
  std::vector<Row> rows;
  std::vector<Mismatch> mismatches;
  int cells_checked = 0;

  bool passed() const { return mismatches.empty(); }
};

/// Recomputes transfer/average/last from each raw matrix and compares every
/// cell, means included, against the published summary within `tolerance`.
FixtureReport verify_fixtures(const std::vector<PublishedMethod>& methods,
                              double tolerance = 0.1);

inline FixtureReport verify_published_fixtures() { return verify_fixtures(published_methods()); }

}  // namespace moeforge::fixtures
