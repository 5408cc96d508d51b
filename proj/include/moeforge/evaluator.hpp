#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moeforge/merge.hpp"
#include "moeforge/model.hpp"
#include "moeforge/task_inference.hpp"
#include "moeforge/task_suite.hpp"

namespace moeforge {

/// Rows are checkpoints (after task i), columns are evaluated tasks. A
/// complete run is square; an interrupted one has fewer rows than columns.
struct AccuracyMatrix {
  Matrix values;
  std::vector<std::string> task_names;

  Index checkpoints() const { return values.rows(); }
  Index tasks() const { return values.cols(); }
  void validate() const;
};

struct MetricBlock {
  std::vector<std::optional<double>> per_task;
  std::optional<double> mean;  ///< over defined entries only
};

struct MetricReport {
  MetricBlock transfer;
  MetricBlock average;
  MetricBlock last;
};

/// Cumulative frozen-expert count per (task, block).
struct FreezeHeatmap {
  std::vector<std::vector<int>> counts;  ///< [task][block]

  bool monotone() const;
};

enum class Routing { Oracle, Inferred };

/// Percentage of test samples whose best class among the task's categories
/// matches the label. Oracle routing uses the task's own router when it
/// exists; inferred routing asks the autoencoders per sample. Both fall back
/// to the adapter-free path otherwise.
double accuracy(const Model& model, const TaskSpec& task, const Dataset& split, Routing routing,
                std::span<const TaskAutoencoder> autoencoders);

/// transfer_j = mean of rows i < j in column j. Undefined for j = 0.
MetricBlock metric_transfer(const AccuracyMatrix& m);
/// average_j = mean of every available row in column j.
MetricBlock metric_average(const AccuracyMatrix& m);
/// The final available row.
MetricBlock metric_last(const AccuracyMatrix& m);
MetricReport compute_metrics(const AccuracyMatrix& m);

/// Round half-up to one decimal for display.
double round1(double v);

struct RoutingStats {
  Matrix correct_fraction;  ///< [checkpoint][task]: samples routed to their own task
  Matrix ood_fraction;      ///< [checkpoint][task]: samples sent to the fallback
};

struct RunResult {
  AccuracyMatrix accuracy;         ///< inferred routing
  AccuracyMatrix oracle_accuracy;  ///< oracle routing
  RoutingStats routing;
  FreezeHeatmap heatmap;
  std::vector<MergeEvent> merges;
  std::vector<std::string> log_lines;
  std::vector<double> final_train_accuracy;  ///< oracle routing, per completed task
};

/// Writes accuracy_matrix.csv, accuracy_matrix_oracle.csv, metrics.csv,
/// metrics_oracle.csv, freeze_heatmap.csv and merge_events.log.
void export_report(const RunResult& run, const std::filesystem::path& dir);

std::string accuracy_csv(const AccuracyMatrix& m);
std::string metrics_csv(const AccuracyMatrix& m, const MetricReport& r);
std::string heatmap_csv(const FreezeHeatmap& h);
std::string merge_log_text(std::span<const MergeEvent> events);
std::string merge_event_line(const MergeEvent& ev);

/// Full-precision shortest round-trip rendering.
std::string format_real(double v);

}  // namespace moeforge
