#include "moeforge/evaluator.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

#include "moeforge/errors.hpp"
#include "moeforge/tensor_io.hpp"

namespace moeforge {

void AccuracyMatrix::validate() const {
  if (values.rows() > values.cols()) {
    throw DimensionError("accuracy matrix has more checkpoints than tasks");
  }
  if (static_cast<Index>(task_names.size()) != values.cols()) {
    throw DimensionError("accuracy matrix: task name count does not match columns");
  }
  for (Index i = 0; i < values.size(); ++i) {
    const double v = values.data()[i];
    if (!(v >= 0.0 && v <= 100.0)) throw DataError("accuracy matrix: entry outside [0, 100]");
  }
}

bool FreezeHeatmap::monotone() const {
  for (std::size_t t = 1; t < counts.size(); ++t) {
    if (counts[t].size() != counts[t - 1].size()) return false;
    for (std::size_t b = 0; b < counts[t].size(); ++b) {
      if (counts[t][b] < counts[t - 1][b]) return false;
    }
  }
  return true;
}

double accuracy(const Model& model, const TaskSpec& task, const Dataset& split, Routing routing,
                std::span<const TaskAutoencoder> autoencoders) {
  if (split.size() == 0) throw StateError("accuracy: empty split for " + task.name);
  const bool own_router = model.has_router(task.id);
  Index correct = 0;
  for (Index i = 0; i < split.size(); ++i) {
    const Vector x = split.features.row(i).transpose();
    TaskId route = kAdapterFree;
    if (routing == Routing::Oracle) {
      if (own_router) route = task.id;
    } else if (!autoencoders.empty()) {
      const auto decision = infer_task(x, autoencoders);
      if (decision.chosen) route = *decision.chosen;
    }
    const Vector f = encode(model, x, route);
    if (predict_class(f, task.categories, model.class_embeddings) == split.labels[i]) ++correct;
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(split.size());
}

namespace {

std::optional<double> mean_of(const std::vector<std::optional<double>>& v) {
  double sum = 0.0;
  int n = 0;
  for (const auto& x : v) {
    if (x) {
      sum += *x;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return sum / n;
}

}  // namespace

MetricBlock metric_transfer(const AccuracyMatrix& m) {
  MetricBlock out;
  out.per_task.resize(m.tasks());
  for (Index j = 1; j < m.tasks(); ++j) {
    const Index rows = std::min(j, m.checkpoints());
    if (rows == 0) continue;
    double sum = 0.0;
    for (Index i = 0; i < rows; ++i) sum += m.values(i, j);
    out.per_task[j] = sum / static_cast<double>(rows);
  }
  out.mean = mean_of(out.per_task);
  return out;
}

MetricBlock metric_average(const AccuracyMatrix& m) {
  MetricBlock out;
  out.per_task.resize(m.tasks());
  if (m.checkpoints() == 0) return out;
  for (Index j = 0; j < m.tasks(); ++j) {
    double sum = 0.0;
    for (Index i = 0; i < m.checkpoints(); ++i) sum += m.values(i, j);
    out.per_task[j] = sum / static_cast<double>(m.checkpoints());
  }
  out.mean = mean_of(out.per_task);
  return out;
}

MetricBlock metric_last(const AccuracyMatrix& m) {
  MetricBlock out;
  out.per_task.resize(m.tasks());
  if (m.checkpoints() == 0) return out;
  for (Index j = 0; j < m.tasks(); ++j) out.per_task[j] = m.values(m.checkpoints() - 1, j);
  out.mean = mean_of(out.per_task);
  return out;
}

MetricReport compute_metrics(const AccuracyMatrix& m) {
  return {metric_transfer(m), metric_average(m), metric_last(m)};
}

double round1(double v) { return std::floor(v * 10.0 + 0.5) / 10.0; }

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string accuracy_csv(const AccuracyMatrix& m) {
  std::ostringstream os;
  os << "checkpoint";
  for (const auto& n : m.task_names) os << ',' << n;
  os << '\n';
  for (Index i = 0; i < m.checkpoints(); ++i) {
    os << m.task_names[i];
    for (Index j = 0; j < m.tasks(); ++j) os << ',' << format_real(m.values(i, j));
    os << '\n';
  }
  return os.str();
}

std::string metrics_csv(const AccuracyMatrix& m, const MetricReport& r) {
  std::ostringstream os;
  os << "metric";
  for (const auto& n : m.task_names) os << ',' << n;
  os << ",mean\n";
  auto row = [&](const char* name, const MetricBlock& b) {
    os << name;
    for (const auto& v : b.per_task) {
      os << ',';
      if (v) os << format_real(*v);
    }
    os << ',';
    if (b.mean) os << format_real(*b.mean);
    os << '\n';
  };
  row("transfer", r.transfer);
  row("average", r.average);
  row("last", r.last);
  return os.str();
}

std::string heatmap_csv(const FreezeHeatmap& h) {
  std::ostringstream os;
  os << "task";
  const std::size_t blocks = h.counts.empty() ? 0 : h.counts.front().size();
  for (std::size_t b = 0; b < blocks; ++b) os << ",block_" << b;
  os << '\n';
  for (std::size_t t = 0; t < h.counts.size(); ++t) {
    os << (t + 1);
    for (int c : h.counts[t]) os << ',' << c;
    os << '\n';
  }
  return os.str();
}

std::string merge_event_line(const MergeEvent& ev) {
  std::ostringstream os;
  os << "merge\t" << ev.task << '\t' << ev.iteration << '\t' << ev.block << '\t' << ev.t1 << '\t'
     << ev.t2 << '\t' << ev.b1 << '\t' << (ev.applied ? "applied" : "skipped");
  return os.str();
}

std::string merge_log_text(std::span<const MergeEvent> events) {
  std::string out;
  for (const auto& ev : events) out += merge_event_line(ev) + "\n";
  return out;
}

void export_report(const RunResult& run, const std::filesystem::path& dir) {
  try {
    std::filesystem::create_directories(dir);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError(dir.string() + ": " + e.what());
  }
  write_text_file(dir / "accuracy_matrix.csv", accuracy_csv(run.accuracy));
  write_text_file(dir / "accuracy_matrix_oracle.csv", accuracy_csv(run.oracle_accuracy));
  write_text_file(dir / "metrics.csv", metrics_csv(run.accuracy, compute_metrics(run.accuracy)));
  write_text_file(dir / "metrics_oracle.csv",
                  metrics_csv(run.oracle_accuracy, compute_metrics(run.oracle_accuracy)));
  write_text_file(dir / "freeze_heatmap.csv", heatmap_csv(run.heatmap));
  write_text_file(dir / "merge_events.log", merge_log_text(run.merges));
}

}  // namespace moeforge
