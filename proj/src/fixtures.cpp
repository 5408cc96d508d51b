#include "moeforge/fixtures.hpp"

#include <cmath>

namespace moeforge::fixtures {
namespace {

AccuracyMatrix make_matrix(const std::vector<std::vector<double>>& rows) {
  AccuracyMatrix m;
  m.task_names = benchmark_task_names();
  m.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return m;
}

// Slack for values stored in binary: 59.5 - 59.4 is not exactly 0.1.
constexpr double kCompareSlack = 1e-9;

}  // namespace

const std::vector<std::string>& benchmark_task_names() {
  static const std::vector<std::string> names = {
      "Aircraft", "Caltech101", "CIFAR100", "DTD",  "EuroSAT", "Flowers",
      "Food",     "MNIST",      "OxfordPet", "Cars", "SUN397"};
  return names;
}

std::vector<PublishedMethod> published_methods() {
  PublishedMethod ma;
  ma.name = "MA";
  ma.raw = make_matrix({
      {51.3, 88.4, 68.2, 44.7, 55.3, 71.0, 88.5, 59.5, 89.0, 64.7, 65.2},
      {51.1, 94.6, 68.2, 35.2, 55.3, 69.7, 88.5, 59.5, 89.0, 64.7, 62.7},
      {49.3, 92.9, 87.5, 38.5, 55.3, 68.3, 88.5, 59.5, 89.0, 64.7, 63.6},
      {49.1, 93.3, 87.2, 79.9, 55.3, 63.2, 88.5, 59.5, 89.0, 64.7, 64.1},
      {49.1, 93.3, 87.3, 80.2, 95.5, 63.4, 88.5, 59.5, 89.0, 64.7, 64.1},
      {49.4, 94.1, 87.2, 79.6, 96.4, 97.5, 88.4, 59.5, 89.0, 64.7, 64.2},
      {49.5, 93.8, 87.3, 78.9, 95.6, 96.9, 89.1, 59.5, 89.0, 64.7, 64.3},
      {49.6, 93.5, 87.1, 77.5, 95.8, 95.8, 89.1, 98.4, 89.0, 64.7, 64.3},
      {49.1, 93.4, 86.8, 78.0, 95.0, 94.6, 89.0, 98.2, 89.2, 64.7, 64.2},
      {48.6, 93.0, 86.8, 77.8, 94.0, 94.2, 89.0, 98.3, 89.2, 85.9, 64.3},
      {49.0, 93.3, 86.6, 77.1, 93.1, 94.5, 89.1, 98.0, 89.2, 85.6, 79.9},
  });
  ma.transfer = {88.4, 68.2, 39.4, 55.3, 67.1, 88.5, 59.4, 89.0, 64.7, 64.1, 68.4};
  ma.average = {49.6, 93.1, 83.7, 67.9, 80.6, 82.6, 88.7, 73.6, 89.1, 68.5, 65.5, 76.6};
  ma.last = {49.0, 93.3, 86.6, 77.1, 93.1, 94.5, 89.1, 98.0, 89.2, 85.6, 79.9, 85.0};

  PublishedMethod ours;
  ours.name = "Ours";
  ours.raw = make_matrix({
      {52.3, 88.4, 68.2, 44.7, 55.3, 71.0, 88.5, 59.5, 89.0, 64.7, 65.2},
      {51.3, 94.0, 68.2, 35.7, 55.3, 68.4, 88.5, 59.5, 89.0, 64.7, 63.5},
      {51.0, 93.5, 87.3, 38.8, 55.3, 67.3, 88.5, 59.5, 89.0, 64.7, 63.9},
      {50.6, 94.1, 87.2, 80.0, 55.3, 67.3, 88.5, 59.5, 89.0, 64.7, 64.4},
      {51.0, 94.0, 87.3, 79.8, 94.8, 67.5, 88.5, 59.5, 89.0, 64.7, 64.5},
      {51.1, 94.3, 87.2, 80.1, 95.2, 97.7, 88.3, 59.5, 89.0, 64.7, 64.6},
      {50.7, 94.1, 87.1, 78.6, 94.3, 97.0, 89.1, 59.5, 89.0, 64.7, 64.8},
      {51.3, 93.4, 87.0, 78.5, 94.8, 96.3, 89.0, 98.7, 89.0, 64.7, 64.8},
      {51.2, 93.1, 86.8, 78.5, 94.9, 95.4, 89.0, 98.5, 89.2, 64.7, 64.8},
      {50.8, 93.5, 86.8, 78.1, 94.5, 94.4, 89.0, 98.6, 89.2, 85.5, 64.8},
      {50.7, 92.7, 86.5, 77.0, 92.6, 94.1, 89.0, 98.5, 89.2, 85.5, 79.8},
  });
  ours.transfer = {88.4, 68.2, 39.7, 55.3, 68.3, 88.5, 59.4, 89.0, 64.7, 64.5, 68.6};
  ours.average = {51.1, 93.2, 83.6, 68.2, 80.2, 83.3, 88.7, 73.7, 89.1, 68.5, 65.9, 76.9};
  ours.last = {50.7, 92.7, 86.5, 77.0, 92.6, 94.1, 89.0, 98.5, 89.2, 85.5, 79.8, 85.0};

  return {ma, ours};
}

FixtureReport verify_fixtures(const std::vector<PublishedMethod>& methods, double tolerance) {
  FixtureReport report;
  for (const auto& method : methods) {
    const MetricReport r = compute_metrics(method.raw);
    const auto& names = method.raw.task_names;
    auto check = [&](const char* metric, const MetricBlock& block,
                     const std::vector<double>& published, std::size_t first_task) {
      FixtureReport::Row row{method.name, metric, block.per_task};
      row.recomputed.push_back(block.mean);
      report.rows.push_back(row);
      std::size_t k = 0;
      for (std::size_t j = first_task; j <= block.per_task.size(); ++j, ++k) {
        const bool is_mean = j == block.per_task.size();
        const std::optional<double> got = is_mean ? block.mean : block.per_task[j];
        const std::string cell = is_mean ? "mean" : names[j];
        const double expected = k < published.size() ? published[k] : NAN;
        ++report.cells_checked;
        if (!got || !(std::abs(*got - expected) <= tolerance + kCompareSlack)) {
          report.mismatches.push_back({method.name, metric, cell, expected, got.value_or(NAN)});
        }
      }
    };
    check("transfer", r.transfer, method.transfer, 1);
    check("average", r.average, method.average, 0);
    check("last", r.last, method.last, 0);
  }
  return report;
}

}  // namespace moeforge::fixtures
