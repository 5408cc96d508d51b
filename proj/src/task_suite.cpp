#include "moeforge/task_suite.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "moeforge/errors.hpp"
#include "moeforge/numerics.hpp"
#include "moeforge/tensor_io.hpp"

namespace moeforge {

namespace {

constexpr std::uint64_t kSuiteStream = 1;

std::string task_name(int t) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "task_%02d", t + 1);
  return buf;
}

Dataset draw_split(const TaskSpec& task, const Matrix& prototypes, int per_class, Rng& rng) {
  const Index d = prototypes.cols();
  Dataset ds;
  ds.features.resize(static_cast<Index>(task.categories.size()) * per_class, d);
  ds.labels.reserve(ds.features.rows());
  Index row = 0;
  for (int c : task.categories) {
    for (int s = 0; s < per_class; ++s) {
      Vector latent = prototypes.row(c).transpose();
      for (Index i = 0; i < d; ++i) latent(i) += task.noise * rng.normal();
      ds.features.row(row++) = (task.transform * latent + task.shift).transpose();
      ds.labels.push_back(c);
    }
  }
  return ds;
}

Matrix with_labels(const Dataset& ds) {
  Matrix m(ds.features.rows(), ds.features.cols() + 1);
  m.leftCols(ds.features.cols()) = ds.features;
  for (Index i = 0; i < ds.features.rows(); ++i) m(i, ds.features.cols()) = ds.labels[i];
  return m;
}

Dataset split_labels(const Matrix& m) {
  Dataset ds;
  ds.features = m.leftCols(m.cols() - 1);
  ds.labels.resize(m.rows());
  for (Index i = 0; i < m.rows(); ++i) ds.labels[i] = static_cast<int>(m(i, m.cols() - 1));
  return ds;
}

}  // namespace

int SuiteConfig::shared_classes() const {
  return static_cast<int>(std::floor(overlap * classes_per_task + 0.5));
}

void SuiteConfig::validate() const {
  if (tasks < 1) throw ConfigError("suite: tasks must be >= 1");
  if (input_dim < 2) throw ConfigError("suite: input_dim must be >= 2");
  if (classes_per_task < 1) throw ConfigError("suite: classes_per_task must be >= 1");
  if (classes_per_task > class_pool) {
    throw ConfigError("suite: classes_per_task exceeds class_pool");
  }
  if (!(overlap >= 0.0 && overlap <= 1.0)) throw ConfigError("suite: overlap must be in [0, 1]");
  if (noise < 0.0) throw ConfigError("suite: noise must be >= 0");
  if (train_per_class < 1 || test_per_class < 1) {
    throw ConfigError("suite: per-class sample counts must be >= 1");
  }
  const int shared = shared_classes();
  const long needed = shared + static_cast<long>(tasks) * (classes_per_task - shared);
  if (needed > class_pool) {
    throw ConfigError("suite: overlap " + std::to_string(overlap) + " with " +
                      std::to_string(tasks) + " tasks of " + std::to_string(classes_per_task) +
                      " classes needs " + std::to_string(needed) + " classes but the pool has " +
                      std::to_string(class_pool));
  }
}

bool TaskSpec::has_class(int c) const {
  return std::binary_search(categories.begin(), categories.end(), c);
}

Matrix random_orthogonal(Index n, Rng& rng) {
  Matrix g(n, n);
  fill_normal(g, rng, 1.0);
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ();
  const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    if (r(j, j) < 0) q.col(j) *= -1.0;
  }
  return q;
}

TaskSequence generate_suite(const SuiteConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed, kSuiteStream);
  TaskSequence suite;
  suite.config = cfg;

  suite.prototypes.resize(cfg.class_pool, cfg.input_dim);
  for (int c = 0; c < cfg.class_pool; ++c) {
    Vector p(cfg.input_dim);
    fill_normal(p, rng, 1.0);
    suite.prototypes.row(c) = (p.normalized() * cfg.separation).transpose();
  }

  // Random permutation of the pool: the first `shared` ids are common to all
  // tasks, the rest are handed out task by task.
  std::vector<int> pool(cfg.class_pool);
  for (int i = 0; i < cfg.class_pool; ++i) pool[i] = i;
  for (int i = cfg.class_pool - 1; i > 0; --i) {
    std::swap(pool[i], pool[rng.uniform_index(static_cast<std::uint64_t>(i) + 1)]);
  }
  const int shared = cfg.shared_classes();
  const int fresh = cfg.classes_per_task - shared;

  Matrix first_transform;
  Vector first_shift;
  for (int t = 0; t < cfg.tasks; ++t) {
    TaskSpec task;
    task.id = t;
    task.name = task_name(t);
    task.noise = cfg.noise;
    task.categories.assign(pool.begin(), pool.begin() + shared);
    const auto start = pool.begin() + shared + static_cast<std::ptrdiff_t>(t) * fresh;
    task.categories.insert(task.categories.end(), start, start + fresh);
    std::sort(task.categories.begin(), task.categories.end());

    task.transform = random_orthogonal(cfg.input_dim, rng);
    task.shift.resize(cfg.input_dim);
    fill_normal(task.shift, rng, cfg.shift_scale);
    if (cfg.identical_transforms) {
      if (t == 0) {
        first_transform = task.transform;
        first_shift = task.shift;
      } else {
        task.transform = first_transform;
        task.shift = first_shift;
      }
    }
    task.train = draw_split(task, suite.prototypes, cfg.train_per_class, rng);
    task.test = draw_split(task, suite.prototypes, cfg.test_per_class, rng);
    suite.tasks.push_back(std::move(task));
  }
  return suite;
}

std::vector<LabeledSample> sample_batch(const TaskSpec& task, int batch, Rng& rng) {
  if (batch < 1) throw ArgumentError("sample_batch: batch must be >= 1");
  const Index n = task.train.size();
  if (n == 0) throw StateError("sample_batch: task " + task.name + " has an empty train split");
  std::vector<LabeledSample> out;
  out.reserve(batch);
  for (int b = 0; b < batch; ++b) {
    const auto i = static_cast<Index>(rng.uniform_index(static_cast<std::uint64_t>(n)));
    out.push_back({task.train.features.row(i).transpose(), task.train.labels[i]});
  }
  return out;
}

nlohmann::ordered_json to_json(const SuiteConfig& c) {
  return {{"tasks", c.tasks},
          {"input_dim", c.input_dim},
          {"class_pool", c.class_pool},
          {"classes_per_task", c.classes_per_task},
          {"separation", c.separation},
          {"overlap", c.overlap},
          {"noise", c.noise},
          {"shift_scale", c.shift_scale},
          {"train_per_class", c.train_per_class},
          {"test_per_class", c.test_per_class},
          {"identical_transforms", c.identical_transforms},
          {"seed", c.seed}};
}

SuiteConfig suite_config_from_json(const nlohmann::json& c) {
  SuiteConfig cfg;
  cfg.tasks = c.at("tasks");
  cfg.input_dim = c.at("input_dim");
  cfg.class_pool = c.at("class_pool");
  cfg.classes_per_task = c.at("classes_per_task");
  cfg.separation = c.at("separation");
  cfg.overlap = c.at("overlap");
  cfg.noise = c.at("noise");
  cfg.shift_scale = c.at("shift_scale");
  cfg.train_per_class = c.at("train_per_class");
  cfg.test_per_class = c.at("test_per_class");
  cfg.identical_transforms = c.at("identical_transforms");
  cfg.seed = c.at("seed");
  return cfg;
}

void save_suite(const TaskSequence& suite, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto& c = suite.config;
  nlohmann::ordered_json manifest;
  manifest["format"] = "moeforge-suite";
  manifest["version"] = 1;
  manifest["config"] = to_json(c);
  manifest["prototypes"] = "prototypes.bin";
  write_tensor_file(dir / "prototypes.bin", suite.prototypes);
  auto& tasks = manifest["tasks"] = nlohmann::ordered_json::array();
  for (const auto& t : suite.tasks) {
    const std::string base = t.name;
    write_tensor_file(dir / (base + "_transform.bin"), t.transform);
    write_tensor_file(dir / (base + "_shift.bin"), Matrix(t.shift));
    write_tensor_file(dir / (base + "_train.bin"), with_labels(t.train));
    write_tensor_file(dir / (base + "_test.bin"), with_labels(t.test));
    tasks.push_back({{"id", t.id},
                     {"name", t.name},
                     {"categories", t.categories},
                     {"noise", t.noise},
                     {"transform", base + "_transform.bin"},
                     {"shift", base + "_shift.bin"},
                     {"train", base + "_train.bin"},
                     {"test", base + "_test.bin"}});
  }
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

TaskSequence load_suite(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw IoError((dir / "manifest.json").string() + ": " + e.what());
  }
  try {
    if (manifest.at("format") != "moeforge-suite" || manifest.at("version") != 1) {
      throw IoError((dir / "manifest.json").string() + ": unsupported suite format");
    }
    TaskSequence suite;
    suite.config = suite_config_from_json(manifest.at("config"));
    suite.prototypes = read_tensor_file(dir / manifest.at("prototypes").get<std::string>());
    for (const auto& jt : manifest.at("tasks")) {
      TaskSpec t;
      t.id = jt.at("id");
      t.name = jt.at("name");
      t.categories = jt.at("categories").get<std::vector<int>>();
      t.noise = jt.at("noise");
      t.transform = read_tensor_file(dir / jt.at("transform").get<std::string>());
      t.shift = read_tensor_file(dir / jt.at("shift").get<std::string>()).col(0);
      t.train = split_labels(read_tensor_file(dir / jt.at("train").get<std::string>()));
      t.test = split_labels(read_tensor_file(dir / jt.at("test").get<std::string>()));
      suite.tasks.push_back(std::move(t));
    }
    return suite;
  } catch (const nlohmann::json::exception& e) {
    throw IoError((dir / "manifest.json").string() + ": " + e.what());
  }
}

}  // namespace moeforge
