#include "moeforge/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "moeforge/errors.hpp"
#include "moeforge/log.hpp"

namespace moeforge {

TrainConfig TrainConfig::reference_scale() {
  TrainConfig cfg;
  cfg.num_experts = 55;
  cfg.merge_cycle = 100;
  cfg.batch = 64;
  cfg.iterations = 1000;
  return cfg;
}

void TrainConfig::validate() const {
  if (num_experts < 1) throw ConfigError("train: experts must be >= 1");
  if (top_k < 1 || top_k > num_experts) {
    throw ConfigError("train: topk must be in [1, experts], got " + std::to_string(top_k));
  }
  if (merge_cycle < 1) throw ConfigError("train: merge cycle must be >= 1");
  if (batch < 1) throw ConfigError("train: batch must be >= 1");
  if (iterations < 0) throw ConfigError("train: iterations must be >= 0");
  if (!(lr > 0)) throw ConfigError("train: lr must be positive");
  if (weight_decay < 0) throw ConfigError("train: weight_decay must be >= 0");
  if (!(smoothing >= 0 && smoothing < 1)) throw ConfigError("train: smoothing must be in [0, 1)");
  if (!(temperature > 0)) throw ConfigError("train: temperature must be positive");
  if (dim < 2 || hidden < 1 || depth < 0) throw ConfigError("train: invalid model dimensions");
  if (rank < 1 || rank >= dim) throw ConfigError("train: rank must satisfy 1 <= rank < dim");
}

ModelShape TrainConfig::model_shape(Index input_dim, int class_pool) const {
  ModelShape s;
  s.input_dim = input_dim;
  s.dim = dim;
  s.hidden = hidden;
  s.rank = rank;
  s.depth = depth;
  s.num_experts = num_experts;
  s.top_k = top_k;
  s.class_pool = class_pool;
  return s;
}

MergeConfig TrainConfig::merge_config() const { return {merge_cycle, top_k, merge_enabled}; }

AdamWConfig TrainConfig::optimizer() const {
  AdamWConfig o;
  o.lr = lr;
  o.weight_decay = weight_decay;
  return o;
}

RunLog::RunLog(const std::filesystem::path& path, bool append) {
  file_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!file_) throw IoError(path.string() + ": cannot open run log");
}

void RunLog::event(const std::string& line) {
  lines_.push_back(line);
  if (file_.is_open()) {
    file_ << line << '\n';
    file_.flush();
  }
  log::debug(line);
}

Learner make_learner(const TrainConfig& cfg, Index input_dim, int class_pool) {
  cfg.validate();
  Learner l;
  l.config = cfg;
  l.init_rng = Rng(cfg.seed, streams::kModelInit);
  l.batch_rng = Rng(cfg.seed, streams::kBatching);
  l.ae_rng = Rng(cfg.seed, streams::kAutoencoders);
  l.model = make_model(cfg.model_shape(input_dim, class_pool), cfg.temperature, l.init_rng);
  l.moments = ModelMoments(l.model);
  return l;
}

namespace {

bool backbone_trainable(const Learner& l, TaskId task) {
  return l.config.train_backbone_first_task && task == 0;
}

void apply_updates(Learner& l, const ModelGrads& grads, TaskId task,
                   const std::vector<std::vector<bool>>& touched) {
  const AdamWConfig opt = l.config.optimizer();
  Model& m = l.model;
  ModelMoments& mo = l.moments;
  if (backbone_trainable(l, task)) {
    adamw_step(m.w_in, grads.w_in, mo.w_in, opt);
    adamw_step(m.b_in, grads.b_in, mo.b_in, opt);
  }
  for (std::size_t b = 0; b < m.blocks.size(); ++b) {
    MoEBlock& blk = m.blocks[b];
    BlockMoments& bm = mo.blocks[b];
    const BlockGrads& g = grads.blocks[b];
    if (backbone_trainable(l, task)) {
      adamw_step(blk.ln.gamma, g.gamma, bm.gamma, opt);
      adamw_step(blk.ln.beta, g.beta, bm.beta, opt);
      adamw_step(blk.mlp.w1, g.w1, bm.w1, opt);
      adamw_step(blk.mlp.b1, g.b1, bm.b1, opt);
      adamw_step(blk.mlp.w2, g.w2, bm.w2, opt);
      adamw_step(blk.mlp.b2, g.b2, bm.b2, opt);
    }
    Router& r = blk.routers.at(task);
    RouterMoments& rm = bm.routers.at(task);
    adamw_step(r.weights, g.router_w, rm.weights, opt);
    adamw_step(r.bias, g.router_b, rm.bias, opt);
    // Experts nobody selected in this batch have no gradient and are skipped.
    for (std::size_t e = 0; e < blk.experts.size(); ++e) {
      Expert& ex = blk.experts[e];
      if (ex.frozen || !touched[b][e]) continue;
      adamw_step(ex.down, g.experts[e].down, bm.experts[e].down, opt);
      adamw_step(ex.up, g.experts[e].up, bm.experts[e].up, opt);
    }
  }
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

}  // namespace

double train_step(Learner& l, const TaskSpec& task, std::span<const LabeledSample> batch,
                  bool counting) {
  Model& m = l.model;
  const TaskId t = task.id;
  const auto bsz = static_cast<Index>(batch.size());
  std::vector<ModelCache> caches(batch.size());
  Matrix features(bsz, m.dim());
  std::vector<int> labels(batch.size());
  std::vector<std::vector<bool>> touched(m.blocks.size());
  for (std::size_t b = 0; b < m.blocks.size(); ++b) touched[b].assign(m.blocks[b].experts.size(), false);

  for (Index i = 0; i < bsz; ++i) {
    features.row(i) = encode(m, batch[i].features, t, counting, &caches[i]).transpose();
    labels[i] = batch[i].label;
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
      for (int s : caches[i].blocks[b].gate.selected) touched[b][s] = true;
    }
  }
  const LossResult loss = similarity_loss(features, labels, task.categories, m.class_embeddings,
                                          m.temperature, l.config.smoothing);
  ModelGrads grads = zero_model_grads(m, t);
  for (Index i = 0; i < bsz; ++i) {
    encode_backward(m, caches[i], loss.dfeatures.row(i).transpose(), grads);
  }
  apply_updates(l, grads, t, touched);
  return loss.loss;
}

TaskLog train_task(Learner& l, const TaskSpec& task, RunLog* log) {
  const TaskId t = task.id;
  if (t != l.tasks_done) {
    throw StateError("train_task: expected task " + std::to_string(l.tasks_done) + ", got " +
                     std::to_string(t));
  }
  auto emit = [&](const std::string& line) {
    if (log) log->event(line);
  };
  TaskLog out;
  out.task = t;

  add_task_router(l.model, t, l.init_rng);
  for (std::size_t b = 0; b < l.model.blocks.size(); ++b) {
    l.moments.blocks[b].routers.emplace(t, RouterMoments(l.model.blocks[b].routers.at(t)));
  }
  for (auto& blk : l.model.blocks) reset_counts(blk);
  emit("reset_counts\t" + std::to_string(t));

  const MergeConfig mcfg = l.config.merge_config();
  out.losses.reserve(l.config.iterations);
  for (int i = 1; i <= l.config.iterations; ++i) {
    const auto batch = sample_batch(task, l.config.batch, l.batch_rng);
    out.losses.push_back(train_step(l, task, batch));
    if (i % 50 == 0 || i == l.config.iterations) {
      emit("loss\t" + std::to_string(t) + "\t" + std::to_string(i) + "\t" +
           fmt("%.6f", out.losses.back()));
    }
#ifndef MOEFORGE_EXCISE_MERGE
    for (const auto& ev : maybe_merge(i, mcfg, t, l.model.blocks, l.moments.blocks)) {
      out.merges.push_back(ev);
      emit(merge_event_line(ev));
    }
#endif
  }

  for (std::size_t b = 0; b < l.model.blocks.size(); ++b) {
    MoEBlock& blk = l.model.blocks[b];
    out.final_counts.push_back(blk.counter.counts);
    // With no recorded usage there is nothing to protect.
    std::vector<int> frozen;
    if (blk.counter.total() > 0) frozen = freeze_topk(blk, mcfg.k_freeze);
    emit("freeze\t" + std::to_string(t) + "\t" + std::to_string(b) + "\t" + join_ints(frozen));
    out.frozen_now.push_back(std::move(frozen));
  }

  l.autoencoders.push_back(train_autoencoder(t, task.train.features, l.config.autoencoder, l.ae_rng));
  emit("autoencoder\t" + std::to_string(t) + "\t" + fmt("%.6g", l.autoencoders.back().threshold));
  ++l.tasks_done;
  return out;
}

CheckpointEval evaluate_checkpoint(const Learner& l, const TaskSequence& suite) {
  CheckpointEval ev;
  const Model& m = l.model;
  for (const auto& task : suite.tasks) {
    ev.accuracy.push_back(accuracy(m, task, task.test, Routing::Inferred, l.autoencoders));
    ev.oracle_accuracy.push_back(accuracy(m, task, task.test, Routing::Oracle, l.autoencoders));
    Index correct = 0, ood = 0;
    for (Index i = 0; i < task.test.size(); ++i) {
      const auto d = infer_task(task.test.features.row(i).transpose(), l.autoencoders);
      if (d.ood()) {
        ++ood;
      } else if (*d.chosen == task.id) {
        ++correct;
      }
    }
    const auto n = static_cast<double>(task.test.size());
    ev.routed_correct.push_back(static_cast<double>(correct) / n);
    ev.routed_ood.push_back(static_cast<double>(ood) / n);
  }
  if (l.tasks_done > 0) {
    const TaskSpec& last = suite.tasks.at(l.tasks_done - 1);
    ev.train_accuracy = accuracy(m, last, last.train, Routing::Oracle, l.autoencoders);
  }
  return ev;
}

std::filesystem::path checkpoint_dir(const std::filesystem::path& run_dir, int task_index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "task_%02d", task_index + 1);
  return run_dir / "checkpoints" / buf;
}

namespace {

std::vector<std::string> task_names(const TaskSequence& suite) {
  std::vector<std::string> names;
  for (const auto& t : suite.tasks) names.push_back(t.name);
  return names;
}

void append_row(AccuracyMatrix& m, const std::vector<double>& row) {
  const Index r = m.values.rows();
  m.values.conservativeResize(r + 1, static_cast<Index>(row.size()));
  for (std::size_t j = 0; j < row.size(); ++j) m.values(r, static_cast<Index>(j)) = row[j];
}

void append_eval(RunResult& res, const CheckpointEval& ev, const Model& model) {
  append_row(res.accuracy, ev.accuracy);
  append_row(res.oracle_accuracy, ev.oracle_accuracy);
  const Index r = res.routing.correct_fraction.rows();
  const auto cols = static_cast<Index>(ev.routed_correct.size());
  res.routing.correct_fraction.conservativeResize(r + 1, cols);
  res.routing.ood_fraction.conservativeResize(r + 1, cols);
  for (Index j = 0; j < cols; ++j) {
    res.routing.correct_fraction(r, j) = ev.routed_correct[j];
    res.routing.ood_fraction(r, j) = ev.routed_ood[j];
  }
  std::vector<int> frozen;
  for (const auto& blk : model.blocks) {
    frozen.push_back(static_cast<int>(
        std::count_if(blk.experts.begin(), blk.experts.end(), [](const Expert& e) { return e.frozen; })));
  }
  res.heatmap.counts.push_back(std::move(frozen));
  res.final_train_accuracy.push_back(ev.train_accuracy);
}

RunResult empty_result(const TaskSequence& suite) {
  RunResult res;
  const auto names = task_names(suite);
  const auto cols = static_cast<Index>(names.size());
  res.accuracy.task_names = names;
  res.oracle_accuracy.task_names = names;
  res.accuracy.values.resize(0, cols);
  res.oracle_accuracy.values.resize(0, cols);
  res.routing.correct_fraction.resize(0, cols);
  res.routing.ood_fraction.resize(0, cols);
  return res;
}

RunResult continue_run(Learner& l, const TaskSequence& suite, const RunOptions& options,
                       bool resumed) {
  if (l.model.input_dim() != suite.config.input_dim) {
    throw ConfigError("run: model input dim does not match the suite");
  }
  RunResult res = empty_result(suite);
  std::optional<RunLog> file_log;
  if (options.out_dir) {
    std::filesystem::create_directories(*options.out_dir / "checkpoints");
    file_log.emplace(*options.out_dir / "run.log", resumed);
  }
  RunLog memory_log;
  RunLog& log = file_log ? *file_log : memory_log;
  if (!resumed && l.config.train_backbone_first_task) {
    log.event("note\tbackbone trains during the first task only and is frozen afterwards");
  }
  const int total = static_cast<int>(suite.tasks.size());
  const int stop = options.stop_after >= 0 ? std::min(total, options.stop_after) : total;
  for (int t = l.tasks_done; t < stop; ++t) {
    const TaskSpec& task = suite.tasks[t];
    log.event("task_start\t" + std::to_string(t) + "\t" + task.name);
    log::info("training " + task.name);
    TaskLog tl = train_task(l, task, &log);
    res.merges.insert(res.merges.end(), tl.merges.begin(), tl.merges.end());

    Checkpoint ckpt;
    ckpt.learner = l;
    ckpt.suite = suite.config;
    ckpt.task_names = task_names(suite);
    ckpt.eval = evaluate_checkpoint(l, suite);
    append_eval(res, ckpt.eval, l.model);
    if (options.out_dir) {
      const auto dir = checkpoint_dir(*options.out_dir, t);
      save_checkpoint(ckpt, dir);
      log.event("checkpoint\t" + std::to_string(t) + "\t" +
                std::filesystem::relative(dir, *options.out_dir).generic_string());
    }
    std::ostringstream os;
    os << "task_end\t" << t << "\ttrain_accuracy=" << fmt("%.4f", ckpt.eval.train_accuracy);
    log.event(os.str());
  }
  res.log_lines = log.lines();
  return res;
}

}  // namespace

RunResult run_sequence(const TaskSequence& suite, const TrainConfig& cfg, const RunOptions& options) {
  Learner l = make_learner(cfg, suite.config.input_dim, suite.config.class_pool);
  return continue_run(l, suite, options, false);
}

RunResult resume_sequence(const TaskSequence& suite, Checkpoint ckpt, const RunOptions& options) {
  return continue_run(ckpt.learner, suite, options, true);
}

RunResult load_run(const std::filesystem::path& run_dir) {
  if (!std::filesystem::is_directory(run_dir)) {
    throw IoError(run_dir.string() + ": not a directory");
  }
  RunResult res;
  bool any = false;
  for (int t = 0;; ++t) {
    const auto dir = checkpoint_dir(run_dir, t);
    if (!std::filesystem::exists(dir / "manifest.json")) break;
    Checkpoint ckpt = load_checkpoint(dir);
    if (!any) {
      const auto cols = static_cast<Index>(ckpt.task_names.size());
      res.accuracy.task_names = ckpt.task_names;
      res.oracle_accuracy.task_names = ckpt.task_names;
      res.accuracy.values.resize(0, cols);
      res.oracle_accuracy.values.resize(0, cols);
      res.routing.correct_fraction.resize(0, cols);
      res.routing.ood_fraction.resize(0, cols);
      any = true;
    }
    append_eval(res, ckpt.eval, ckpt.learner.model);
  }
  if (!any) throw IoError(run_dir.string() + ": no checkpoints found");
  const auto log_path = run_dir / "run.log";
  if (std::filesystem::exists(log_path)) {
    std::ifstream in(log_path);
    std::string line;
    while (std::getline(in, line)) {
      res.log_lines.push_back(line);
      if (line.rfind("merge\t", 0) != 0) continue;
      std::istringstream ls(line.substr(6));
      MergeEvent ev;
      std::string applied;
      ls >> ev.task >> ev.iteration >> ev.block >> ev.t1 >> ev.t2 >> ev.b1 >> applied;
      if (!ls) throw IoError(log_path.string() + ": malformed merge line: " + line);
      ev.applied = applied == "applied";
      // Events after the last completed checkpoint belong to an unfinished task.
      if (ev.task < res.accuracy.checkpoints()) res.merges.push_back(ev);
    }
  }
  return res;
}

}  // namespace moeforge
