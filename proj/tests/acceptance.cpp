// Acceptance suite: one PASS/FAIL line per criterion, with the pinned
// tolerances written next to each check.
//
//   acceptance --cli <moeforge> --baseline-cli <moeforge_baseline> --work <dir>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "moeforge/fixtures.hpp"
#include "moeforge/merge.hpp"
#include "moeforge/model.hpp"
#include "moeforge/tensor_io.hpp"
#include "moeforge/trainer.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace moeforge;
using moeforge::testing::bytes_equal;
using moeforge::testing::random_matrix;
using moeforge::testing::random_vector;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Paths {
  std::string cli;
  std::string baseline_cli;
  fs::path work;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

int run_cli(const std::string& exe, const std::string& args, const fs::path& log) {
  const std::string cmd = "\"" + exe + "\" " + args + " > \"" + log.string() + "\" 2>&1";
  const int rc = std::system(cmd.c_str());
  return rc == 0 ? 0 : 1;
}

// Every regular file under `a` must exist under `b` with identical bytes.
bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  std::size_t n = 0;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    if (!fs::exists(b / rel) || read_file_bytes(a / rel) != read_file_bytes(b / rel)) {
      why = rel.generic_string() + " differs";
      return false;
    }
    ++n;
  }
  why = std::to_string(n) + " files identical";
  return n > 0;
}

// --- shared desk run -------------------------------------------------------

struct DeskRun {
  fs::path dir;
  double seconds = 0.0;
  bool ok = false;
};

DeskRun& desk_run(const Paths& p) {
  static DeskRun run;
  static bool done = false;
  if (done) return run;
  done = true;
  run.dir = p.work / "desk_a";
  fs::remove_all(run.dir);
  const auto t0 = Clock::now();
  run.ok = run_cli(p.cli, "run --seed 0 --out \"" + run.dir.string() + "\"",
                   p.work / "desk_a.log") == 0;
  run.seconds = seconds_since(t0);
  return run;
}

std::vector<Checkpoint> load_checkpoints(const fs::path& dir) {
  std::vector<Checkpoint> out;
  for (int t = 0; fs::exists(checkpoint_dir(dir, t) / "manifest.json"); ++t) {
    out.push_back(load_checkpoint(checkpoint_dir(dir, t)));
  }
  return out;
}

// --- criteria --------------------------------------------------------------

Outcome fixture_reproduction() {
  const auto report = fixtures::verify_published_fixtures();
  const auto methods = fixtures::published_methods();
  const MetricReport ma = compute_metrics(methods[0].raw);
  const MetricReport ours = compute_metrics(methods[1].raw);
  // Headline cells, each within 0.1 of the published value.
  const bool headline = std::abs(*ours.transfer.mean - 68.6) <= 0.1 &&
                        std::abs(*ma.average.mean - 76.6) <= 0.1 &&
                        std::abs(*ours.last.mean - 85.0) <= 0.1;
  Outcome o;
  o.pass = report.passed() && headline && report.cells_checked == 70;
  o.detail = std::to_string(report.cells_checked) + " cells, " +
             std::to_string(report.mismatches.size()) + " mismatches; Ours transfer " +
             fmt("%.2f", *ours.transfer.mean) + ", MA average " + fmt("%.2f", *ma.average.mean) +
             ", Ours last " + fmt("%.2f", *ours.last.mean);
  return o;
}

Outcome gating_properties() {
  Rng rng(2, 100);
  int bad = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 2 + static_cast<int>(rng.uniform_index(63));
    const int k = 1 + static_cast<int>(rng.uniform_index(n));
    const Vector logits = random_vector(n, rng, 3.0);
    const GateResult g = topk_gate(logits, k);
    const int positive = static_cast<int>((g.weights.array() > 0).count());
    const double sum = g.weights.sum();
    Index wmax, lmax;
    g.weights.maxCoeff(&wmax);
    logits.maxCoeff(&lmax);
    const double shift = 100.0 * (rng.uniform() - 0.5);
    const GateResult s = topk_gate((logits.array() + shift).matrix(), k);
    const bool ok = positive == k && std::abs(sum - 1.0) <= 1e-9 && wmax == lmax &&
                    s.selected == g.selected &&
                    (s.weights - g.weights).cwiseAbs().maxCoeff() <= 1e-9;
    bad += !ok;
  }
  return {bad == 0, "1000 logit vectors, " + std::to_string(bad) + " violations"};
}

Outcome merge_exactness(const Paths& p) {
  Rng rng(3, 100);
  int merges = 0, bad = 0;
  while (merges < 200) {
    const int n = 3 + static_cast<int>(rng.uniform_index(8));
    MoEBlock blk = make_block({6, 8, 2, n, 1}, rng);
    for (auto& e : blk.experts) {
      e.down = random_matrix(6, 2, rng);
      e.up = random_matrix(2, 6, rng);
      e.frozen = rng.uniform() < 0.3;
    }
    for (auto& c : blk.counter.counts) c = static_cast<std::int64_t>(rng.uniform_index(100));
    const auto t = select_merge_triplet(blk.counter.counts, blk.frozen_mask());
    if (!t) continue;
    ++merges;
    const MoEBlock before = blk;
    merge_step(blk, *t);
    bool ok = !before.experts[t->b1].frozen && blk.counter.counts == before.counter.counts;
    const auto& a = before.experts[t->t1];
    const auto& b = before.experts[t->t2];
    for (Index i = 0; i < a.down.size(); ++i) {
      ok &= blk.experts[t->b1].down.data()[i] == (a.down.data()[i] + b.down.data()[i]) / 2.0;
    }
    for (Index i = 0; i < a.up.size(); ++i) {
      ok &= blk.experts[t->b1].up.data()[i] == (a.up.data()[i] + b.up.data()[i]) / 2.0;
    }
    for (int e = 0; e < n; ++e) {
      if (e == t->b1) continue;
      ok &= bytes_equal(blk.experts[e].down, before.experts[e].down) &&
            bytes_equal(blk.experts[e].up, before.experts[e].up);
    }
    bad += !ok;
  }

  // Full-run event log: a target is never frozen at the time of its merge.
  // Experts frozen before task t are exactly those frozen in checkpoint t-1.
  const DeskRun& run = desk_run(p);
  if (!run.ok) return {false, "desk run failed"};
  const auto ckpts = load_checkpoints(run.dir);
  const RunResult res = load_run(run.dir);
  int applied = 0, frozen_hits = 0;
  for (const auto& ev : res.merges) {
    if (!ev.applied) continue;
    ++applied;
    if (ev.task > 0) {
      frozen_hits += ckpts[ev.task - 1].learner.model.blocks[ev.block].experts[ev.b1].frozen;
    }
  }
  Outcome o;
  o.pass = bad == 0 && frozen_hits == 0 && applied > 0;
  o.detail = std::to_string(merges) + " random merges, " + std::to_string(bad) +
             " inexact; run log " + std::to_string(applied) + " applied merges, " +
             std::to_string(frozen_hits) + " frozen targets";
  return o;
}

Outcome freezing(const Paths& p) {
  const DeskRun& run = desk_run(p);
  if (!run.ok) return {false, "desk run failed"};
  const auto ckpts = load_checkpoints(run.dir);
  if (ckpts.size() != 5) return {false, "expected 5 checkpoints"};
  int checked = 0, changed = 0;
  for (std::size_t t = 0; t < ckpts.size(); ++t) {
    const Model& at = ckpts[t].learner.model;
    for (std::size_t b = 0; b < at.blocks.size(); ++b) {
      for (std::size_t e = 0; e < at.blocks[b].experts.size(); ++e) {
        const Expert& ex = at.blocks[b].experts[e];
        if (!ex.frozen) continue;
        for (std::size_t later = t; later < ckpts.size(); ++later) {
          const Expert& y = ckpts[later].learner.model.blocks[b].experts[e];
          ++checked;
          changed += !(y.frozen && bytes_equal(ex.down, y.down) && bytes_equal(ex.up, y.up));
        }
      }
    }
  }
  const RunResult res = load_run(run.dir);
  std::string counts;
  for (const auto& row : res.heatmap.counts) {
    if (!counts.empty()) counts += " ";
    for (std::size_t b = 0; b < row.size(); ++b) counts += (b ? "," : "") + std::to_string(row[b]);
  }
  Outcome o;
  o.pass = changed == 0 && checked > 0 && res.heatmap.monotone();
  o.detail = std::to_string(checked) + " frozen-expert comparisons, " + std::to_string(changed) +
             " changed; frozen per block by task [" + counts + "]";
  return o;
}

Outcome gradient_oracle() {
  constexpr double h = 1e-5;
  constexpr double tol = 1e-4;
  double worst = 0.0;
  int instances = 0;
  for (std::uint64_t seed = 1; instances < 20; ++seed) {
    Rng rng(seed, 200);
    MoEBlock blk = make_block({8, 16, 3, 4, 2}, rng);
    blk.ln.gamma += random_vector(8, rng, 0.3);
    blk.ln.beta = random_vector(8, rng, 0.3);
    blk.mlp.b1 = random_vector(16, rng, 0.3);
    blk.mlp.b2 = random_vector(8, rng, 0.3);
    for (auto& e : blk.experts) e.up = random_matrix(3, 8, rng, 0.5);
    Router r = make_router(0, 8, 4, rng);
    r.weights *= 3.0;
    r.bias = random_vector(4, rng, 0.5);
    blk.routers.emplace(0, r);
    const Vector x = random_vector(8, rng);
    // Skip draws whose top-k boundary is closer than the probe step.
    Vector logits = r.weights.transpose() * x + r.bias;
    std::sort(logits.data(), logits.data() + 4, std::greater<>());
    if (logits(1) - logits(2) < 1e-3) continue;
    ++instances;

    const Vector c = random_vector(8, rng);
    BlockCache cache;
    block_forward(blk, x, 0, false, &cache);
    BlockGrads g = zero_block_grads(blk, 0);
    const Vector dx = block_backward(blk, cache, c, g);
    auto group = [&](auto member, const auto& analytic) {
      using Plain = std::decay_t<decltype(analytic)>;
      MoEBlock probe = blk;
      auto f = [&](const Plain& v) {
        member(probe) = v;
        return c.dot(block_forward(static_cast<const MoEBlock&>(probe), x, 0).out);
      };
      worst = std::max(worst, group_relative_error(analytic, finite_diff_grad(f, Plain(member(probe)), h)));
    };
    group([](MoEBlock& b) -> Vector& { return b.ln.gamma; }, g.gamma);
    group([](MoEBlock& b) -> Vector& { return b.ln.beta; }, g.beta);
    group([](MoEBlock& b) -> Matrix& { return b.mlp.w1; }, g.w1);
    group([](MoEBlock& b) -> Vector& { return b.mlp.b1; }, g.b1);
    group([](MoEBlock& b) -> Matrix& { return b.mlp.w2; }, g.w2);
    group([](MoEBlock& b) -> Vector& { return b.mlp.b2; }, g.b2);
    group([](MoEBlock& b) -> Matrix& { return b.routers[0].weights; }, g.router_w);
    group([](MoEBlock& b) -> Vector& { return b.routers[0].bias; }, g.router_b);
    for (int e = 0; e < 4; ++e) {
      group([e](MoEBlock& b) -> Matrix& { return b.experts[e].down; }, g.experts[e].down);
      group([e](MoEBlock& b) -> Matrix& { return b.experts[e].up; }, g.experts[e].up);
    }
    auto fx = [&](const Vector& in) {
      return c.dot(block_forward(static_cast<const MoEBlock&>(blk), in, 0).out);
    };
    worst = std::max(worst, group_relative_error(dx, finite_diff_grad(fx, x, h)));

    // Similarity loss on a 3-class toy batch.
    Matrix emb = random_matrix(5, 8, rng);
    for (Index i = 0; i < 5; ++i) emb.row(i).normalize();
    const std::vector<int> cats{0, 2, 4};
    const std::vector<int> labels{2, 0, 4, 2};
    Matrix feats = random_matrix(4, 8, rng);
    for (Index i = 0; i < 4; ++i) feats.row(i).normalize();
    const LossResult lr = similarity_loss(feats, labels, cats, emb, 0.07, 0.1);
    auto fl = [&](const Matrix& m) { return similarity_loss(m, labels, cats, emb, 0.07, 0.1).loss; };
    worst = std::max(worst, group_relative_error(lr.dfeatures, finite_diff_grad(fl, feats, h)));
  }
  return {worst < tol, std::to_string(instances) + " seeds, max relative error " +
                           fmt("%.2e", worst) + " (limit 1e-4)"};
}

Outcome determinism(const Paths& p) {
  const DeskRun& a = desk_run(p);
  if (!a.ok) return {false, "desk run failed"};
  const fs::path b = p.work / "desk_b";
  fs::remove_all(b);
  if (run_cli(p.cli, "run --seed 0 --out \"" + b.string() + "\"", p.work / "desk_b.log") != 0) {
    return {false, "second run failed"};
  }
  bool ok = true;
  std::string why = "accuracy CSVs identical";
  for (const char* f : {"accuracy_matrix.csv", "accuracy_matrix_oracle.csv"}) {
    if (read_file_bytes(a.dir / f) != read_file_bytes(b / f)) {
      ok = false;
      why = std::string(f) + " differs";
    }
  }
  std::string tree;
  ok &= same_tree(a.dir / "checkpoints", b / "checkpoints", tree);
  return {ok, why + "; checkpoints: " + tree};
}

double nearest_mean_accuracy(const TaskSpec& t) {
  std::map<int, std::pair<Vector, int>> sums;
  for (Index i = 0; i < t.train.size(); ++i) {
    auto& [s, n] = sums[t.train.labels[i]];
    if (n == 0) s = Vector::Zero(t.train.features.cols());
    s += t.train.features.row(i).transpose();
    ++n;
  }
  int correct = 0;
  for (Index i = 0; i < t.test.size(); ++i) {
    int best = -1;
    double best_d = 0;
    for (const auto& [label, acc] : sums) {
      const double d = (t.test.features.row(i).transpose() - acc.first / acc.second).squaredNorm();
      if (best < 0 || d < best_d) {
        best = label;
        best_d = d;
      }
    }
    correct += best == t.test.labels[i];
  }
  return 100.0 * correct / static_cast<double>(t.test.size());
}

Outcome desk_learning(const Paths& p) {
  const DeskRun& run = desk_run(p);
  if (!run.ok) return {false, "desk run failed"};
  const TaskSequence suite = load_suite(run.dir / "suite");
  double oracle_min = 100.0;
  for (const auto& t : suite.tasks) oracle_min = std::min(oracle_min, nearest_mean_accuracy(t));
  if (oracle_min < 99.0) {
    return {false, "suite not separable: nearest-prototype oracle " + fmt("%.1f", oracle_min)};
  }
  const RunResult res = load_run(run.dir);
  const double final_train = res.final_train_accuracy.back();
  const double last = *compute_metrics(res.oracle_accuracy).last.mean;
  Outcome o;
  o.pass = final_train >= 95.0 && last >= 80.0 && run.seconds < 180.0;
  o.detail = "nearest-prototype oracle >= " + fmt("%.1f", oracle_min) + "%, final-task train " +
             fmt("%.1f", final_train) + "% (>= 95), oracle Last mean " + fmt("%.2f", last) +
             " (>= 80), run " + fmt("%.1f", run.seconds) + "s (< 180)";
  return o;
}

Outcome ablation(const Paths& p, std::vector<std::string>& table) {
  const fs::path cfg = p.work / "overlap.ini";
  write_text_file(cfg, "[suite]\noverlap = 0.5\n");
  const auto t0 = Clock::now();
  std::map<bool, std::vector<std::array<double, 3>>> means;
  for (int seed : {1, 2, 3}) {
    for (bool merge : {true, false}) {
      const fs::path dir = p.work / ("ablation_s" + std::to_string(seed) + (merge ? "_on" : "_off"));
      fs::remove_all(dir);
      const std::string args = "run --config \"" + cfg.string() + "\" --seed " +
                               std::to_string(seed) + " --merge-enabled " +
                               (merge ? "true" : "false") + " --out \"" + dir.string() + "\"";
      if (run_cli(p.cli, args, dir.string() + ".log") != 0) return {false, "run failed: " + args};
      const MetricReport r = compute_metrics(load_run(dir).accuracy);
      means[merge].push_back({*r.transfer.mean, *r.average.mean, *r.last.mean});
    }
  }
  auto avg = [&](bool merge, int k) {
    double s = 0;
    for (const auto& m : means[merge]) s += m[k];
    return s / static_cast<double>(means[merge].size());
  };
  table.push_back("           transfer  average     last");
  for (bool merge : {true, false}) {
    for (std::size_t i = 0; i < means[merge].size(); ++i) {
      std::ostringstream os;
      os << (merge ? "  merge on  s" : "  merge off s") << (i + 1) << fmt(" %8.2f", means[merge][i][0])
         << fmt(" %8.2f", means[merge][i][1]) << fmt(" %8.2f", means[merge][i][2]);
      table.push_back(os.str());
    }
  }
  for (bool merge : {true, false}) {
    table.push_back(std::string(merge ? "  merge on  mean" : "  merge off mean") +
                    fmt("%7.2f", avg(merge, 0)) + fmt(" %8.2f", avg(merge, 1)) +
                    fmt(" %8.2f", avg(merge, 2)));
  }
  const double secs = seconds_since(t0);
  const double on = avg(true, 0), off = avg(false, 0);
  Outcome o;
  o.pass = on >= off - 0.5 && secs < 1200.0;
  o.detail = "Transfer mean " + fmt("%.2f", on) + " (merge) vs " + fmt("%.2f", off) +
             " (no merge), gate >= no-merge - 0.5; Average " + fmt("%+.2f", avg(true, 1) - avg(false, 1)) +
             ", Last " + fmt("%+.2f", avg(true, 2) - avg(false, 2)) + " (reported only); " +
             fmt("%.0f", secs) + "s (< 1200)";
  return o;
}

// Fraction of each task's test samples whose smallest rank-a residual over the
// tasks' principal subspaces (uncentered, as the linear autoencoder sees them)
// is its own task's.
double subspace_oracle(const TaskSequence& suite, Index a) {
  std::vector<Matrix> bases;
  for (const auto& t : suite.tasks) {
    const Matrix gram = t.train.features.transpose() * t.train.features;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram);
    bases.push_back(es.eigenvectors().rightCols(a));
  }
  Index correct = 0, total = 0;
  for (const auto& t : suite.tasks) {
    for (Index i = 0; i < t.test.size(); ++i) {
      const Vector x = t.test.features.row(i).transpose();
      std::size_t best = 0;
      double best_r = 0;
      for (std::size_t k = 0; k < bases.size(); ++k) {
        const double r = (x - bases[k] * (bases[k].transpose() * x)).squaredNorm();
        if (k == 0 || r < best_r) {
          best = k;
          best_r = r;
        }
      }
      correct += static_cast<TaskId>(best) == t.id;
      ++total;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

Outcome task_inference(const Paths& p) {
  const DeskRun& run = desk_run(p);
  if (!run.ok) return {false, "desk run failed"};
  const TaskSequence suite = load_suite(run.dir / "suite");
  const auto ckpts = load_checkpoints(run.dir);
  const Index a = ckpts.front().learner.config.autoencoder.bottleneck;
  const double oracle = subspace_oracle(suite, a);
  if (oracle < 99.0) return {false, "subspace oracle only separates " + fmt("%.1f", oracle) + "%"};
  const RunResult res = load_run(run.dir);
  const Matrix& correct = res.routing.correct_fraction;
  const Matrix& ood = res.routing.ood_fraction;
  double seen = 0, unseen = 0;
  int n_seen = 0, n_unseen = 0;
  for (Index i = 0; i < correct.rows(); ++i) {
    for (Index j = 0; j < correct.cols(); ++j) {
      if (j <= i) {
        seen += correct(i, j);
        ++n_seen;
      } else {
        unseen += ood(i, j);
        ++n_unseen;
      }
    }
  }
  seen = 100.0 * seen / n_seen;
  unseen = 100.0 * unseen / n_unseen;
  Outcome o;
  o.pass = seen >= 80.0 && unseen >= 95.0;
  o.detail = "subspace oracle " + fmt("%.1f", oracle) + "%; seen-task identification " +
             fmt("%.1f", seen) + "% (>= 80), unseen-task OOD " + fmt("%.1f", unseen) + "% (>= 95)";
  return o;
}

Outcome baseline_equivalence(const Paths& p) {
  const fs::path a = p.work / "equiv_framework";
  const fs::path b = p.work / "equiv_baseline";
  fs::remove_all(a);
  fs::remove_all(b);
  const std::string args = " --seed 4 --merge-enabled false --out ";
  if (run_cli(p.cli, "run" + args + "\"" + a.string() + "\"", p.work / "equiv_a.log") != 0 ||
      run_cli(p.baseline_cli, "run" + args + "\"" + b.string() + "\"", p.work / "equiv_b.log") != 0) {
    return {false, "run failed"};
  }
  // The echoed configs name different output directories; everything else must match.
  std::string why;
  bool ok = true;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), a);
    if (rel == "config.ini") continue;
    if (!fs::exists(b / rel) || read_file_bytes(a / rel) != read_file_bytes(b / rel)) {
      ok = false;
      why = rel.generic_string() + " differs";
      break;
    }
  }
  if (ok) why = "framework with merging disabled matches the merge-free build byte for byte";
  return {ok, why};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"moeforge acceptance suite"};
  Paths p;
  std::string work;
  app.add_option("--cli", p.cli, "moeforge executable")->required();
  app.add_option("--baseline-cli", p.baseline_cli, "merge-free moeforge executable")->required();
  app.add_option("--work", work, "scratch directory")->required();
  CLI11_PARSE(app, argc, argv);
  p.work = work;
  fs::create_directories(p.work);

  struct Criterion {
    int id;
    const char* title;
    double limit_seconds;  // 0 means bounded elsewhere
    std::function<Outcome()> check;
  };
  std::vector<std::string> ablation_table;
  const std::vector<Criterion> criteria = {
      {1, "fixture reproduction", 1.0, fixture_reproduction},
      {2, "gating properties", 1.0, gating_properties},
      {3, "merge exactness", 0.0, [&] { return merge_exactness(p); }},
      {4, "freezing", 0.0, [&] { return freezing(p); }},
      {5, "gradient oracle", 30.0, gradient_oracle},
      {6, "determinism", 0.0, [&] { return determinism(p); }},
      {7, "desk-scale learning", 0.0, [&] { return desk_learning(p); }},
      {8, "ablation comparison", 0.0, [&] { return ablation(p, ablation_table); }},
      {9, "task inference", 0.0, [&] { return task_inference(p); }},
      {10, "baseline equivalence", 0.0, [&] { return baseline_equivalence(p); }},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = seconds_since(t0);
    if (c.limit_seconds > 0 && secs >= c.limit_seconds) {
      o.pass = false;
      o.detail += "; took " + fmt("%.2f", secs) + "s, limit " + fmt("%.0f", c.limit_seconds) + "s";
    }
    for (const auto& line : ablation_table) std::printf("%s\n", line.c_str());
    ablation_table.clear();
    std::printf("criterion %2d %s: %s (%s) [%.2fs]\n", c.id, o.pass ? "PASS" : "FAIL", c.title,
                o.detail.c_str(), secs);
    std::fflush(stdout);
    failed += !o.pass;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
