#include "moeforge/moe.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace moeforge {

std::int64_t SelectionCounter::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

const Router& MoEBlock::router(TaskId t) const {
  auto it = routers.find(t);
  if (it == routers.end()) throw LookupError("no router for task " + std::to_string(t));
  return it->second;
}

std::vector<bool> MoEBlock::frozen_mask() const {
  std::vector<bool> mask(experts.size());
  for (std::size_t i = 0; i < experts.size(); ++i) mask[i] = experts[i].frozen;
  return mask;
}

BlockMoments::BlockMoments(const MoEBlock& blk)
    : gamma(blk.ln.gamma),
      beta(blk.ln.beta),
      w1(blk.mlp.w1),
      b1(blk.mlp.b1),
      w2(blk.mlp.w2),
      b2(blk.mlp.b2) {
  experts.reserve(blk.experts.size());
  for (const auto& e : blk.experts) experts.emplace_back(e);
  for (const auto& [t, r] : blk.routers) routers.emplace(t, RouterMoments(r));
}

Expert make_expert(Index dim, Index rank, Rng& rng) {
  if (rank < 1 || rank >= dim) {
    throw ArgumentError("make_expert: rank must satisfy 1 <= r < d, got r=" +
                        std::to_string(rank) + " d=" + std::to_string(dim));
  }
  Expert e;
  e.down.resize(dim, rank);
  fill_normal(e.down, rng, 1.0 / std::sqrt(static_cast<double>(dim)));
  e.up = Matrix::Zero(rank, dim);
  return e;
}

Router make_router(TaskId task, Index dim, int num_experts, Rng& rng) {
  Router r;
  r.task = task;
  r.weights.resize(dim, num_experts);
  fill_normal(r.weights, rng, 1.0 / std::sqrt(static_cast<double>(dim)));
  r.bias = Vector::Zero(num_experts);
  return r;
}

MoEBlock make_block(const BlockShape& shape, Rng& rng) {
  if (shape.top_k < 1 || shape.top_k > shape.num_experts) {
    throw ArgumentError("make_block: top_k must be in [1, num_experts]");
  }
  MoEBlock blk;
  blk.top_k = shape.top_k;
  blk.ln.gamma = Vector::Ones(shape.dim);
  blk.ln.beta = Vector::Zero(shape.dim);
  blk.mlp.w1.resize(shape.hidden, shape.dim);
  fill_normal(blk.mlp.w1, rng, 1.0 / std::sqrt(static_cast<double>(shape.dim)));
  blk.mlp.b1 = Vector::Zero(shape.hidden);
  blk.mlp.w2.resize(shape.dim, shape.hidden);
  fill_normal(blk.mlp.w2, rng, 1.0 / std::sqrt(static_cast<double>(shape.hidden)));
  blk.mlp.b2 = Vector::Zero(shape.dim);
  blk.experts.reserve(shape.num_experts);
  for (int i = 0; i < shape.num_experts; ++i) {
    blk.experts.push_back(make_expert(shape.dim, shape.rank, rng));
  }
  blk.counter.counts.assign(shape.num_experts, 0);
  return blk;
}

Vector expert_forward(const Expert& e, const Vector& x) {
  if (x.size() != e.down.rows()) {
    throw DimensionError("expert_forward: input length " + std::to_string(x.size()) +
                         " vs expert dim " + std::to_string(e.down.rows()));
  }
  const Vector hidden = e.down.transpose() * x;
  return e.up.transpose() * hidden;
}

GateResult topk_gate(const Vector& logits, int k) {
  const auto n = static_cast<int>(logits.size());
  if (k < 1 || k > n) {
    throw ArgumentError("topk_gate: k=" + std::to_string(k) + " outside [1, " +
                        std::to_string(n) + "]");
  }
  if (!logits.allFinite()) throw NumericError("topk_gate: non-finite logits");
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return logits(a) > logits(b); });
  GateResult g;
  g.selected.assign(order.begin(), order.begin() + k);
  Vector chosen(k);
  for (int i = 0; i < k; ++i) chosen(i) = logits(g.selected[i]);
  const Vector probs = softmax(chosen);
  g.weights = Vector::Zero(n);
  for (int i = 0; i < k; ++i) g.weights(g.selected[i]) = probs(i);
  return g;
}

void record_usage(SelectionCounter& counter, std::span<const int> selected) {
  if (selected.empty()) throw ArgumentError("record_usage: empty selection");
  const auto n = static_cast<int>(counter.counts.size());
  for (int idx : selected) {
    if (idx < 0 || idx >= n) {
      throw ArgumentError("record_usage: expert index " + std::to_string(idx) +
                          " out of range [0, " + std::to_string(n) + ")");
    }
  }
  for (std::size_t i = 0; i < selected.size(); ++i) {
    for (std::size_t j = i + 1; j < selected.size(); ++j) {
      if (selected[i] == selected[j]) throw ArgumentError("record_usage: duplicate index");
    }
  }
  for (int idx : selected) ++counter.counts[idx];
}

BlockOutput block_forward(const MoEBlock& blk, const Vector& x, TaskId task, BlockCache* cache) {
  const Index d = blk.dim();
  if (x.size() != d) {
    throw DimensionError("block_forward: input length " + std::to_string(x.size()) +
                         " vs block dim " + std::to_string(d));
  }
  const Router* router = task == kAdapterFree ? nullptr : &blk.router(task);

  const double mean = x.mean();
  const Vector centered = x.array() - mean;
  const double var = centered.squaredNorm() / static_cast<double>(d);
  const double inv_std = 1.0 / std::sqrt(var + blk.ln.eps);
  const Vector xhat = centered * inv_std;
  const Vector ln_out = xhat.cwiseProduct(blk.ln.gamma) + blk.ln.beta;
  const Vector act = (blk.mlp.w1 * ln_out + blk.mlp.b1).array().tanh().matrix();
  Vector out = x + blk.mlp.w2 * act + blk.mlp.b2;

  BlockOutput result;
  if (router != nullptr) {
    const Vector logits = router->weights.transpose() * x + router->bias;
    result.gate = topk_gate(logits, blk.top_k);
  } else {
    result.gate.weights = Vector::Zero(blk.num_experts());
  }

  std::vector<Vector> hidden, contrib;
  for (int s : result.gate.selected) {
    const Expert& e = blk.experts[s];
    Vector h = e.down.transpose() * x;
    Vector o = e.up.transpose() * h;
    out += result.gate.weights(s) * o;
    if (cache) {
      hidden.push_back(std::move(h));
      contrib.push_back(std::move(o));
    }
  }

  if (cache) {
    cache->valid = true;
    cache->task = task;
    cache->x = x;
    cache->centered_scaled = xhat;
    cache->inv_std = inv_std;
    cache->ln_out = ln_out;
    cache->act = act;
    cache->gate = result.gate;
    cache->expert_hidden = std::move(hidden);
    cache->expert_out = std::move(contrib);
  }
  result.out = std::move(out);
  return result;
}

BlockOutput block_forward(MoEBlock& blk, const Vector& x, TaskId task, bool train_mode,
                          BlockCache* cache) {
  BlockOutput r = block_forward(static_cast<const MoEBlock&>(blk), x, task, cache);
  if (train_mode && !r.gate.selected.empty()) record_usage(blk.counter, r.gate.selected);
  return r;
}

void BlockGrads::set_zero() {
  gamma.setZero();
  beta.setZero();
  w1.setZero();
  b1.setZero();
  w2.setZero();
  b2.setZero();
  for (auto& e : experts) {
    e.down.setZero();
    e.up.setZero();
  }
  router_w.setZero();
  router_b.setZero();
}

void BlockGrads::scale(double s) {
  gamma *= s;
  beta *= s;
  w1 *= s;
  b1 *= s;
  w2 *= s;
  b2 *= s;
  for (auto& e : experts) {
    e.down *= s;
    e.up *= s;
  }
  router_w *= s;
  router_b *= s;
}

BlockGrads zero_block_grads(const MoEBlock& blk, TaskId task) {
  BlockGrads g;
  g.task = task;
  const Index d = blk.dim(), h = blk.hidden();
  const int n = blk.num_experts();
  g.gamma = Vector::Zero(d);
  g.beta = Vector::Zero(d);
  g.w1 = Matrix::Zero(h, d);
  g.b1 = Vector::Zero(h);
  g.w2 = Matrix::Zero(d, h);
  g.b2 = Vector::Zero(d);
  g.experts.reserve(n);
  for (const auto& e : blk.experts) {
    g.experts.push_back({Matrix::Zero(e.down.rows(), e.down.cols()),
                         Matrix::Zero(e.up.rows(), e.up.cols())});
  }
  g.router_w = Matrix::Zero(d, n);
  g.router_b = Vector::Zero(n);
  return g;
}

Vector block_backward(const MoEBlock& blk, const BlockCache& cache, const Vector& upstream,
                      BlockGrads& grads) {
  if (!cache.valid) throw StateError("block_backward: no forward cache");
  if (upstream.size() != blk.dim()) {
    throw DimensionError("block_backward: upstream length " + std::to_string(upstream.size()));
  }
  if (cache.task != kAdapterFree && grads.task != cache.task) {
    throw StateError("block_backward: gradient buffer is for task " +
                     std::to_string(grads.task) + " but cache used task " +
                     std::to_string(cache.task));
  }
  const Vector& dout = upstream;
  Vector dx = dout;

  // MLP with layer norm.
  grads.b2 += dout;
  grads.w2.noalias() += dout * cache.act.transpose();
  const Vector da = blk.mlp.w2.transpose() * dout;
  const Vector du = da.cwiseProduct((1.0 - cache.act.array().square()).matrix());
  grads.b1 += du;
  grads.w1.noalias() += du * cache.ln_out.transpose();
  const Vector dln = blk.mlp.w1.transpose() * du;
  const Vector& xhat = cache.centered_scaled;
  grads.gamma += dln.cwiseProduct(xhat);
  grads.beta += dln;
  const Vector dxhat = dln.cwiseProduct(blk.ln.gamma);
  const double mean_dxhat = dxhat.mean();
  const double mean_dxhat_xhat = dxhat.dot(xhat) / static_cast<double>(xhat.size());
  dx += cache.inv_std * ((dxhat.array() - mean_dxhat) - xhat.array() * mean_dxhat_xhat).matrix();

  if (cache.task == kAdapterFree) return dx;

  // Experts and gate.
  const auto& sel = cache.gate.selected;
  const Router& router = blk.router(cache.task);
  std::vector<double> dgate(sel.size());
  double weighted = 0.0;
  for (std::size_t slot = 0; slot < sel.size(); ++slot) {
    const int s = sel[slot];
    const Expert& e = blk.experts[s];
    const double g = cache.gate.weights(s);
    dgate[slot] = dout.dot(cache.expert_out[slot]);
    weighted += g * dgate[slot];
    const Vector dh = g * (e.up * dout);
    if (!e.frozen) {
      grads.experts[s].up.noalias() += g * cache.expert_hidden[slot] * dout.transpose();
      grads.experts[s].down.noalias() += cache.x * dh.transpose();
    }
    dx.noalias() += e.down * dh;
  }
  for (std::size_t slot = 0; slot < sel.size(); ++slot) {
    const int s = sel[slot];
    const double dlogit = cache.gate.weights(s) * (dgate[slot] - weighted);
    grads.router_w.col(s) += cache.x * dlogit;
    grads.router_b(s) += dlogit;
    dx += router.weights.col(s) * dlogit;
  }
  return dx;
}

}  // namespace moeforge
