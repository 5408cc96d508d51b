#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "moeforge/numerics.hpp"
#include "moeforge/optimizer.hpp"
#include "moeforge/types.hpp"

namespace moeforge {

/// Route marker for the adapter-free path: every gate weight is zero.
inline constexpr TaskId kAdapterFree = -1;

/// Low-rank adapter. `down` is d x r, `up` is r x d; the contribution for an
/// input x is x projected through down then up, with no extra scaling.
struct Expert {
  Matrix down;
  Matrix up;
  bool frozen = false;

  Index dim() const { return down.rows(); }
  Index rank() const { return down.cols(); }
};

struct ExpertMoments {
  Moments<Matrix> down;
  Moments<Matrix> up;

  ExpertMoments() = default;
  explicit ExpertMoments(const Expert& e) : down(e.down), up(e.up) {}
};

/// Per-task router: logits = weights^T x + bias, weights is d x N_E.
struct Router {
  TaskId task = 0;
  Matrix weights;
  Vector bias;
};

/// Sparse gate: exactly k positive weights, zeros elsewhere.
struct GateResult {
  Vector weights;
  std::vector<int> selected;  ///< descending logit order, ties by lower index
};

struct SelectionCounter {
  std::vector<std::int64_t> counts;

  std::int64_t total() const;
};

struct LayerNormParams {
  Vector gamma;
  Vector beta;
  double eps = 1e-5;
};

/// Two-layer d -> h -> d MLP with tanh activation.
struct Mlp {
  Matrix w1;  ///< h x d
  Vector b1;
  Matrix w2;  ///< d x h
  Vector b2;
};

struct MoEBlock {
  LayerNormParams ln;
  Mlp mlp;
  std::vector<Expert> experts;
  std::map<TaskId, Router> routers;
  SelectionCounter counter;
  int top_k = 2;

  Index dim() const { return mlp.w2.rows(); }
  Index hidden() const { return mlp.w1.rows(); }
  int num_experts() const { return static_cast<int>(experts.size()); }

  const Router& router(TaskId t) const;
  bool has_router(TaskId t) const { return routers.count(t) != 0; }
  std::vector<bool> frozen_mask() const;
};

struct RouterMoments {
  Moments<Matrix> weights;
  Moments<Vector> bias;

  RouterMoments() = default;
  explicit RouterMoments(const Router& r) : weights(r.weights), bias(r.bias) {}
};

/// Optimizer state mirroring every trainable tensor of a block.
struct BlockMoments {
  Moments<Vector> gamma, beta;
  Moments<Matrix> w1;
  Moments<Vector> b1;
  Moments<Matrix> w2;
  Moments<Vector> b2;
  std::vector<ExpertMoments> experts;
  std::map<TaskId, RouterMoments> routers;

  BlockMoments() = default;
  explicit BlockMoments(const MoEBlock& blk);
};

struct BlockShape {
  Index dim = 32;
  Index hidden = 64;
  Index rank = 4;
  int num_experts = 8;
  int top_k = 2;
};

/// Standard adapter initialization: down ~ N(0, 1/d), up = 0.
Expert make_expert(Index dim, Index rank, Rng& rng);

/// weights ~ N(0, 1/d), bias = 0.
Router make_router(TaskId task, Index dim, int num_experts, Rng& rng);

/// Block with unit layer norm, N(0, 1/fan_in) MLP weights and fresh experts.
/// No routers yet.
MoEBlock make_block(const BlockShape& shape, Rng& rng);

Vector expert_forward(const Expert& e, const Vector& x);

/// Top-k selection (ties to the lower index) followed by a softmax over the
/// selected logits only.
GateResult topk_gate(const Vector& logits, int k);

void record_usage(SelectionCounter& counter, std::span<const int> selected);

/// Everything block_backward needs from a forward pass.
struct BlockCache {
  bool valid = false;
  TaskId task = kAdapterFree;
  Vector x;
  Vector centered_scaled;  ///< layer-norm xhat
  double inv_std = 0.0;
  Vector ln_out;
  Vector act;  ///< tanh(w1 ln_out + b1)
  GateResult gate;
  std::vector<Vector> expert_hidden;  ///< down^T x, per selected slot
  std::vector<Vector> expert_out;     ///< per selected slot
};

struct BlockOutput {
  Vector out;
  GateResult gate;
};

/// x + MLP(LN(x)) + sum_k W_k expert_k(x). The router for `task` consumes x
/// directly. `task == kAdapterFree` zeroes the expert path. Usage is recorded
/// only in train mode.
BlockOutput block_forward(MoEBlock& blk, const Vector& x, TaskId task, bool train_mode,
                          BlockCache* cache = nullptr);

/// Read-only forward; never touches counters.
BlockOutput block_forward(const MoEBlock& blk, const Vector& x, TaskId task,
                          BlockCache* cache = nullptr);

struct ExpertGrad {
  Matrix down;
  Matrix up;
};

/// Parameter gradients of one block for one task's router.
struct BlockGrads {
  TaskId task = kAdapterFree;
  Vector gamma, beta;
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
  std::vector<ExpertGrad> experts;
  Matrix router_w;
  Vector router_b;

  void set_zero();
  void scale(double s);
};

BlockGrads zero_block_grads(const MoEBlock& blk, TaskId task);

/// Accumulates parameter gradients into `grads` and returns dL/dx.
/// Frozen experts and non-selected experts receive nothing; the gate is
/// differentiated through its softmax values, not through the selection.
Vector block_backward(const MoEBlock& blk, const BlockCache& cache, const Vector& upstream,
                      BlockGrads& grads);

}  // namespace moeforge
