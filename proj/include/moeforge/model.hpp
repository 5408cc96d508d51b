#pragma once

#include <span>
#include <vector>

#include "moeforge/moe.hpp"
#include "moeforge/optimizer.hpp"

namespace moeforge {

struct ModelShape {
  Index input_dim = 32;
  Index dim = 32;
  Index hidden = 64;
  Index rank = 4;
  int depth = 3;
  int num_experts = 8;
  int top_k = 2;
  int class_pool = 20;
};

/// Image-encoder analog plus a fixed table of unit-norm class embeddings
/// standing in for the text encoder.
struct Model {
  Matrix w_in;  ///< dim x input_dim
  Vector b_in;
  std::vector<MoEBlock> blocks;
  Matrix class_embeddings;  ///< class_pool x dim, unit rows, never trained
  double temperature = 0.07;

  Index input_dim() const { return w_in.cols(); }
  Index dim() const { return w_in.rows(); }
  bool has_router(TaskId t) const;
};

Model make_model(const ModelShape& shape, double temperature, Rng& rng);

/// Adds a freshly initialized router for `task` to every block.
void add_task_router(Model& model, TaskId task, Rng& rng);

struct ModelCache {
  Vector input;
  Vector projected;  ///< pre-normalization output of the last block
  double norm = 0.0;
  Vector feature;
  std::vector<BlockCache> blocks;
};

/// Input projection, every block in order, then L2 normalization.
/// `task == kAdapterFree` runs the adapter-free path.
Vector encode(Model& model, const Vector& x, TaskId task, bool train_mode,
              ModelCache* cache = nullptr);
Vector encode(const Model& model, const Vector& x, TaskId task, ModelCache* cache = nullptr);

struct ModelGrads {
  Matrix w_in;
  Vector b_in;
  std::vector<BlockGrads> blocks;

  void set_zero();
  void scale(double s);
};

ModelGrads zero_model_grads(const Model& model, TaskId task);

/// Accumulates parameter gradients for dL/dfeature and returns dL/dx.
Vector encode_backward(const Model& model, const ModelCache& cache, const Vector& dfeature,
                       ModelGrads& grads);

struct LossResult {
  double loss = 0.0;
  Matrix dfeatures;  ///< batch x dim
};

/// Label-smoothed cross-entropy over logits feature . embedding / tau for the
/// classes in `categories`, averaged over the batch.
LossResult similarity_loss(const Matrix& features, std::span<const int> labels,
                           std::span<const int> categories, const Matrix& class_embeddings,
                           double temperature, double smoothing);

/// Highest-similarity class among `categories` (ties to the earlier entry).
int predict_class(const Vector& feature, std::span<const int> categories,
                  const Matrix& class_embeddings);

struct ModelMoments {
  Moments<Matrix> w_in;
  Moments<Vector> b_in;
  std::vector<BlockMoments> blocks;

  ModelMoments() = default;
  explicit ModelMoments(const Model& model);
};

}  // namespace moeforge
