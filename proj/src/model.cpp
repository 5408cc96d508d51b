#include "moeforge/model.hpp"

#include <cmath>
#include <string>

#include "moeforge/errors.hpp"

namespace moeforge {

bool Model::has_router(TaskId t) const {
  for (const auto& b : blocks) {
    if (!b.has_router(t)) return false;
  }
  return true;
}

Model make_model(const ModelShape& shape, double temperature, Rng& rng) {
  if (!(temperature > 0)) throw ConfigError("model: temperature must be positive");
  Model m;
  m.temperature = temperature;
  m.w_in.resize(shape.dim, shape.input_dim);
  fill_normal(m.w_in, rng, 1.0 / std::sqrt(static_cast<double>(shape.input_dim)));
  m.b_in = Vector::Zero(shape.dim);
  BlockShape bs{shape.dim, shape.hidden, shape.rank, shape.num_experts, shape.top_k};
  for (int i = 0; i < shape.depth; ++i) m.blocks.push_back(make_block(bs, rng));
  m.class_embeddings.resize(shape.class_pool, shape.dim);
  for (int c = 0; c < shape.class_pool; ++c) {
    Vector e(shape.dim);
    fill_normal(e, rng, 1.0);
    m.class_embeddings.row(c) = e.normalized().transpose();
  }
  return m;
}

void add_task_router(Model& model, TaskId task, Rng& rng) {
  for (auto& blk : model.blocks) {
    if (blk.has_router(task)) {
      throw StateError("add_task_router: router for task " + std::to_string(task) +
                       " already exists");
    }
    blk.routers.emplace(task, make_router(task, blk.dim(), blk.num_experts(), rng));
  }
}

namespace {

template <typename ModelRef, typename Step>
Vector encode_impl(ModelRef& model, const Vector& x, ModelCache* cache, Step&& step) {
  if (x.size() != model.input_dim()) {
    throw DimensionError("encode: input length " + std::to_string(x.size()) + " vs model input " +
                         std::to_string(model.input_dim()));
  }
  Vector h = model.w_in * x + model.b_in;
  if (cache) cache->blocks.resize(model.blocks.size());
  for (std::size_t i = 0; i < model.blocks.size(); ++i) {
    h = step(model.blocks[i], h, cache ? &cache->blocks[i] : nullptr);
  }
  const double norm = h.norm();
  if (!(norm > 0)) throw NumericError("encode: zero feature vector");
  Vector feature = h / norm;
  if (cache) {
    cache->input = x;
    cache->projected = h;
    cache->norm = norm;
    cache->feature = feature;
  }
  return feature;
}

}  // namespace

Vector encode(Model& model, const Vector& x, TaskId task, bool train_mode, ModelCache* cache) {
  return encode_impl(model, x, cache, [&](MoEBlock& blk, const Vector& h, BlockCache* bc) {
    return block_forward(blk, h, task, train_mode, bc).out;
  });
}

Vector encode(const Model& model, const Vector& x, TaskId task, ModelCache* cache) {
  return encode_impl(model, x, cache, [&](const MoEBlock& blk, const Vector& h, BlockCache* bc) {
    return block_forward(blk, h, task, bc).out;
  });
}

void ModelGrads::set_zero() {
  w_in.setZero();
  b_in.setZero();
  for (auto& b : blocks) b.set_zero();
}

void ModelGrads::scale(double s) {
  w_in *= s;
  b_in *= s;
  for (auto& b : blocks) b.scale(s);
}

ModelGrads zero_model_grads(const Model& model, TaskId task) {
  ModelGrads g;
  g.w_in = Matrix::Zero(model.w_in.rows(), model.w_in.cols());
  g.b_in = Vector::Zero(model.b_in.size());
  for (const auto& b : model.blocks) g.blocks.push_back(zero_block_grads(b, task));
  return g;
}

Vector encode_backward(const Model& model, const ModelCache& cache, const Vector& dfeature,
                       ModelGrads& grads) {
  if (cache.blocks.size() != model.blocks.size() || cache.feature.size() == 0) {
    throw StateError("encode_backward: no forward cache");
  }
  // d(h/|h|)/dh = (I - f f^T) / |h|
  Vector dh = (dfeature - cache.feature * cache.feature.dot(dfeature)) / cache.norm;
  for (std::size_t i = model.blocks.size(); i-- > 0;) {
    dh = block_backward(model.blocks[i], cache.blocks[i], dh, grads.blocks[i]);
  }
  grads.b_in += dh;
  grads.w_in.noalias() += dh * cache.input.transpose();
  return model.w_in.transpose() * dh;
}

LossResult similarity_loss(const Matrix& features, std::span<const int> labels,
                           std::span<const int> categories, const Matrix& class_embeddings,
                           double temperature, double smoothing) {
  const Index batch = features.rows();
  if (static_cast<std::size_t>(batch) != labels.size()) {
    throw DimensionError("similarity_loss: " + std::to_string(batch) + " features vs " +
                         std::to_string(labels.size()) + " labels");
  }
  if (categories.empty()) throw ArgumentError("similarity_loss: empty category set");
  if (batch == 0) throw ArgumentError("similarity_loss: empty batch");
  if (!(smoothing >= 0.0 && smoothing < 1.0)) {
    throw ArgumentError("similarity_loss: smoothing must be in [0, 1)");
  }
  const auto n_cls = static_cast<Index>(categories.size());
  Matrix emb(n_cls, class_embeddings.cols());
  for (Index j = 0; j < n_cls; ++j) {
    const int c = categories[j];
    if (c < 0 || c >= class_embeddings.rows()) {
      throw DataError("similarity_loss: class " + std::to_string(c) + " has no embedding");
    }
    emb.row(j) = class_embeddings.row(c);
  }
  const double off = n_cls > 1 ? smoothing / static_cast<double>(n_cls - 1) : 0.0;
  const double on = n_cls > 1 ? 1.0 - smoothing : 1.0;

  LossResult res;
  res.dfeatures = Matrix::Zero(batch, features.cols());
  double total = 0.0;
  for (Index b = 0; b < batch; ++b) {
    Index target = -1;
    for (Index j = 0; j < n_cls; ++j) {
      if (categories[j] == labels[b]) target = j;
    }
    if (target < 0) {
      throw DataError("similarity_loss: label " + std::to_string(labels[b]) +
                      " is outside the task's category set");
    }
    const Vector logits = emb * features.row(b).transpose() / temperature;
    const Vector probs = softmax(logits);
    const double mx = logits.maxCoeff();
    const double log_z = mx + std::log((logits.array() - mx).exp().sum());
    Vector q = Vector::Constant(n_cls, off);
    q(target) = on;
    total += -(q.array() * (logits.array() - log_z)).sum();
    const Vector dlogits = (probs - q) / static_cast<double>(batch);
    res.dfeatures.row(b) = (emb.transpose() * dlogits / temperature).transpose();
  }
  res.loss = total / static_cast<double>(batch);
  return res;
}

int predict_class(const Vector& feature, std::span<const int> categories,
                  const Matrix& class_embeddings) {
  if (categories.empty()) throw ArgumentError("predict_class: empty category set");
  int best = categories[0];
  double best_score = class_embeddings.row(best).dot(feature);
  for (std::size_t j = 1; j < categories.size(); ++j) {
    const double s = class_embeddings.row(categories[j]).dot(feature);
    if (s > best_score) {
      best_score = s;
      best = categories[j];
    }
  }
  return best;
}

ModelMoments::ModelMoments(const Model& model) : w_in(model.w_in), b_in(model.b_in) {
  for (const auto& b : model.blocks) blocks.emplace_back(b);
}

}  // namespace moeforge
