#include <doctest.h>

#include <cmath>

#include "moeforge/model.hpp"
#include "test_util.hpp"

using namespace moeforge;
using moeforge::testing::random_matrix;
using moeforge::testing::random_vector;

namespace {

ModelShape small_shape(int depth = 2) {
  ModelShape s;
  s.input_dim = 6;
  s.dim = 8;
  s.hidden = 16;
  s.rank = 2;
  s.depth = depth;
  s.num_experts = 4;
  s.top_k = 2;
  s.class_pool = 5;
  return s;
}

Model random_model(Rng& rng, int depth = 2) {
  Model m = make_model(small_shape(depth), 0.5, rng);
  add_task_router(m, 0, rng);
  for (auto& blk : m.blocks) {
    for (auto& e : blk.experts) e.up = random_matrix(e.up.rows(), e.up.cols(), rng, 0.5);
    blk.routers[0].weights *= 3.0;
  }
  return m;
}

// Reference implementation of the smoothed cross-entropy for one sample.
double reference_loss(const Vector& f, int label, const std::vector<int>& cats, const Matrix& emb,
                      double tau, double eps) {
  const auto n = static_cast<Index>(cats.size());
  Vector logits(n);
  for (Index j = 0; j < n; ++j) logits(j) = emb.row(cats[j]).dot(f) / tau;
  const double mx = logits.maxCoeff();
  const double lse = mx + std::log((logits.array() - mx).exp().sum());
  double loss = 0;
  for (Index j = 0; j < n; ++j) {
    const double target = n == 1 ? 1.0 : (cats[j] == label ? 1.0 - eps : eps / (n - 1));
    loss -= target * (logits(j) - lse);
  }
  return loss;
}

}  // namespace

TEST_CASE("make_model and routers") {
  Rng rng(1, 2);
  Model m = make_model(small_shape(), 0.07, rng);
  for (Index c = 0; c < m.class_embeddings.rows(); ++c) {
    CHECK(std::abs(m.class_embeddings.row(c).norm() - 1.0) < 1e-9);
  }
  CHECK_FALSE(m.has_router(0));
  add_task_router(m, 0, rng);
  CHECK(m.has_router(0));
  for (const auto& b : m.blocks) CHECK(b.routers.size() == 1);
  CHECK_THROWS_AS(add_task_router(m, 0, rng), StateError);
  CHECK_THROWS_AS(make_model(small_shape(), 0.0, rng), ConfigError);
}

TEST_CASE("encode") {
  Rng rng(2, 2);

  SUBCASE("depth 0 is the normalized projection") {
    Model m = make_model(small_shape(0), 0.1, rng);
    const Vector x = random_vector(6, rng);
    const Vector want = (m.w_in * x + m.b_in).normalized();
    CHECK((encode(m, x, 0, false) - want).cwiseAbs().maxCoeff() < 1e-15);
  }

  SUBCASE("zero-weight blocks are residual identities") {
    Model m = make_model(small_shape(3), 0.1, rng);
    add_task_router(m, 0, rng);
    for (auto& b : m.blocks) {
      b.mlp.w2.setZero();
      b.mlp.b2.setZero();
    }
    const Vector x = random_vector(6, rng);
    const Vector want = (m.w_in * x + m.b_in).normalized();
    CHECK((encode(m, x, 0, false) - want).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("unit norm output") {
    Model m = random_model(rng);
    for (int i = 0; i < 200; ++i) {
      CHECK(std::abs(encode(m, random_vector(6, rng, 3.0), 0, false).norm() - 1.0) < 1e-9);
    }
  }

  SUBCASE("counting only in train mode") {
    Model m = random_model(rng);
    const Vector x = random_vector(6, rng);
    const Vector a = encode(static_cast<const Model&>(m), x, 0);
    for (const auto& b : m.blocks) CHECK(b.counter.total() == 0);
    const Vector b = encode(m, x, 0, true);
    CHECK(a == b);
    for (const auto& blk : m.blocks) CHECK(blk.counter.total() == blk.top_k);
  }

  SUBCASE("errors") {
    Model m = random_model(rng);
    CHECK_THROWS_AS(encode(m, random_vector(5, rng), 0, false), DimensionError);
    CHECK_THROWS_AS(encode(m, random_vector(6, rng), 4, false), LookupError);
  }
}

TEST_CASE("similarity_loss examples") {
  Matrix emb = Matrix::Identity(3, 3);
  const std::vector<int> cats{0, 1, 2};

  // Perfect match with a tiny temperature.
  Matrix f = emb.row(1);
  const std::vector<int> y{1};
  CHECK(similarity_loss(f, y, cats, emb, 1e-3, 0.0).loss < 1e-12);

  // Features orthogonal to every embedding give uniform logits.
  Matrix emb4 = Matrix::Zero(3, 4);
  emb4.leftCols(3) = Matrix::Identity(3, 3);
  Matrix g(1, 4);
  g << 0, 0, 0, 1;
  CHECK(similarity_loss(g, y, cats, emb4, 0.07, 0.0).loss == doctest::Approx(std::log(3.0)));

  // One-class task: the target is that class whatever the smoothing.
  const std::vector<int> single{1};
  CHECK(similarity_loss(f, y, single, emb, 0.07, 0.1).loss == doctest::Approx(0.0));

  const std::vector<int> outside{0, 2};
  CHECK_THROWS_AS(similarity_loss(f, y, outside, emb, 0.07, 0.1), DataError);
  CHECK_THROWS_AS(similarity_loss(Matrix::Zero(2, 3), y, cats, emb, 0.07, 0.1), DimensionError);
  CHECK_THROWS_AS(similarity_loss(f, y, cats, emb, 0.07, 1.0), ArgumentError);
}

TEST_CASE("similarity_loss matches a reference and finite differences") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed, 9);
    Matrix emb = random_matrix(6, 5, rng);
    for (Index r = 0; r < emb.rows(); ++r) emb.row(r).normalize();
    const std::vector<int> cats{1, 3, 4};
    const Matrix feats = random_matrix(4, 5, rng);
    const std::vector<int> labels{3, 1, 4, 3};
    const double tau = 0.3, eps = 0.1;

    const LossResult r = similarity_loss(feats, labels, cats, emb, tau, eps);
    double ref = 0;
    for (Index b = 0; b < 4; ++b) ref += reference_loss(feats.row(b).transpose(), labels[b], cats, emb, tau, eps);
    CHECK(r.loss == doctest::Approx(ref / 4).epsilon(1e-12));

    auto f = [&](const Matrix& x) { return similarity_loss(x, labels, cats, emb, tau, eps).loss; };
    const Matrix numeric = finite_diff_grad(f, feats, 1e-5);
    CHECK(group_relative_error(r.dfeatures, numeric) < 1e-4);
  }
}

TEST_CASE("encode_backward matches finite differences") {
  int checked = 0;
  for (std::uint64_t seed = 1; checked < 10; ++seed) {
    Rng rng(seed, 21);
    Model m = random_model(rng);
    const Vector x = random_vector(6, rng);
    const Vector c = random_vector(8, rng);

    ModelCache cache;
    encode(static_cast<const Model&>(m), x, 0, &cache);
    // Skip instances where a routing decision sits on a knife edge.
    bool stable = true;
    for (std::size_t b = 0; b < m.blocks.size(); ++b) {
      const Router& r = m.blocks[b].router(0);
      Vector logits = r.weights.transpose() * cache.blocks[b].x + r.bias;
      std::sort(logits.data(), logits.data() + logits.size(), std::greater<>());
      stable &= logits(1) - logits(2) > 1e-3;
    }
    if (!stable) continue;
    ++checked;

    ModelGrads g = zero_model_grads(m, 0);
    const Vector dx = encode_backward(m, cache, c, g);
    auto loss = [&](const Model& probe, const Vector& in) { return c.dot(encode(probe, in, 0)); };

    Model probe = m;
    auto f_win = [&](const Matrix& w) {
      probe.w_in = w;
      return loss(probe, x);
    };
    CHECK(group_relative_error(g.w_in, finite_diff_grad(f_win, m.w_in, 1e-5)) < 1e-4);
    probe = m;
    auto f_bin = [&](const Vector& b) {
      probe.b_in = b;
      return loss(probe, x);
    };
    CHECK(group_relative_error(g.b_in, finite_diff_grad(f_bin, m.b_in, 1e-5)) < 1e-4);
    probe = m;
    auto f_w1 = [&](const Matrix& w) {
      probe.blocks[0].mlp.w1 = w;
      return loss(probe, x);
    };
    CHECK(group_relative_error(g.blocks[0].w1, finite_diff_grad(f_w1, m.blocks[0].mlp.w1, 1e-5)) <
          1e-4);
    probe = m;
    auto f_rw = [&](const Matrix& w) {
      probe.blocks[1].routers[0].weights = w;
      return loss(probe, x);
    };
    CHECK(group_relative_error(g.blocks[1].router_w,
                               finite_diff_grad(f_rw, m.blocks[1].routers[0].weights, 1e-5)) < 1e-4);
    auto f_x = [&](const Vector& in) { return loss(m, in); };
    CHECK(group_relative_error(dx, finite_diff_grad(f_x, x, 1e-5)) < 1e-4);
  }
}

TEST_CASE("predict_class") {
  Matrix emb = Matrix::Identity(4, 4);
  Vector f(4);
  f << 0.1, 0.9, 0.9, 0.3;
  const std::vector<int> cats{0, 2, 3};
  CHECK(predict_class(f, cats, emb) == 2);
  const std::vector<int> all{0, 1, 2, 3};
  CHECK(predict_class(f, all, emb) == 1);  // tie between 1 and 2
  CHECK_THROWS_AS(predict_class(f, std::vector<int>{}, emb), ArgumentError);
}
