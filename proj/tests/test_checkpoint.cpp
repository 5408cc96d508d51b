#include <doctest.h>

#include <filesystem>
#include <functional>
#include <json.hpp>

#include "moeforge/tensor_io.hpp"
#include "moeforge/trainer.hpp"
#include "test_util.hpp"

using namespace moeforge;
using moeforge::testing::bytes_equal;
namespace fs = std::filesystem;

namespace {

struct Fixture {
  TaskSequence suite;
  Checkpoint ckpt;
};

Fixture trained_checkpoint() {
  SuiteConfig s;
  s.tasks = 3;
  s.input_dim = 8;
  s.class_pool = 9;
  s.classes_per_task = 3;
  s.overlap = 0.0;
  s.train_per_class = 20;
  s.test_per_class = 5;
  s.seed = 2;
  TrainConfig c;
  c.num_experts = 4;
  c.merge_cycle = 5;
  c.batch = 4;
  c.iterations = 15;
  c.dim = 8;
  c.hidden = 12;
  c.rank = 2;
  c.depth = 2;
  c.seed = 9;
  c.autoencoder.bottleneck = 3;
  c.autoencoder.epochs = 10;
  Fixture f;
  f.suite = generate_suite(s);
  Learner l = make_learner(c, 8, 9);
  train_task(l, f.suite.tasks[0]);
  train_task(l, f.suite.tasks[1]);
  f.ckpt.learner = l;
  f.ckpt.suite = s;
  for (const auto& t : f.suite.tasks) f.ckpt.task_names.push_back(t.name);
  f.ckpt.eval = evaluate_checkpoint(l, f.suite);
  return f;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("moeforge_test_" + name);
  fs::remove_all(p);
  return p;
}

LoadError::Kind load_error_kind(const fs::path& dir) {
  try {
    load_checkpoint(dir);
  } catch (const LoadError& e) {
    return e.kind();
  }
  FAIL("expected LoadError");
  return LoadError::Kind::Malformed;
}

void edit_manifest(const fs::path& dir, const std::function<void(nlohmann::json&)>& f) {
  auto j = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  f(j);
  write_text_file(dir / "manifest.json", j.dump(1));
}

}  // namespace

TEST_CASE("checkpoint round trip is byte-identical") {
  const Fixture f = trained_checkpoint();
  const auto a = scratch("ckpt_a");
  const auto b = scratch("ckpt_b");
  save_checkpoint(f.ckpt, a);
  const Checkpoint back = load_checkpoint(a);
  save_checkpoint(back, b);
  CHECK(read_file_bytes(a / "manifest.json") == read_file_bytes(b / "manifest.json"));
  CHECK(read_file_bytes(a / "tensors.bin") == read_file_bytes(b / "tensors.bin"));

  const Learner& x = f.ckpt.learner;
  const Learner& y = back.learner;
  CHECK(y.tasks_done == 2);
  CHECK(bytes_equal(x.model.w_in, y.model.w_in));
  CHECK(bytes_equal(x.model.class_embeddings, y.model.class_embeddings));
  CHECK(x.model.temperature == y.model.temperature);
  for (std::size_t bi = 0; bi < x.model.blocks.size(); ++bi) {
    const auto& p = x.model.blocks[bi];
    const auto& q = y.model.blocks[bi];
    CHECK(p.frozen_mask() == q.frozen_mask());
    CHECK(p.counter.counts == q.counter.counts);
    CHECK(bytes_equal(p.mlp.w1, q.mlp.w1));
    for (TaskId t : {0, 1}) CHECK(bytes_equal(p.routers.at(t).weights, q.routers.at(t).weights));
    for (std::size_t e = 0; e < p.experts.size(); ++e) {
      CHECK(bytes_equal(p.experts[e].up, q.experts[e].up));
      CHECK(bytes_equal(x.moments.blocks[bi].experts[e].up.v, y.moments.blocks[bi].experts[e].up.v));
      CHECK(x.moments.blocks[bi].experts[e].up.step == y.moments.blocks[bi].experts[e].up.step);
    }
  }
  REQUIRE(y.autoencoders.size() == 2);
  CHECK(x.autoencoders[1].threshold == y.autoencoders[1].threshold);
  CHECK(bytes_equal(x.autoencoders[1].encoder, y.autoencoders[1].encoder));
  CHECK(x.batch_rng.state() == y.batch_rng.state());
  CHECK(x.ae_rng.state() == y.ae_rng.state());
  CHECK(x.init_rng.state() == y.init_rng.state());
  CHECK(back.eval.accuracy == f.ckpt.eval.accuracy);
  CHECK(back.task_names == f.ckpt.task_names);
  CHECK(back.suite.seed == f.ckpt.suite.seed);
  CHECK(y.config.lr == x.config.lr);
  CHECK(y.config.merge_cycle == x.config.merge_cycle);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("corrupted checkpoints are rejected") {
  const Fixture f = trained_checkpoint();
  const auto dir = scratch("ckpt_bad");

  SUBCASE("flipped byte") {
    save_checkpoint(f.ckpt, dir);
    auto blob = read_file_bytes(dir / "tensors.bin");
    blob[blob.size() / 2] ^= 0x40;
    write_file_bytes(dir / "tensors.bin", blob);
    CHECK(load_error_kind(dir) == LoadError::Kind::Checksum);
  }

  SUBCASE("truncated blob") {
    save_checkpoint(f.ckpt, dir);
    auto blob = read_file_bytes(dir / "tensors.bin");
    blob.resize(blob.size() - 8);
    write_file_bytes(dir / "tensors.bin", blob);
    CHECK(load_error_kind(dir) == LoadError::Kind::Truncated);
  }

  SUBCASE("future format version") {
    save_checkpoint(f.ckpt, dir);
    edit_manifest(dir, [](nlohmann::json& j) { j["format_version"] = 2; });
    CHECK(load_error_kind(dir) == LoadError::Kind::Version);
  }

  SUBCASE("missing tensor entry") {
    save_checkpoint(f.ckpt, dir);
    edit_manifest(dir, [](nlohmann::json& j) { j["tensors"].erase(0); });
    CHECK(load_error_kind(dir) == LoadError::Kind::Malformed);
  }

  SUBCASE("not json") {
    save_checkpoint(f.ckpt, dir);
    write_text_file(dir / "manifest.json", "{ nope");
    CHECK(load_error_kind(dir) == LoadError::Kind::Malformed);
  }

  SUBCASE("missing directory") {
    CHECK_THROWS_AS(load_checkpoint(dir), IoError);
  }
  fs::remove_all(dir);
}

TEST_CASE("tensor files") {
  Rng rng(4, 0);
  const Matrix m = moeforge::testing::random_matrix(3, 5, rng);
  const auto dir = scratch("tensor");
  fs::create_directories(dir);
  write_tensor_file(dir / "m.bin", m);
  const auto bytes = read_file_bytes(dir / "m.bin");
  REQUIRE(bytes.size() == 16 + 15 * 8);
  CHECK(bytes[0] == 3);
  CHECK(bytes[8] == 5);
  CHECK(read_f64_le(bytes.data() + 16) == m(0, 0));
  CHECK(read_f64_le(bytes.data() + 16 + 8) == m(0, 1));  // row-major
  CHECK(bytes_equal(read_tensor_file(dir / "m.bin"), m));

  std::vector<unsigned char> out;
  append_u64_le(out, 0x0102030405060708ULL);
  CHECK(out[0] == 0x08);
  CHECK(out[7] == 0x01);
  CHECK(read_u64_le(out.data()) == 0x0102030405060708ULL);

  const unsigned char text[] = "123456789";
  CHECK(crc32_of(text, 9) == 0xCBF43926u);  // standard CRC-32 check value
  CHECK_THROWS_AS(read_tensor_file(dir / "missing.bin"), IoError);
  fs::remove_all(dir);
}
