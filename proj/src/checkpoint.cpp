#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <map>

#include "moeforge/errors.hpp"
#include "moeforge/tensor_io.hpp"
#include "moeforge/trainer.hpp"

namespace moeforge {
namespace {

using ojson = nlohmann::ordered_json;

ojson train_config_json(const TrainConfig& c) {
  return {{"experts", c.num_experts},
          {"topk", c.top_k},
          {"merge_cycle", c.merge_cycle},
          {"batch", c.batch},
          {"iterations", c.iterations},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"smoothing", c.smoothing},
          {"temperature", c.temperature},
          {"merge_enabled", c.merge_enabled},
          {"seed", c.seed},
          {"dim", c.dim},
          {"hidden", c.hidden},
          {"rank", c.rank},
          {"depth", c.depth},
          {"train_backbone_first_task", c.train_backbone_first_task},
          {"ae_bottleneck", c.autoencoder.bottleneck},
          {"ae_epochs", c.autoencoder.epochs},
          {"ae_lr", c.autoencoder.lr},
          {"ae_percentile", c.autoencoder.threshold_percentile}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.num_experts = j.at("experts");
  c.top_k = j.at("topk");
  c.merge_cycle = j.at("merge_cycle");
  c.batch = j.at("batch");
  c.iterations = j.at("iterations");
  c.lr = j.at("lr");
  c.weight_decay = j.at("weight_decay");
  c.smoothing = j.at("smoothing");
  c.temperature = j.at("temperature");
  c.merge_enabled = j.at("merge_enabled");
  c.seed = j.at("seed");
  c.dim = j.at("dim");
  c.hidden = j.at("hidden");
  c.rank = j.at("rank");
  c.depth = j.at("depth");
  c.train_backbone_first_task = j.at("train_backbone_first_task");
  c.autoencoder.bottleneck = j.at("ae_bottleneck");
  c.autoencoder.epochs = j.at("ae_epochs");
  c.autoencoder.lr = j.at("ae_lr");
  c.autoencoder.threshold_percentile = j.at("ae_percentile");
  return c;
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// Collects tensors into one blob and scalars into a JSON object.
class Writer {
 public:
  template <typename Plain>
  void tensor(const std::string& name, const Plain& t) {
    const Matrix m = Eigen::Map<const Matrix>(t.data(), t.rows(), t.cols());
    const std::size_t offset = blob_.size();
    append_payload(blob_, m);
    index_.push_back({{"name", name},
                      {"rows", m.rows()},
                      {"cols", m.cols()},
                      {"offset", offset},
                      {"crc32", crc32_of(blob_.data() + offset, blob_.size() - offset)}});
  }
  template <typename Plain>
  void moments(const std::string& name, const Moments<Plain>& mo) {
    tensor(name + ".m", mo.m);
    tensor(name + ".v", mo.v);
    scalars_[name + ".step"] = mo.step;
  }
  void integer(const std::string& name, std::int64_t v) { scalars_[name] = v; }
  void real(const std::string& name, double v) { scalars_[name] = v; }
  void flag(const std::string& name, bool v) { scalars_[name] = v; }
  void rng(const std::string& name, const Rng& r) {
    ojson words = ojson::array();
    for (auto w : r.state()) words.push_back(hex64(w));
    scalars_[name] = words;
  }

  std::vector<unsigned char> blob_;
  ojson index_ = ojson::array();
  ojson scalars_ = ojson::object();
};

/// Reads tensors by name from the blob, verifying shape and CRC32.
class Reader {
 public:
  Reader(const nlohmann::json& index, const nlohmann::json& scalars,
         const std::vector<unsigned char>& blob, std::string where)
      : scalars_(scalars), blob_(blob), where_(std::move(where)) {
    for (const auto& e : index) entries_.emplace(e.at("name").get<std::string>(), e);
  }

  template <typename Plain>
  void tensor(const std::string& name, Plain& t) {
    auto it = entries_.find(name);
    if (it == entries_.end()) fail(LoadError::Kind::Malformed, "missing tensor " + name);
    const auto& e = it->second;
    const auto rows = e.at("rows").get<Index>();
    const auto cols = e.at("cols").get<Index>();
    const auto offset = e.at("offset").get<std::size_t>();
    const auto crc = e.at("crc32").get<std::uint32_t>();
    if (rows != t.rows() || cols != t.cols()) {
      fail(LoadError::Kind::Malformed, "tensor " + name + " has shape " + std::to_string(rows) +
                                           "x" + std::to_string(cols) + ", expected " +
                                           shape_str(t));
    }
    const std::size_t bytes = static_cast<std::size_t>(rows * cols) * 8;
    if (offset + bytes > blob_.size()) {
      fail(LoadError::Kind::Truncated, "tensor " + name + " extends past the end of the blob");
    }
    if (crc32_of(blob_.data() + offset, bytes) != crc) {
      fail(LoadError::Kind::Checksum, "CRC32 mismatch in tensor " + name);
    }
    const Matrix m = decode_payload(blob_.data() + offset, rows, cols);
    for (Index i = 0; i < m.size(); ++i) t.data()[i] = m.data()[i];
  }
  template <typename Plain>
  void moments(const std::string& name, Moments<Plain>& mo) {
    tensor(name + ".m", mo.m);
    tensor(name + ".v", mo.v);
    mo.step = scalar(name + ".step").template get<std::int64_t>();
  }
  void integer(const std::string& name, std::int64_t& v) { v = scalar(name).get<std::int64_t>(); }
  void real(const std::string& name, double& v) { v = scalar(name).get<double>(); }
  void flag(const std::string& name, bool& v) { v = scalar(name).get<bool>(); }
  void rng(const std::string& name, Rng& r) {
    Rng::State s{};
    const auto& words = scalar(name);
    if (!words.is_array() || words.size() != s.size()) {
      fail(LoadError::Kind::Malformed, "bad rng state " + name);
    }
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = std::stoull(words[i].get<std::string>(), nullptr, 16);
    }
    r.set_state(s);
  }

 private:
  const nlohmann::json& scalar(const std::string& name) {
    auto it = scalars_.find(name);
    if (it == scalars_.end()) fail(LoadError::Kind::Malformed, "missing scalar " + name);
    return *it;
  }
  [[noreturn]] void fail(LoadError::Kind kind, const std::string& msg) {
    throw LoadError(kind, where_ + ": " + msg);
  }

  const nlohmann::json& scalars_;
  const std::vector<unsigned char>& blob_;
  std::string where_;
  std::map<std::string, nlohmann::json> entries_;
};

/// Single traversal shared by save and load so the two can never disagree.
template <typename Archive, typename LearnerT>
void visit(Archive& ar, LearnerT& l) {
  auto& m = l.model;
  auto& mo = l.moments;
  ar.tensor("model.w_in", m.w_in);
  ar.tensor("model.b_in", m.b_in);
  ar.tensor("model.class_embeddings", m.class_embeddings);
  ar.real("model.temperature", m.temperature);
  ar.moments("opt.w_in", mo.w_in);
  ar.moments("opt.b_in", mo.b_in);
  for (std::size_t b = 0; b < m.blocks.size(); ++b) {
    auto& blk = m.blocks[b];
    auto& bm = mo.blocks[b];
    const std::string p = "block" + std::to_string(b) + ".";
    ar.tensor(p + "ln.gamma", blk.ln.gamma);
    ar.tensor(p + "ln.beta", blk.ln.beta);
    ar.real(p + "ln.eps", blk.ln.eps);
    ar.tensor(p + "mlp.w1", blk.mlp.w1);
    ar.tensor(p + "mlp.b1", blk.mlp.b1);
    ar.tensor(p + "mlp.w2", blk.mlp.w2);
    ar.tensor(p + "mlp.b2", blk.mlp.b2);
    ar.moments("opt." + p + "ln.gamma", bm.gamma);
    ar.moments("opt." + p + "ln.beta", bm.beta);
    ar.moments("opt." + p + "mlp.w1", bm.w1);
    ar.moments("opt." + p + "mlp.b1", bm.b1);
    ar.moments("opt." + p + "mlp.w2", bm.w2);
    ar.moments("opt." + p + "mlp.b2", bm.b2);
    for (std::size_t e = 0; e < blk.experts.size(); ++e) {
      const std::string q = p + "expert" + std::to_string(e) + ".";
      ar.tensor(q + "down", blk.experts[e].down);
      ar.tensor(q + "up", blk.experts[e].up);
      ar.flag(q + "frozen", blk.experts[e].frozen);
      ar.integer(q + "count", blk.counter.counts[e]);
      ar.moments("opt." + q + "down", bm.experts[e].down);
      ar.moments("opt." + q + "up", bm.experts[e].up);
    }
    for (auto& [t, r] : blk.routers) {
      const std::string q = p + "router" + std::to_string(t) + ".";
      ar.tensor(q + "weights", r.weights);
      ar.tensor(q + "bias", r.bias);
      ar.moments("opt." + q + "weights", bm.routers.at(t).weights);
      ar.moments("opt." + q + "bias", bm.routers.at(t).bias);
    }
  }
  for (auto& ae : l.autoencoders) {
    const std::string q = "autoencoder" + std::to_string(ae.task) + ".";
    ar.tensor(q + "encoder", ae.encoder);
    ar.tensor(q + "decoder", ae.decoder);
    ar.real(q + "threshold", ae.threshold);
  }
  ar.rng("rng.model_init", l.init_rng);
  ar.rng("rng.batching", l.batch_rng);
  ar.rng("rng.autoencoders", l.ae_rng);
}

ojson eval_json(const CheckpointEval& e) {
  return {{"accuracy", e.accuracy},
          {"oracle_accuracy", e.oracle_accuracy},
          {"routed_correct", e.routed_correct},
          {"routed_ood", e.routed_ood},
          {"train_accuracy", e.train_accuracy}};
}

CheckpointEval eval_from_json(const nlohmann::json& j) {
  CheckpointEval e;
  e.accuracy = j.at("accuracy").get<std::vector<double>>();
  e.oracle_accuracy = j.at("oracle_accuracy").get<std::vector<double>>();
  e.routed_correct = j.at("routed_correct").get<std::vector<double>>();
  e.routed_ood = j.at("routed_ood").get<std::vector<double>>();
  e.train_accuracy = j.at("train_accuracy");
  return e;
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  try {
    std::filesystem::create_directories(dir);
  } catch (const std::filesystem::filesystem_error& e) {
    throw IoError(dir.string() + ": " + e.what());
  }
  const Learner& l = ckpt.learner;
  Writer w;
  visit(w, l);

  ojson manifest;
  manifest["format"] = "moeforge-checkpoint";
  manifest["format_version"] = ckpt.format_version;
  manifest["task_index"] = l.tasks_done;
  manifest["input_dim"] = l.model.input_dim();
  manifest["class_pool"] = l.model.class_embeddings.rows();
  manifest["config"] = {{"train", train_config_json(l.config)}, {"suite", to_json(ckpt.suite)}};
  manifest["task_names"] = ckpt.task_names;
  manifest["eval"] = eval_json(ckpt.eval);
  manifest["blob"] = {{"file", "tensors.bin"},
                      {"bytes", w.blob_.size()},
                      {"crc32", crc32_of(w.blob_.data(), w.blob_.size())}};
  manifest["scalars"] = w.scalars_;
  manifest["tensors"] = w.index_;

  write_file_bytes(dir / "tensors.bin", w.blob_);
  write_text_file(dir / "manifest.json", manifest.dump(1) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const std::string where = dir.string();
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(LoadError::Kind::Malformed, where + ": manifest: " + e.what());
  }
  try {
    if (manifest.at("format") != "moeforge-checkpoint") {
      throw LoadError(LoadError::Kind::Malformed, where + ": not a checkpoint manifest");
    }
    const int version = manifest.at("format_version");
    if (version != kCheckpointFormatVersion) {
      throw LoadError(LoadError::Kind::Version,
                      where + ": format version " + std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointFormatVersion));
    }
    const auto blob = read_file_bytes(dir / manifest.at("blob").at("file").get<std::string>());
    const auto expected_bytes = manifest.at("blob").at("bytes").get<std::size_t>();
    if (blob.size() < expected_bytes) {
      throw LoadError(LoadError::Kind::Truncated,
                      where + ": blob has " + std::to_string(blob.size()) + " bytes, expected " +
                          std::to_string(expected_bytes));
    }
    if (blob.size() > expected_bytes) {
      throw LoadError(LoadError::Kind::Malformed, where + ": blob has trailing bytes");
    }

    Checkpoint ckpt;
    ckpt.format_version = version;
    ckpt.suite = suite_config_from_json(manifest.at("config").at("suite"));
    ckpt.task_names = manifest.at("task_names").get<std::vector<std::string>>();
    ckpt.eval = eval_from_json(manifest.at("eval"));
    const TrainConfig cfg = train_config_from_json(manifest.at("config").at("train"));
    const int tasks_done = manifest.at("task_index");
    Learner l = make_learner(cfg, manifest.at("input_dim").get<Index>(),
                             manifest.at("class_pool").get<int>());
    // Shape skeleton; every value is overwritten below.
    Rng scratch(0, 0);
    for (int t = 0; t < tasks_done; ++t) {
      add_task_router(l.model, t, scratch);
      for (std::size_t b = 0; b < l.model.blocks.size(); ++b) {
        l.moments.blocks[b].routers.emplace(t, RouterMoments(l.model.blocks[b].routers.at(t)));
      }
      TaskAutoencoder ae;
      ae.task = t;
      ae.encoder = Matrix::Zero(l.model.input_dim(), cfg.autoencoder.bottleneck);
      ae.decoder = Matrix::Zero(cfg.autoencoder.bottleneck, l.model.input_dim());
      ae.trained = true;
      l.autoencoders.push_back(std::move(ae));
    }
    l.tasks_done = tasks_done;
    Reader r(manifest.at("tensors"), manifest.at("scalars"), blob, where);
    visit(r, l);
    ckpt.learner = std::move(l);
    return ckpt;
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(LoadError::Kind::Malformed, where + ": manifest: " + e.what());
  } catch (const ConfigError& e) {
    throw LoadError(LoadError::Kind::Malformed, where + ": " + e.what());
  }
}

}  // namespace moeforge
