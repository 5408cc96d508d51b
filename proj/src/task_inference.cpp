#include "moeforge/task_inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "moeforge/errors.hpp"
#include "moeforge/numerics.hpp"
#include "moeforge/optimizer.hpp"

namespace moeforge {

double reconstruction_loss(const TaskAutoencoder& ae, const Vector& x) {
  if (x.size() != ae.encoder.rows()) {
    throw DimensionError("reconstruction_loss: input length " + std::to_string(x.size()) +
                         " vs autoencoder input " + std::to_string(ae.encoder.rows()));
  }
  const Vector code = ae.encoder.transpose() * x;
  const Vector recon = ae.decoder.transpose() * code;
  return (recon - x).squaredNorm() / static_cast<double>(x.size());
}

Vector reconstruction_losses(const TaskAutoencoder& ae, const Matrix& data) {
  if (data.cols() != ae.encoder.rows()) {
    throw DimensionError("reconstruction_losses: data " + shape_str(data) +
                         " vs encoder " + shape_str(ae.encoder));
  }
  const Matrix residual = data * ae.encoder * ae.decoder - data;
  return residual.rowwise().squaredNorm() / static_cast<double>(data.cols());
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw ArgumentError("percentile: empty input");
  if (!(p >= 0.0 && p <= 100.0)) throw ArgumentError("percentile: p outside [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = p / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

TaskAutoencoder train_autoencoder(TaskId task, const Matrix& data, const AutoencoderConfig& cfg,
                                  Rng& rng) {
  if (data.rows() == 0) throw ArgumentError("train_autoencoder: empty data");
  const Index d = data.cols();
  const Index a = cfg.bottleneck;
  if (a < 1 || a >= d) {
    throw ConfigError("train_autoencoder: bottleneck " + std::to_string(a) +
                      " must be in [1, input_dim=" + std::to_string(d) + ")");
  }
  if (cfg.epochs < 0) throw ConfigError("train_autoencoder: epochs must be >= 0");

  TaskAutoencoder ae;
  ae.task = task;
  ae.encoder.resize(d, a);
  fill_normal(ae.encoder, rng, 1.0 / std::sqrt(static_cast<double>(d)));
  ae.decoder.resize(a, d);
  fill_normal(ae.decoder, rng, 1.0 / std::sqrt(static_cast<double>(a)));

  AdamWConfig opt;
  opt.lr = cfg.lr;
  opt.weight_decay = 0.0;
  Moments<Matrix> enc_m(ae.encoder), dec_m(ae.decoder);
  const double scale = 2.0 / (static_cast<double>(data.rows()) * static_cast<double>(d));
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const Matrix code = data * ae.encoder;
    const Matrix residual = code * ae.decoder - data;
    const Matrix d_recon = scale * residual;
    const Matrix g_dec = code.transpose() * d_recon;
    const Matrix g_enc = data.transpose() * (d_recon * ae.decoder.transpose());
    adamw_step(ae.decoder, g_dec, dec_m, opt);
    adamw_step(ae.encoder, g_enc, enc_m, opt);
  }
  require_finite(ae.encoder, "train_autoencoder encoder");
  require_finite(ae.decoder, "train_autoencoder decoder");

  const Vector losses = reconstruction_losses(ae, data);
  ae.threshold = percentile({losses.data(), losses.data() + losses.size()},
                            cfg.threshold_percentile);
  ae.trained = true;
  return ae;
}

TaskIdDecision infer_task(const Vector& x, std::span<const TaskAutoencoder> autoencoders,
                          double threshold) {
  if (autoencoders.empty()) throw StateError("infer_task: no autoencoders");
  TaskIdDecision dec;
  dec.threshold = threshold;
  dec.losses.reserve(autoencoders.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < autoencoders.size(); ++i) {
    if (!autoencoders[i].trained) {
      throw StateError("infer_task: autoencoder for task " +
                       std::to_string(autoencoders[i].task) + " is untrained");
    }
    dec.losses.push_back(reconstruction_loss(autoencoders[i], x));
    if (dec.losses[i] < dec.losses[best]) best = i;
  }
  if (!(dec.losses[best] > threshold)) dec.chosen = autoencoders[best].task;
  return dec;
}

TaskIdDecision infer_task(const Vector& x, std::span<const TaskAutoencoder> autoencoders) {
  if (autoencoders.empty()) throw StateError("infer_task: no autoencoders");
  TaskIdDecision dec = infer_task(x, autoencoders, std::numeric_limits<double>::infinity());
  const auto best = static_cast<std::size_t>(
      std::min_element(dec.losses.begin(), dec.losses.end()) - dec.losses.begin());
  dec.threshold = autoencoders[best].threshold;
  if (dec.losses[best] > dec.threshold) dec.chosen.reset();
  return dec;
}

}  // namespace moeforge
