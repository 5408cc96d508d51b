#pragma once

#include <optional>
#include <span>
#include <vector>

#include "moeforge/rng.hpp"
#include "moeforge/types.hpp"

namespace moeforge {

struct AutoencoderConfig {
  int bottleneck = 8;
  int epochs = 300;
  double lr = 1e-2;
  double threshold_percentile = 95.0;
};

/// Linear autoencoder x -> (x^T encoder) decoder. encoder is d_in x a,
/// decoder is a x d_in.
struct TaskAutoencoder {
  TaskId task = 0;
  Matrix encoder;
  Matrix decoder;
  double threshold = 0.0;  ///< out-of-distribution cutoff on the per-sample loss
  bool trained = false;
};

struct TaskIdDecision {
  std::optional<TaskId> chosen;  ///< nullopt means out of distribution
  std::vector<double> losses;    ///< parallel to the autoencoder list
  double threshold = 0.0;

  bool ood() const { return !chosen.has_value(); }
};

/// Mean squared reconstruction error of one sample.
double reconstruction_loss(const TaskAutoencoder& ae, const Vector& x);

/// Per-row losses for a sample matrix.
Vector reconstruction_losses(const TaskAutoencoder& ae, const Matrix& data);

/// Full-batch Adam on the mean reconstruction loss. The threshold is the
/// configured percentile (linear interpolation) of the final per-sample
/// training losses.
TaskAutoencoder train_autoencoder(TaskId task, const Matrix& data, const AutoencoderConfig& cfg,
                                  Rng& rng);

/// Linear-interpolated percentile, p in [0, 100].
double percentile(std::vector<double> values, double p);

/// Argmin over reconstruction losses (ties to the earlier entry). Out of
/// distribution when the minimum exceeds `threshold`; loss == threshold is in
/// distribution.
TaskIdDecision infer_task(const Vector& x, std::span<const TaskAutoencoder> autoencoders,
                          double threshold);

/// Same, with the chosen autoencoder's own stored threshold.
TaskIdDecision infer_task(const Vector& x, std::span<const TaskAutoencoder> autoencoders);

}  // namespace moeforge
