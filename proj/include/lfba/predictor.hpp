#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "lfba/codec.hpp"
#include "lfba/dataset.hpp"

namespace lfba {

struct SceneFrame;

// Linear softmax classifier over frame features: probs = softmax(W f + b),
// one row of W per switch combination.
class PredictorModel {
 public:
  // Zero weights and bias.
  PredictorModel(int n, int feature_dim);

  int n() const { return n_; }
  int feature_dim() const { return d_; }
  int num_classes() const { return 1 << n_; }

  // K x d, row-major.
  std::span<double> weights() { return weights_; }
  std::span<const double> weights() const { return weights_; }
  std::span<double> bias() { return bias_; }
  std::span<const double> bias() const { return bias_; }

  double& weight(int k, int j) { return weights_[static_cast<std::size_t>(k * d_ + j)]; }
  double weight(int k, int j) const { return weights_[static_cast<std::size_t>(k * d_ + j)]; }

  std::vector<double> logits(std::span<const double> features) const;

  friend bool operator==(const PredictorModel&, const PredictorModel&) = default;

 private:
  int n_;
  int d_;
  std::vector<double> weights_;
  std::vector<double> bias_;
};

struct Prediction {
  std::vector<double> probs;
  ClassLabel argmax;

  friend bool operator==(const Prediction&, const Prediction&) = default;
};

// Numerically stable softmax (max-shifted).
std::vector<double> softmax(std::span<const double> logits);

// Index of the largest entry; the lowest index wins ties.
int argmax_index(std::span<const double> values);

// Validates length 2^n, non-negative entries and sum 1 +/- tolerance.
Prediction make_prediction(std::vector<double> probs, int n, double tolerance = 1e-9);

Prediction predict(const PredictorModel& model, std::span<const double> features);

struct Example {
  std::span<const double> features;
  int label;
};

struct LossGradient {
  double loss = 0.0;
  std::vector<double> grad_weights;  // K x d, row-major
  std::vector<double> grad_bias;
};

// Mean cross-entropy over the batch and its gradient w.r.t. W and b.
LossGradient loss_and_gradient(const PredictorModel& model, std::span<const Example> batch);

struct TrainConfig {
  double learning_rate = 0.001;
  double momentum = 0.9;
  int batch_size = 10;
  int epochs = 25;
  std::uint64_t seed = 0;
  // Optimize in z-scored feature space, then fold the affine map back into
  // W and b. The returned model always consumes raw features.
  bool standardize = true;

  void validate() const;
};

struct TrainResult {
  PredictorModel model;
  // Mean training loss of each epoch.
  std::vector<double> loss_trace;
};

// Mini-batch SGD with heavy-ball momentum (v = mu v + g; w -= lr v) from a
// zero model. Records are reshuffled every epoch; the last partial batch is
// kept.
TrainResult train(const Dataset& dataset, const TrainConfig& config);

// Little-endian: "LFBA", u32 version, u32 n, u32 d, u32 K, K*d f64 weights,
// K f64 bias.
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_model(const PredictorModel& model, const std::filesystem::path& path);
PredictorModel load_model(const std::filesystem::path& path);
std::string serialize_model(const PredictorModel& model);
PredictorModel deserialize_model(std::string_view bytes);

struct RemoteEndpoint {
  std::string url;  // http://host:port/path
  std::chrono::milliseconds timeout{2000};
};

// POSTs {"features": [...], "n": n} and expects {"probs": [...]} with 2^n
// entries summing to 1 +/- 1e-6. Throws PredictorUnavailable on transport
// failure or timeout, ValidationError on a malformed answer.
Prediction remote_predict(const RemoteEndpoint& endpoint, const SceneFrame& frame, int n);

}  // namespace lfba
