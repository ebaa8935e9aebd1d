#include "lfba/predictor.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

#include "lfba/error.hpp"
#include "lfba/random.hpp"

namespace lfba {

PredictorModel::PredictorModel(int n, int feature_dim) : n_(n), d_(feature_dim) {
  check_switch_count(n);
  if (feature_dim < 1) throw ValidationError("feature dimension must be >= 1");
  weights_.assign(static_cast<std::size_t>(num_classes()) * static_cast<std::size_t>(d_), 0.0);
  bias_.assign(static_cast<std::size_t>(num_classes()), 0.0);
}

std::vector<double> PredictorModel::logits(std::span<const double> features) const {
  if (features.size() != static_cast<std::size_t>(d_)) {
    throw ValidationError("expected " + std::to_string(d_) + " features, got " +
                          std::to_string(features.size()));
  }
  std::vector<double> z(bias_.begin(), bias_.end());
  for (int k = 0; k < num_classes(); ++k) {
    const double* row = &weights_[static_cast<std::size_t>(k * d_)];
    double acc = 0.0;
    for (int j = 0; j < d_; ++j) acc += row[j] * features[static_cast<std::size_t>(j)];
    z[static_cast<std::size_t>(k)] += acc;
  }
  return z;
}

std::vector<double> softmax(std::span<const double> logits) {
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - top);
    sum += p[k];
  }
  for (double& v : p) v /= sum;
  return p;
}

int argmax_index(std::span<const double> values) {
  // max_element returns the first maximum.
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

Prediction make_prediction(std::vector<double> probs, int n, double tolerance) {
  check_switch_count(n);
  if (probs.size() != static_cast<std::size_t>(1 << n)) {
    throw ValidationError("expected " + std::to_string(1 << n) + " probabilities, got " +
                          std::to_string(probs.size()));
  }
  double sum = 0.0;
  for (double p : probs) {
    if (!std::isfinite(p) || p < 0.0) throw ValidationError("probabilities must be finite and >= 0");
    sum += p;
  }
  if (std::abs(sum - 1.0) > tolerance) {
    throw ValidationError("probabilities sum to " + std::to_string(sum) + ", not 1");
  }
  const int top = argmax_index(probs);
  return Prediction{std::move(probs), ClassLabel{top, n}};
}

Prediction predict(const PredictorModel& model, std::span<const double> features) {
  for (double f : features) {
    if (!std::isfinite(f)) throw ValidationError("non-finite feature value");
  }
  std::vector<double> probs = softmax(model.logits(features));
  const int top = argmax_index(probs);
  return Prediction{std::move(probs), ClassLabel{top, model.n()}};
}

LossGradient loss_and_gradient(const PredictorModel& model, std::span<const Example> batch) {
  if (batch.empty()) throw ValidationError("empty batch");
  const int K = model.num_classes();
  const int d = model.feature_dim();
  LossGradient out;
  out.grad_weights.assign(static_cast<std::size_t>(K * d), 0.0);
  out.grad_bias.assign(static_cast<std::size_t>(K), 0.0);

  const double inv = 1.0 / static_cast<double>(batch.size());
  for (const Example& ex : batch) {
    if (ex.label < 0 || ex.label >= K) {
      throw ValidationError("label " + std::to_string(ex.label) + " outside [0, " +
                            std::to_string(K) + ")");
    }
    const std::vector<double> z = model.logits(ex.features);
    const double top = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - top);
    const double log_norm = top + std::log(sum);
    out.loss -= (z[static_cast<std::size_t>(ex.label)] - log_norm) * inv;

    for (int k = 0; k < K; ++k) {
      const double p = std::exp(z[static_cast<std::size_t>(k)] - log_norm);
      const double delta = (p - (k == ex.label ? 1.0 : 0.0)) * inv;
      out.grad_bias[static_cast<std::size_t>(k)] += delta;
      double* row = &out.grad_weights[static_cast<std::size_t>(k * d)];
      for (int j = 0; j < d; ++j) row[j] += delta * ex.features[static_cast<std::size_t>(j)];
    }
  }
  return out;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must be in [0,1)");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
}

namespace {

// Per-feature z-scoring used only while optimizing. z = (f - mean) / scale
// turns W z + b into (W / scale) f + (b - W mean / scale), so the trained
// model is folded back onto raw features and nothing downstream changes.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Standardizer fit(const Dataset& dataset) {
    const auto d = static_cast<std::size_t>(dataset.d());
    Standardizer s{std::vector<double>(d, 0.0), std::vector<double>(d, 1.0)};
    if (dataset.empty()) return s;
    const double count = static_cast<double>(dataset.size());
    for (const auto& r : dataset.records()) {
      for (std::size_t j = 0; j < d; ++j) s.mean[j] += r.features[j];
    }
    for (double& m : s.mean) m /= count;
    std::vector<double> var(d, 0.0);
    for (const auto& r : dataset.records()) {
      for (std::size_t j = 0; j < d; ++j) {
        const double dev = r.features[j] - s.mean[j];
        var[j] += dev * dev;
      }
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double sd = std::sqrt(var[j] / count);
      // Constant features stay unscaled.
      s.scale[j] = sd > 1e-12 ? sd : 1.0;
    }
    return s;
  }

  std::vector<double> apply(std::span<const double> f) const {
    std::vector<double> z(f.size());
    for (std::size_t j = 0; j < f.size(); ++j) z[j] = (f[j] - mean[j]) / scale[j];
    return z;
  }

  void fold_into(PredictorModel& model) const {
    for (int k = 0; k < model.num_classes(); ++k) {
      double shift = 0.0;
      for (int j = 0; j < model.feature_dim(); ++j) {
        double& w = model.weight(k, j);
        w /= scale[static_cast<std::size_t>(j)];
        shift += w * mean[static_cast<std::size_t>(j)];
      }
      model.bias()[static_cast<std::size_t>(k)] -= shift;
    }
  }
};

}  // namespace

TrainResult train(const Dataset& dataset, const TrainConfig& config) {
  config.validate();
  if (dataset.empty()) throw ValidationError("cannot train on an empty dataset");

  TrainResult result{PredictorModel(dataset.n(), dataset.d()), {}};
  PredictorModel& model = result.model;
  const int K = model.num_classes();
  const Standardizer scaler = Standardizer::fit(dataset);
  std::vector<std::vector<double>> scaled;
  scaled.reserve(dataset.size());
  std::vector<Example> examples;
  examples.reserve(dataset.size());
  for (const auto& r : dataset.records()) {
    if (r.label.value < 0 || r.label.value >= K) {
      throw ValidationError("label " + std::to_string(r.label.value) + " out of range");
    }
    scaled.push_back(config.standardize ? scaler.apply(r.features) : r.features);
  }
  for (std::size_t i = 0; i < scaled.size(); ++i) {
    examples.push_back(Example{scaled[i], dataset[i].label.value});
  }

  std::vector<double> vel_w(model.weights().size(), 0.0);
  std::vector<double> vel_b(model.bias().size(), 0.0);
  Rng rng(config.seed);
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<Example>(examples));
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < examples.size(); start += batch) {
      const std::size_t len = std::min(batch, examples.size() - start);
      const LossGradient g =
          loss_and_gradient(model, std::span<const Example>(examples).subspan(start, len));
      epoch_loss += g.loss * static_cast<double>(len);

      auto w = model.weights();
      for (std::size_t i = 0; i < w.size(); ++i) {
        vel_w[i] = config.momentum * vel_w[i] + g.grad_weights[i];
        w[i] -= config.learning_rate * vel_w[i];
      }
      auto b = model.bias();
      for (std::size_t i = 0; i < b.size(); ++i) {
        vel_b[i] = config.momentum * vel_b[i] + g.grad_bias[i];
        b[i] -= config.learning_rate * vel_b[i];
      }
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(examples.size()));
  }
  if (config.standardize) scaler.fold_into(model);
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'L', 'F', 'B', 'A'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xFFU));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t take(int width) {
    if (pos_ + static_cast<std::size_t>(width) > bytes_.size()) {
      throw ParseError("checkpoint truncated at byte " + std::to_string(pos_));
    }
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_++])) << (8 * i);
    }
    return v;
  }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  double f64() { return std::bit_cast<double>(take(8)); }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_model(const PredictorModel& model) {
  std::string out(kMagic, sizeof kMagic);
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(model.n()));
  put_u32(out, static_cast<std::uint32_t>(model.feature_dim()));
  put_u32(out, static_cast<std::uint32_t>(model.num_classes()));
  for (double w : model.weights()) put_f64(out, w);
  for (double b : model.bias()) put_f64(out, b);
  return out;
}

PredictorModel deserialize_model(std::string_view bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw ParseError("not an LFBA checkpoint");
  }
  Reader in(bytes.substr(4));
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t n = in.u32();
  const std::uint32_t d = in.u32();
  const std::uint32_t k = in.u32();
  if (n < 1 || n > static_cast<std::uint32_t>(kMaxSwitches) || k != (1U << n) || d == 0 ||
      d > (1U << 20)) {
    throw ParseError("inconsistent checkpoint header (n=" + std::to_string(n) +
                     ", d=" + std::to_string(d) + ", K=" + std::to_string(k) + ")");
  }
  PredictorModel model(static_cast<int>(n), static_cast<int>(d));
  for (double& w : model.weights()) w = in.f64();
  for (double& b : model.bias()) b = in.f64();
  if (!in.done()) throw ParseError("trailing bytes after checkpoint");
  for (double w : model.weights()) {
    if (!std::isfinite(w)) throw ParseError("checkpoint holds non-finite weights");
  }
  for (double b : model.bias()) {
    if (!std::isfinite(b)) throw ParseError("checkpoint holds non-finite bias");
  }
  return model;
}

void save_model(const PredictorModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  const std::string bytes = serialize_model(model);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write to " + path.string() + " failed");
}

PredictorModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_model(buf.str());
}

}  // namespace lfba
