#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>
#include <numeric>

#include <gtest/gtest.h>

#include "lfba/error.hpp"
#include "lfba/predictor.hpp"
#include "lfba/random.hpp"
#include "lfba/scene_sim.hpp"
#include "oracles.hpp"

using namespace lfba;

namespace {

const Dataset& default_dataset() {
  static const Dataset ds = generate_dataset(kDefaultRuns, kDefaultScale, GeneratorConfig{});
  return ds;
}

PredictorModel random_model(int n, int d, Rng& rng, double scale = 0.5) {
  PredictorModel m(n, d);
  for (double& w : m.weights()) w = scale * rng.gaussian();
  for (double& b : m.bias()) b = scale * rng.gaussian();
  return m;
}

}  // namespace

TEST(Predict, ZeroModelIsUniform) {
  const PredictorModel m(4, 64);
  const Prediction p = predict(m, std::vector<double>(64, 0.3));
  ASSERT_EQ(p.probs.size(), 16u);
  for (double v : p.probs) EXPECT_DOUBLE_EQ(v, 1.0 / 16.0);
  EXPECT_EQ(p.argmax.value, 0);
}

TEST(Predict, RejectsBadFeatures) {
  const PredictorModel m(4, 64);
  EXPECT_THROW(predict(m, std::vector<double>(63, 0.0)), ValidationError);
  std::vector<double> f(64, 0.0);
  f[5] = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(predict(m, f), ValidationError);
  f[5] = std::numeric_limits<double>::infinity();
  EXPECT_THROW(predict(m, f), ValidationError);
}

TEST(Predict, ProbabilitiesNormalizedForRandomModels) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(6));
    const PredictorModel m = random_model(n, 8, rng, 5.0);
    std::vector<double> f(8);
    for (double& v : f) v = rng.uniform();
    const Prediction p = predict(m, f);
    const double sum = std::accumulate(p.probs.begin(), p.probs.end(), 0.0);
    EXPECT_NEAR(sum, 1.0, 1e-9);
    for (double v : p.probs) EXPECT_GE(v, 0.0);
    EXPECT_EQ(p.argmax.value, argmax_index(p.probs));
  }
}

TEST(Softmax, TranslationInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> z(16);
    for (double& v : z) v = 10.0 * rng.gaussian();
    const double c = 100.0 * rng.gaussian();
    std::vector<double> shifted = z;
    for (double& v : shifted) v += c;
    const auto a = softmax(z);
    const auto b = softmax(shifted);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
    EXPECT_EQ(argmax_index(a), argmax_index(b));
  }
}

TEST(Softmax, ArgmaxTieTakesLowestIndex) {
  EXPECT_EQ(argmax_index(std::vector<double>{0.1, 0.4, 0.4, 0.1}), 1);
  EXPECT_EQ(argmax_index(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 0);
}

TEST(Softmax, MakePredictionValidates) {
  EXPECT_THROW(make_prediction({0.25, 0.25}, 2), ValidationError);
  EXPECT_THROW(make_prediction({0.25, 0.25, 0.25, 0.25 - 0.5}, 2), ValidationError);
  EXPECT_THROW(make_prediction({0.125, 0.125, 0.125, 0.125}, 2), ValidationError);
  EXPECT_NO_THROW(make_prediction({0.25, 0.25, 0.25, 0.25 + 1e-7}, 2, 1e-6));
}

TEST(Loss, ZeroModelSingleSample) {
  const PredictorModel m(4, 3);
  const std::vector<double> f{0.2, 0.5, 0.9};
  const Example ex{f, 7};
  const LossGradient g = loss_and_gradient(m, std::span<const Example>(&ex, 1));
  EXPECT_NEAR(g.loss, std::log(16.0), 1e-12);
  for (int k = 0; k < 16; ++k) {
    const double expect = 1.0 / 16.0 - (k == 7 ? 1.0 : 0.0);
    EXPECT_NEAR(g.grad_bias[static_cast<std::size_t>(k)], expect, 1e-15);
    for (int j = 0; j < 3; ++j) {
      EXPECT_NEAR(g.grad_weights[static_cast<std::size_t>(k * 3 + j)], expect * f[static_cast<std::size_t>(j)], 1e-15);
    }
  }
}

TEST(Loss, Errors) {
  const PredictorModel m(2, 3);
  EXPECT_THROW(loss_and_gradient(m, {}), ValidationError);
  const std::vector<double> f{0.1, 0.2, 0.3};
  const Example bad{f, 4};
  EXPECT_THROW(loss_and_gradient(m, std::span<const Example>(&bad, 1)), ValidationError);
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  Rng rng(2024);
  for (int trial = 0; trial < 12; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(4));
    const int d = 4 + static_cast<int>(rng.below(20));
    const PredictorModel m = random_model(n, d, rng);
    const int batch = 1 + static_cast<int>(rng.below(10));
    std::vector<std::vector<double>> xs(static_cast<std::size_t>(batch));
    std::vector<int> ys;
    std::vector<Example> exs;
    for (auto& x : xs) {
      x.resize(static_cast<std::size_t>(d));
      for (double& v : x) v = rng.uniform();
      ys.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(m.num_classes()))));
    }
    for (std::size_t i = 0; i < xs.size(); ++i) exs.push_back({xs[i], ys[i]});

    const LossGradient g = loss_and_gradient(m, exs);
    EXPECT_NEAR(g.loss, static_cast<double>(oracle::loss(m, xs, ys)), 1e-12);
    std::vector<double> analytic = g.grad_weights;
    analytic.insert(analytic.end(), g.grad_bias.begin(), g.grad_bias.end());
    const auto numeric = oracle::numeric_gradient(m, xs, ys, 1e-5);
    ASSERT_EQ(analytic.size(), numeric.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      const double scale = std::max({std::abs(analytic[i]), std::abs(numeric[i]), 1e-8});
      worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / scale);
    }
    EXPECT_LT(worst, 1e-4) << "trial " << trial;
  }
}

TEST(Train, SeparableToySetReachesFullAccuracy) {
  // Two clusters in the unit square on either side of x + y = 1.
  Dataset ds(1, 2);
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  Rng rng(8);
  for (int i = 0; i < 100; ++i) {
    const int cls = i < 50 ? 0 : 1;
    double x;
    double y;
    do {
      x = rng.uniform();
      y = rng.uniform();
    } while (cls == 0 ? x + y > 0.75 : x + y < 1.25);
    xs.push_back({x, y});
    ys.push_back(cls);
    ds.append(make_record({x, y}, ClassLabel{cls, 1}, 1, i, SampleSource::kSynthetic));
  }
  ASSERT_TRUE(oracle::linearly_separable_2d(xs, ys));

  const TrainResult r = train(ds, TrainConfig{});
  int hits = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) hits += predict(r.model, xs[i]).argmax.value == ys[i];
  EXPECT_EQ(hits, 100);
}

TEST(Train, DeterministicForSeed) {
  const Dataset& ds = default_dataset();
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.seed = 4;
  const TrainResult a = train(ds, cfg);
  const TrainResult b = train(ds, cfg);
  EXPECT_EQ(a.model, b.model);
  EXPECT_EQ(a.loss_trace, b.loss_trace);
  cfg.seed = 5;
  EXPECT_NE(train(ds, cfg).model, a.model);
}

TEST(Train, LossDecreasesOverFirstEpochs) {
  const TrainResult r = train(default_dataset(), TrainConfig{});
  ASSERT_EQ(r.loss_trace.size(), 25u);
  for (int e = 1; e < 5; ++e) EXPECT_LT(r.loss_trace[e], r.loss_trace[e - 1]) << "epoch " << e;
  EXPECT_LT(r.loss_trace.back(), r.loss_trace.front());
}

TEST(Train, RawFeaturePathAlsoLearns) {
  TrainConfig cfg;
  cfg.standardize = false;
  const TrainResult r = train(default_dataset(), cfg);
  for (int e = 1; e < 5; ++e) EXPECT_LT(r.loss_trace[e], r.loss_trace[e - 1]);
}

TEST(Train, HeldInPianoStartFramePredictsSpotlight) {
  const Dataset& ds = default_dataset();
  const TrainResult r = train(ds, TrainConfig{});
  int checked = 0;
  for (const auto& rec : ds.records()) {
    if (rec.scene != "A41") continue;
    EXPECT_EQ(format_label(predict(r.model, rec.features).argmax), "1000");
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(Train, Errors) {
  EXPECT_THROW(train(Dataset(4, 64), TrainConfig{}), ValidationError);
  TrainConfig bad;
  bad.learning_rate = 0.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = TrainConfig{};
  bad.momentum = 1.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = TrainConfig{};
  bad.batch_size = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = TrainConfig{};
  bad.epochs = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Checkpoint, LayoutIsLittleEndian) {
  PredictorModel m(2, 3);
  m.weight(1, 2) = 1.5;
  m.bias()[3] = -2.0;
  const std::string bytes = serialize_model(m);
  ASSERT_EQ(bytes.size(), 4 + 4 * 4 + (4 * 3 + 4) * 8u);
  EXPECT_EQ(bytes.substr(0, 4), "LFBA");
  auto u32 = [&](std::size_t at) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = v << 8 | static_cast<unsigned char>(bytes[at + static_cast<std::size_t>(i)]);
    return v;
  };
  auto f64 = [&](std::size_t at) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = v << 8 | static_cast<unsigned char>(bytes[at + static_cast<std::size_t>(i)]);
    double d;
    std::memcpy(&d, &v, sizeof d);
    return d;
  };
  EXPECT_EQ(u32(4), 1u);
  EXPECT_EQ(u32(8), 2u);
  EXPECT_EQ(u32(12), 3u);
  EXPECT_EQ(u32(16), 4u);
  EXPECT_EQ(f64(20 + (1 * 3 + 2) * 8), 1.5);
  EXPECT_EQ(f64(20 + 12 * 8 + 3 * 8), -2.0);
}

TEST(Checkpoint, RoundTripIsBitExact) {
  Rng rng(77);
  const PredictorModel m = random_model(4, 64, rng);
  EXPECT_EQ(deserialize_model(serialize_model(m)), m);
  const auto path = std::filesystem::temp_directory_path() / "lfba_ckpt_test.bin";
  save_model(m, path);
  const PredictorModel back = load_model(path);
  std::filesystem::remove(path);
  ASSERT_EQ(back, m);
  for (std::size_t i = 0; i < m.weights().size(); ++i) {
    EXPECT_EQ(std::memcmp(&back.weights()[i], &m.weights()[i], sizeof(double)), 0);
  }
}

TEST(Checkpoint, RejectsCorruptInput) {
  const std::string good = serialize_model(PredictorModel(2, 3));
  EXPECT_THROW(deserialize_model(good.substr(0, good.size() - 1)), ParseError);
  EXPECT_THROW(deserialize_model(good + "x"), ParseError);
  std::string magic = good;
  magic[0] = 'X';
  EXPECT_THROW(deserialize_model(magic), ParseError);
  std::string version = good;
  version[4] = 2;
  EXPECT_THROW(deserialize_model(version), ParseError);
  std::string k = good;
  k[16] = 5;
  EXPECT_THROW(deserialize_model(k), ParseError);
  PredictorModel nan(2, 3);
  nan.weight(0, 0) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_THROW(deserialize_model(serialize_model(nan)), ParseError);
  EXPECT_THROW(load_model("/nonexistent/lfba.bin"), Error);
}
