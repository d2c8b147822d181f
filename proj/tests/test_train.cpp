#include <gtest/gtest.h>

#include <cmath>

#include "lcsnn/common/rng.hpp"
#include "lcsnn/train/trainer.hpp"
#include "oracles.hpp"

using namespace lcsnn;

namespace {

std::vector<Sample> random_samples(Rng &rng, std::size_t n, int length, int classes = 4) {
  std::vector<Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].label = static_cast<int>(i % static_cast<std::size_t>(classes));
    out[i].input.resize(static_cast<std::size_t>(length));
    for (auto &v : out[i].input) v = static_cast<float>(static_cast<int>(rng.bounded(3)) - 1);
  }
  return out;
}

// Class-dependent spike patterns that a small net can separate.
std::vector<Sample> patterned_samples(Rng &rng, std::size_t n, int length) {
  std::vector<Sample> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 4);
    out[i].label = label;
    out[i].input.assign(static_cast<std::size_t>(length), 0.0f);
    const int start = label * length / 4;
    for (int j = start; j < start + length / 4; ++j)
      if (rng.bounded(4) != 0) out[i].input[static_cast<std::size_t>(j)] = 1.0f;
  }
  return out;
}

TrainConfig small_config(int epochs) {
  TrainConfig c;
  c.epochs = epochs;
  c.batch_size = 8;
  c.learning_rate = 5e-3;
  c.threads = 1;
  return c;
}

} // namespace

TEST(Surrogate, DocumentedValues) {
  LifParams p;
  const SurrogateSpec rect{SurrogateKind::Rectangular, 0.5};
  EXPECT_DOUBLE_EQ(surrogate_grad(1.0, p, rect), 1.0);
  EXPECT_DOUBLE_EQ(surrogate_grad(2.0, p, rect), 0.0);
  const SurrogateSpec fs{SurrogateKind::FastSigmoid, 4.0};
  EXPECT_DOUBLE_EQ(surrogate_grad(1.0, p, fs), 1.0);
  const SurrogateSpec at{SurrogateKind::Arctan, 2.0};
  EXPECT_DOUBLE_EQ(surrogate_grad(1.0, p, at), 1.0);
}

TEST(Surrogate, DerivativeMatchesPrimitiveDifferences) {
  Rng rng(3);
  for (int i = 0; i < 3000; ++i) {
    const auto s = oracle::random_surrogate(rng);
    const double x = rng.uniform(-3.0, 3.0);
    if (s.kind == SurrogateKind::Rectangular && std::abs(std::abs(x) - s.scale) < 1e-4) continue;
    const double h = 1e-6;
    const double fd = (s.primitive(x + h) - s.primitive(x - h)) / (2 * h);
    ASSERT_NEAR(s.derivative(x), fd, 1e-7) << to_string(s.kind) << " x=" << x;
  }
  for (const auto &s : {SurrogateSpec{SurrogateKind::FastSigmoid, 2.0}, SurrogateSpec{SurrogateKind::Arctan, 1.0},
                        SurrogateSpec{SurrogateKind::Rectangular, 0.5}}) {
    EXPECT_NEAR(s.primitive(-1e6), 0.0, 1e-5);
    EXPECT_NEAR(s.primitive(1e6), 1.0, 1e-5);
  }
}

TEST(Penalty, Examples) {
  const SelfModulation m{1.0, 0.05, 0.9};
  const std::vector<double> inside = {0.5}, silent = {0.0}, saturated = {1.0};
  EXPECT_DOUBLE_EQ(self_modulation_penalty(inside, m), 0.0);
  EXPECT_NEAR(self_modulation_penalty(silent, m), 0.0025, 1e-15);
  EXPECT_NEAR(self_modulation_penalty(saturated, SelfModulation{2.0, 0.05, 0.9}), 0.02, 1e-15);
}

TEST(Penalty, ZeroExactlyInsideBandAndSlopePointsInward) {
  Rng rng(5);
  for (int i = 0; i < 5000; ++i) {
    const SelfModulation m{rng.uniform(0.1, 3.0), rng.uniform(0.01, 0.4), rng.uniform(0.5, 0.99)};
    std::vector<double> rates(1 + rng.bounded(6));
    for (auto &r : rates) r = rng.uniform01();
    const bool all_inside = std::all_of(rates.begin(), rates.end(), [&](double r) { return r >= m.rate_lo && r <= m.rate_hi; });
    ASSERT_EQ(self_modulation_penalty(rates, m) == 0.0, all_inside);
    for (double r : rates) {
      const double s = self_modulation_slope(r, m);
      if (r < m.rate_lo) ASSERT_LT(s, 0.0);
      else if (r > m.rate_hi) ASSERT_GT(s, 0.0);
      else ASSERT_EQ(s, 0.0);
    }
  }
}

TEST(Gradient, SingleNeuronOneStep) {
  NetworkSpec s;
  s.input_length = 1;
  s.time_steps = 1;
  s.bias = true;
  s.layers = {LayerSpec::fc(1, 2), LayerSpec::counter(2)};
  const Network<double> net(s, {0.8, 1.3, 0.1, -0.05});
  oracle::GradcheckStats stats;
  oracle::gradcheck_one(net, {1.0}, 0, {SurrogateKind::FastSigmoid, 2.0}, SelfModulation{}, stats, "toy");
  EXPECT_EQ(stats.skipped, 0u);
  EXPECT_EQ(stats.checked, 7u);
  EXPECT_LT(stats.max_rel_err, 1e-4) << stats.worst;
}

TEST(Gradient, MatchesFiniteDifferencesOnRandomNets) {
  const auto stats = oracle::gradcheck_random(2024, 100);
  EXPECT_EQ(stats.nets, 100u);
  EXPECT_LT(stats.max_rel_err, 1e-4) << stats.worst;
  EXPECT_GT(stats.checked, 10 * stats.skipped) << "too many coordinates straddle a branch";
  EXPECT_GT(stats.hard_spikes, 1000u);
  EXPECT_GT(stats.clamped, 1000u);
}

TEST(Gradient, ZeroWeightCnnBiasIsSoftmaxMinusOneHot) {
  auto spec = mirror_as_cnn(default_network(32, 10));
  const Network<float> net(spec, std::vector<float>(ParamLayout(spec).total, 0.0f));
  const Prepared<float> prep(net);
  Rng rng(7);
  const auto data = random_samples(rng, 8, 32);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  TrainConfig cfg;
  cfg.threads = 1;
  const auto br = batch_gradient(net, prep, data, idx, cfg);
  const auto &e = ParamLayout(spec).entries[spec.layers.size() - 2];
  for (int k = 0; k < 4; ++k) {
    double want = 0.0;
    for (const auto &smp : data) want += 0.25 - (smp.label == k ? 1.0 : 0.0);
    want /= static_cast<double>(data.size());
    EXPECT_NEAR(br.grad.params[e.bias_offset + static_cast<std::size_t>(k)] / data.size(), want, 1e-7);
  }
  EXPECT_NEAR(br.loss / data.size(), std::log(4.0), 1e-6);
}

TEST(Gradient, SmallStepDescendsOnDefaultNet) {
  // The spiking loss is piecewise constant in the weights, so descent is
  // checked on the relaxed forward whose gradient backward computes. The
  // relaxed forward still resets on hard spikes; the step is small enough
  // that no spike moves, so the decrease must match first order.
  const auto spec = default_network(320, 10);
  auto net = Network<double>::initialized(spec, 11);
  for (auto &w : net.params) w *= 3.0;
  Rng rng(13);
  std::vector<std::vector<double>> xs(4, std::vector<double>(320));
  for (auto &x : xs)
    for (auto &v : x) v = static_cast<double>(static_cast<int>(rng.bounded(3)) - 1);
  const SurrogateSpec sur{SurrogateKind::FastSigmoid, 2.0};
  const SelfModulation mod{1.0, 0.05, 0.9};
  auto batch_loss = [&](const Network<double> &n, Gradients<double> *g) {
    const Prepared<double> prep(n);
    double loss = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      Trace<double> tr;
      forward<double>(n, prep, xs[i], ForwardMode::Relaxed, sur, &tr);
      loss += g ? backward<double>(n, prep, tr, static_cast<int>(i), sur, mod, *g).total()
                : sample_loss<double>(n, prep, tr, static_cast<int>(i), mod).total();
    }
    return loss;
  };
  Gradients<double> g(net.params.size());
  const double before = batch_loss(net, &g);
  double g2 = 0.0;
  for (double v : g.params) g2 += v * v;
  const double lr = 1e-5;
  Optimizer<double> sgd(OptimizerKind::SGD, lr, net.params.size());
  sgd.step(net.params, g.params);
  const double after = batch_loss(net, nullptr);
  EXPECT_LT(after, before);
  EXPECT_NEAR((before - after) / (lr * g2), 1.0, 0.01);
}

TEST(Gradient, StraightThroughClampReachesClampedNeurons) {
  // One neuron driven far below reset: the exact clamp blocks its weight
  // gradient, the straight-through variant does not.
  NetworkSpec s;
  s.input_length = 1;
  s.time_steps = 3;
  s.layers = {LayerSpec::fc(1, 2), LayerSpec::counter(2)};
  const Network<double> net(s, {-2.0, 1.5});
  const Prepared<double> prep(net);
  const std::vector<double> x = {1.0};
  for (const bool st : {false, true}) {
    SurrogateSpec sur{SurrogateKind::FastSigmoid, 2.0};
    sur.clamp_straight_through = st;
    Trace<double> tr;
    forward<double>(net, prep, x, ForwardMode::Spiking, sur, &tr);
    Gradients<double> g(2);
    backward<double>(net, prep, tr, 0, sur, SelfModulation{}, g);
    if (st)
      EXPECT_LT(g.params[0], 0.0);
    else
      EXPECT_EQ(g.params[0], 0.0);
    EXPECT_GT(g.params[1], 0.0);
  }
}

TEST(Training, DeterministicAcrossRunsAndThreadCounts) {
  Rng rng(17);
  const auto train_set = patterned_samples(rng, 48, 32);
  const auto test_set = patterned_samples(rng, 16, 32);
  const auto spec = default_network(32, 4);
  auto cfg = small_config(3);
  const auto a = train(Network<float>::initialized(spec, 1), train_set, test_set, cfg);
  const auto b = train(Network<float>::initialized(spec, 1), train_set, test_set, cfg);
  cfg.threads = 3;
  const auto c = train(Network<float>::initialized(spec, 1), train_set, test_set, cfg);
  EXPECT_EQ(a.last.params, b.last.params);
  EXPECT_EQ(a.last.params, c.last.params);
  EXPECT_EQ(a.last.meta, b.last.meta);
  EXPECT_EQ(serialize_checkpoint(a.best), serialize_checkpoint(b.best));
  cfg.seed = 2;
  cfg.threads = 1;
  const auto d = train(Network<float>::initialized(spec, 1), train_set, test_set, cfg);
  EXPECT_NE(a.last.params, d.last.params);
}

TEST(Training, ResumeReproducesTrajectory) {
  Rng rng(19);
  const auto train_set = patterned_samples(rng, 40, 32);
  const auto test_set = patterned_samples(rng, 12, 32);
  const auto spec = default_network(32, 4);
  auto cfg = small_config(4);
  cfg.train_lif = true;
  const auto full = train(Network<float>::initialized(spec, 5), train_set, test_set, cfg);
  cfg.epochs = 2;
  const auto half = train(Network<float>::initialized(spec, 5), train_set, test_set, cfg);
  cfg.epochs = 4;
  const auto rest = train(network_of(half.last), train_set, test_set, cfg, {}, &half.last, &half.best);
  EXPECT_EQ(rest.last.params, full.last.params);
  EXPECT_EQ(to_json(rest.last.spec), to_json(full.last.spec));
  EXPECT_EQ(rest.last.meta, full.last.meta);
  EXPECT_EQ(rest.best_epoch, full.best_epoch);
  EXPECT_EQ(rest.best.params, full.best.params);
  ASSERT_EQ(rest.history.size(), 4u);
}

TEST(Training, OverfitsSingleSample) {
  Rng rng(23);
  const auto one = random_samples(rng, 1, 64);
  auto cfg = small_config(200);
  cfg.batch_size = 1;
  const auto res = train(Network<float>::initialized(default_network(64, 10), 3), one, {}, cfg);
  EXPECT_DOUBLE_EQ(res.history.back().train_acc, 1.0);
  EXPECT_DOUBLE_EQ(evaluate(network_of(res.last), one, 1).accuracy, 1.0);
}

TEST(Training, LearnsSeparablePatterns) {
  Rng rng(29);
  const auto train_set = patterned_samples(rng, 160, 32);
  const auto test_set = patterned_samples(rng, 40, 32);
  auto cfg = small_config(15);
  const auto res = train(Network<float>::initialized(default_network(32, 6), 9), train_set, test_set, cfg);
  EXPECT_GE(res.best_test_acc, 0.9);
  EXPECT_EQ(res.best_test_acc, res.history[static_cast<std::size_t>(res.best_epoch)].test_acc);
  EXPECT_DOUBLE_EQ(evaluate(network_of(res.best), test_set, 1).accuracy, res.best_test_acc);
}

TEST(Training, CalibrationBringsRatesToTarget) {
  Rng rng(47);
  const auto data = random_samples(rng, 40, 64);
  const auto spec = default_network(64, 10);
  auto net = Network<float>::initialized(spec, 4);
  const auto before = net.params;
  calibrate_firing_rates(net, data, 0.2, 1);
  const Prepared<float> prep(net);
  std::vector<double> mean(prep.layers.size(), 0.0);
  for (const auto &smp : data) {
    Trace<float> tr;
    forward<float>(net, prep, smp.input, ForwardMode::Spiking, SurrogateSpec{}, &tr);
    const auto r = firing_rates(prep, tr, spec.time_steps);
    for (std::size_t l = 0; l < r.size(); ++l) mean[l] += r[l] / static_cast<double>(data.size());
  }
  for (std::size_t l = 0; l < mean.size(); ++l) {
    if (prep.layers[l].kind == LayerKind::MaxPool1d) continue;
    EXPECT_NEAR(mean[l], 0.2, 0.05) << "layer " << l;
  }
  EXPECT_NE(net.params, before);

  // Silent input, ReLU nets and a zero target leave the weights alone.
  std::vector<Sample> zeros(8, Sample{std::vector<float>(64, 0.0f), 0});
  auto silent = Network<float>::initialized(spec, 4);
  calibrate_firing_rates(silent, zeros, 0.2, 1);
  EXPECT_EQ(silent.params, before);
  auto cnn = Network<float>::initialized(mirror_as_cnn(spec), 4);
  const auto cnn_before = cnn.params;
  calibrate_firing_rates(cnn, data, 0.2, 1);
  EXPECT_EQ(cnn.params, cnn_before);
  auto off = Network<float>::initialized(spec, 4);
  calibrate_firing_rates(off, data, 0.0, 1);
  EXPECT_EQ(off.params, before);
}

TEST(Training, ZeroInputGivesChance) {
  std::vector<Sample> zeros(64);
  for (std::size_t i = 0; i < zeros.size(); ++i) {
    zeros[i].label = static_cast<int>(i % 4);
    zeros[i].input.assign(32, 0.0f);
  }
  for (const bool cnn : {false, true}) {
    auto spec = default_network(32, 4);
    if (cnn) spec = mirror_as_cnn(spec);
    const auto res = train(Network<float>::initialized(spec, 2), zeros, zeros, small_config(3));
    for (const auto &e : res.history) EXPECT_DOUBLE_EQ(e.test_acc, 0.25) << (cnn ? "cnn" : "scnn");
  }
}

TEST(Training, NonFiniteLossReportsWhere) {
  Rng rng(31);
  auto data = random_samples(rng, 16, 32);
  data[11].input[3] = std::nanf("");
  try {
    train(Network<float>::initialized(mirror_as_cnn(default_network(32, 1)), 1), data, {}, small_config(1));
    FAIL() << "expected NumericalError";
  } catch (const NumericalError &e) {
    EXPECT_NE(std::string(e.what()).find("epoch 0, batch"), std::string::npos) << e.what();
  }
}

TEST(Training, LossFiniteAtInitialization) {
  Rng rng(37);
  const auto data = random_samples(rng, 8, 320);
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  TrainConfig cfg;
  cfg.threads = 1;
  for (const bool cnn : {false, true}) {
    auto spec = default_network(320, 10);
    if (cnn) spec = mirror_as_cnn(spec);
    const auto net = Network<float>::initialized(spec, 1);
    const auto br = batch_gradient(net, Prepared<float>(net), data, idx, cfg);
    EXPECT_TRUE(std::isfinite(br.loss));
  }
}

TEST(Training, RejectsBadConfig) {
  auto cfg = small_config(1);
  cfg.batch_size = 0;
  Rng rng(41);
  const auto data = random_samples(rng, 4, 32);
  EXPECT_THROW(train(Network<float>::initialized(default_network(32, 2), 1), data, {}, cfg), ConfigError);
  EXPECT_THROW(train(Network<float>::initialized(default_network(32, 2), 1), {}, {}, small_config(1)), EmptyInput);
}

TEST(Evaluation, ConsistentConfusion) {
  const std::vector<int> truth = {0, 1, 2, 3, 0, 1, 2, 3};
  const auto perfect = evaluation_from_predictions(truth, truth, 4);
  EXPECT_DOUBLE_EQ(perfect.accuracy, 1.0);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) EXPECT_EQ(perfect.confusion[i][j], i == j ? 2 : 0);

  std::vector<int> t640(640), constant(640, 2);
  for (std::size_t i = 0; i < t640.size(); ++i) t640[i] = static_cast<int>(i % 4);
  EXPECT_DOUBLE_EQ(evaluation_from_predictions(t640, constant, 4).accuracy, 0.25);

  Rng rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> t(1 + rng.bounded(300)), p(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      t[i] = static_cast<int>(rng.bounded(4));
      p[i] = static_cast<int>(rng.bounded(4));
    }
    const auto e = evaluation_from_predictions(t, p, 4);
    long diag = 0;
    for (int k = 0; k < 4; ++k) diag += e.confusion[k][k];
    ASSERT_EQ(e.total(), static_cast<long>(t.size()));
    ASSERT_DOUBLE_EQ(e.accuracy, static_cast<double>(diag) / static_cast<double>(e.total()));
  }
  EXPECT_THROW(evaluation_from_predictions({}, {}, 4), EmptyInput);
  EXPECT_THROW(evaluate(Network<float>::initialized(default_network(32, 2), 1), {}), EmptyInput);
}

TEST(Config, TrainConfigJsonRoundTrip) {
  TrainConfig c;
  c.epochs = 7;
  c.optimizer = OptimizerKind::SGD;
  c.surrogate = {SurrogateKind::Arctan, 1.5, true};
  c.self_mod = {0.5, 0.1, 0.7};
  c.train_lif = true;
  c.init_rate = 0.3;
  const auto back = nlohmann::json(c).get<TrainConfig>();
  EXPECT_EQ(nlohmann::json(back), nlohmann::json(c));
  EXPECT_THROW(nlohmann::json({{"optimizer", "rmsprop"}}).get<TrainConfig>(), ConfigError);
  c.init_rate = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(nlohmann::json({{"surrogate", {{"clamp_gradient", "soft"}}}}).get<TrainConfig>(), ConfigError);
}
