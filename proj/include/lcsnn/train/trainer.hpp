#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcsnn/common/errors.hpp"
#include "lcsnn/common/parallel.hpp"
#include "lcsnn/common/rng.hpp"
#include "lcsnn/snn/checkpoint.hpp"
#include "lcsnn/snn/engine.hpp"
#include "lcsnn/train/bptt.hpp"
#include "lcsnn/train/optimizer.hpp"
#include "lcsnn/train/surrogate.hpp"

namespace lcsnn {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 32;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  std::uint64_t seed = 1;
  SurrogateSpec surrogate;
  SelfModulation self_mod{1.0, 0.05, 0.9};
  bool train_lif = false;
  double init_rate = 0.15; // initial firing-rate target per spiking layer (0: keep the initial weights)
  int threads = 0;         // 0: one per hardware thread

  void validate() const {
    if (epochs < 0) throw ConfigError("epochs must be non-negative");
    if (batch_size <= 0) throw ConfigError("batch_size must be positive");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(init_rate >= 0.0 && init_rate < 1.0)) throw ConfigError("init_rate must be in [0, 1)");
    surrogate.validate();
    self_mod.validate();
  }
};

inline void to_json(nlohmann::json &j, const TrainConfig &c) {
  j = {{"epochs", c.epochs},
       {"batch_size", c.batch_size},
       {"learning_rate", c.learning_rate},
       {"optimizer", to_string(c.optimizer)},
       {"seed", c.seed},
       {"surrogate", c.surrogate},
       {"self_modulation",
        {{"weight", c.self_mod.weight}, {"rate_lo", c.self_mod.rate_lo}, {"rate_hi", c.self_mod.rate_hi}}},
       {"train_lif", c.train_lif},
       {"init_rate", c.init_rate}};
}

inline void from_json(const nlohmann::json &j, TrainConfig &c) {
  TrainConfig d;
  c.epochs = j.value("epochs", d.epochs);
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.optimizer = optimizer_from_string(j.value("optimizer", to_string(d.optimizer)));
  c.seed = j.value("seed", d.seed);
  c.surrogate = j.contains("surrogate") ? j.at("surrogate").get<SurrogateSpec>() : d.surrogate;
  if (j.contains("self_modulation")) {
    const auto &m = j.at("self_modulation");
    c.self_mod.weight = m.value("weight", d.self_mod.weight);
    c.self_mod.rate_lo = m.value("rate_lo", d.self_mod.rate_lo);
    c.self_mod.rate_hi = m.value("rate_hi", d.self_mod.rate_hi);
  } else {
    c.self_mod = d.self_mod;
  }
  c.train_lif = j.value("train_lif", d.train_lif);
  c.init_rate = j.value("init_rate", d.init_rate);
  c.threads = j.value("threads", d.threads);
}

/// One network input, position-major, with its class label.
struct Sample {
  std::vector<float> input;
  int label = 0;
};

struct Evaluation {
  double accuracy = 0.0;
  std::vector<std::vector<long>> confusion; // [true][predicted]

  long total() const {
    long t = 0;
    for (const auto &r : confusion) t += std::accumulate(r.begin(), r.end(), 0L);
    return t;
  }
};

inline Evaluation evaluation_from_predictions(const std::vector<int> &truth, const std::vector<int> &pred,
                                              int num_classes) {
  if (truth.empty()) throw EmptyInput("evaluation needs a non-empty test set");
  Evaluation e;
  e.confusion.assign(static_cast<std::size_t>(num_classes), std::vector<long>(static_cast<std::size_t>(num_classes), 0));
  long correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    ++e.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(pred[i])];
    correct += truth[i] == pred[i];
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  return e;
}

inline std::vector<int> predict(const Network<float> &net, const std::vector<Sample> &samples, int threads = 0) {
  const Prepared<float> prep(net);
  std::vector<int> pred(samples.size());
  parallel_for(samples.size(), resolve_threads(threads), [&](std::size_t, std::size_t i) {
    const auto out = forward<float>(net, prep, samples[i].input, ForwardMode::Spiking, SurrogateSpec{});
    pred[i] = spike_counter_classify<float>(out);
  });
  return pred;
}

inline Evaluation evaluate(const Network<float> &net, const std::vector<Sample> &test, int threads = 0) {
  if (test.empty()) throw EmptyInput("evaluation needs a non-empty test set");
  std::vector<int> truth(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) truth[i] = test[i].label;
  return evaluation_from_predictions(truth, predict(net, test, threads), net.spec.num_classes());
}

struct EpochLog {
  int epoch = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double loss = 0.0;
  std::vector<double> firing_rates; // one per LIF layer
};

inline nlohmann::json epoch_log_to_json(const EpochLog &e) {
  return {{"epoch", e.epoch}, {"train_acc", e.train_acc}, {"test_acc", e.test_acc},
          {"loss", e.loss}, {"firing_rates", e.firing_rates}};
}

inline EpochLog epoch_log_from_json(const nlohmann::json &j) {
  return {j.at("epoch").get<int>(), j.at("train_acc").get<double>(), j.at("test_acc").get<double>(),
          j.at("loss").get<double>(), j.at("firing_rates").get<std::vector<double>>()};
}

struct TrainResult {
  CheckpointFile best; // highest test accuracy (earliest on ties)
  CheckpointFile last; // state after the final epoch, resumable
  std::vector<EpochLog> history;
  double best_test_acc = 0.0;
  int best_epoch = -1;
};

/// Summed gradient and loss statistics of one mini-batch.
struct BatchResult {
  Gradients<float> grad;
  double loss = 0.0;
  int correct = 0;
  std::vector<double> rates;
};

/// Forward + backward over `idx`; per-sample gradients are reduced in index
/// order so the result does not depend on the thread count.
inline BatchResult batch_gradient(const Network<float> &net, const Prepared<float> &prep,
                                  const std::vector<Sample> &data, std::span<const std::size_t> idx,
                                  const TrainConfig &cfg) {
  const std::size_t n_params = net.params.size();
  const bool lif = net.spec.activation == Activation::Lif;
  std::vector<Gradients<float>> per(idx.size(), Gradients<float>(n_params));
  std::vector<double> losses(idx.size());
  std::vector<int> hits(idx.size());
  std::vector<std::vector<double>> rates(idx.size());
  const int workers = resolve_threads(cfg.threads);
  std::vector<Trace<float>> traces(static_cast<std::size_t>(std::max(1, workers)));
  parallel_for(idx.size(), workers, [&](std::size_t w, std::size_t k) {
    auto &tr = traces[w];
    const auto &s = data[idx[k]];
    forward<float>(net, prep, s.input, ForwardMode::Spiking, cfg.surrogate, &tr);
    const auto parts = backward<float>(net, prep, tr, s.label, cfg.surrogate, cfg.self_mod, per[k]);
    losses[k] = parts.total();
    hits[k] = spike_counter_classify<float>(tr.output) == s.label;
    if (lif) {
      const auto r = firing_rates(prep, tr, net.spec.time_steps);
      for (std::size_t l = 0; l < r.size(); ++l)
        if (prep.layers[l].kind != LayerKind::MaxPool1d) rates[k].push_back(r[l]);
    }
  });
  BatchResult res;
  res.grad = Gradients<float>(n_params);
  for (std::size_t k = 0; k < idx.size(); ++k) {
    res.grad.add(per[k]);
    res.loss += losses[k];
    res.correct += hits[k];
    if (res.rates.empty()) res.rates.assign(rates[k].size(), 0.0);
    for (std::size_t l = 0; l < rates[k].size(); ++l) res.rates[l] += rates[k][l];
  }
  return res;
}

/// Rescales the weights of each spiking layer, first to last, so that its
/// mean firing rate on up to 64 evenly spaced samples is close to `target`.
/// The gain is bisected in log space over [1/64, 64]; a layer that stays
/// silent at every gain keeps its weights. ReLU networks are left alone.
inline void calibrate_firing_rates(Network<float> &net, const std::vector<Sample> &samples, double target,
                                   int threads) {
  if (net.spec.activation != Activation::Lif || samples.empty() || target <= 0.0) return;
  const std::size_t n = std::min<std::size_t>(64, samples.size());
  std::vector<std::size_t> pick(n);
  for (std::size_t i = 0; i < n; ++i) pick[i] = i * samples.size() / n;
  const int workers = resolve_threads(threads);
  std::vector<Trace<float>> traces(static_cast<std::size_t>(std::max(1, workers)));
  auto rate_of = [&](std::size_t layer) {
    const Prepared<float> prep(net);
    std::vector<double> r(n);
    parallel_for(n, workers, [&](std::size_t w, std::size_t k) {
      forward<float>(net, prep, samples[pick[k]].input, ForwardMode::Spiking, SurrogateSpec{}, &traces[w]);
      r[k] = firing_rates(prep, traces[w], net.spec.time_steps)[layer];
    });
    double sum = 0.0;
    for (double v : r) sum += v;
    return sum / static_cast<double>(n);
  };
  const ParamLayout layout(net.spec);
  const std::vector<float> original = net.params;
  for (std::size_t l = 0; l + 1 < net.spec.layers.size(); ++l) {
    const auto &e = layout.entries[l];
    if (e.weight_count == 0) continue;
    auto set_gain = [&](double g) {
      for (std::size_t i = 0; i < e.weight_count; ++i)
        net.params[e.weight_offset + i] = static_cast<float>(original[e.weight_offset + i] * g);
    };
    double lo = -6.0, hi = 6.0; // log2 gain
    set_gain(std::exp2(hi));
    if (rate_of(l) == 0.0) {
      set_gain(1.0);
      continue;
    }
    for (int it = 0; it < 10; ++it) {
      const double mid = 0.5 * (lo + hi);
      set_gain(std::exp2(mid));
      (rate_of(l) < target ? lo : hi) = mid;
    }
    set_gain(std::exp2(0.5 * (lo + hi)));
  }
}

namespace detail {

inline nlohmann::json history_json(const std::vector<EpochLog> &h) {
  nlohmann::json a = nlohmann::json::array();
  for (const auto &e : h) a.push_back(epoch_log_to_json(e));
  return a;
}

} // namespace detail

/// Mini-batch training with a per-epoch shuffle drawn from
/// Rng(mix_seed(seed, epoch)). `resume` continues from a `last` checkpoint
/// of an earlier run with the same configuration and data (epochs may grow);
/// `resume_best` is that run's `best` checkpoint. `on_checkpoint` sees the
/// result after every epoch with `last` filled in, so a caller can persist a
/// resumable state.
inline TrainResult train(Network<float> net, const std::vector<Sample> &train_set, const std::vector<Sample> &test_set,
                         const TrainConfig &cfg, const std::function<void(const EpochLog &)> &on_epoch = {},
                         const CheckpointFile *resume = nullptr, const CheckpointFile *resume_best = nullptr,
                         const std::function<void(const TrainResult &)> &on_checkpoint = {}) {
  cfg.validate();
  if (train_set.empty()) throw EmptyInput("training set is empty");
  const std::size_t n_params = net.params.size();
  Optimizer<float> opt(cfg.optimizer, cfg.learning_rate, n_params);
  ScalarOptimizer lif_opt(cfg.optimizer, cfg.learning_rate, 3);

  TrainResult res;
  int start_epoch = 0;
  if (!resume) calibrate_firing_rates(net, train_set, cfg.init_rate, cfg.threads);
  if (resume) {
    net = Network<float>(resume->spec, resume->params);
    const auto &m = resume->meta;
    start_epoch = m.at("next_epoch").get<int>();
    if (m.at("seed").get<std::uint64_t>() != cfg.seed) throw ConfigError("resume seed differs from config seed");
    opt.restore(m.at("optimizer_steps").get<long long>(), resume->adam_m, resume->adam_v);
    if (m.contains("lif_optimizer")) {
      const auto &lo = m.at("lif_optimizer");
      lif_opt.inner().restore(lo.at("steps").get<long long>(), lo.at("m").get<std::vector<double>>(),
                              lo.at("v").get<std::vector<double>>());
    }
    for (const auto &e : m.at("history")) res.history.push_back(epoch_log_from_json(e));
    res.best_test_acc = m.at("best_test_acc").get<double>();
    res.best_epoch = m.at("best_epoch").get<int>();
  }

  auto snapshot = [&](int next_epoch) {
    CheckpointFile ck;
    ck.spec = net.spec;
    ck.params = net.params;
    if (cfg.optimizer == OptimizerKind::Adam) {
      ck.adam_m = opt.first_moment();
      ck.adam_v = opt.second_moment();
    }
    ck.meta = {{"seed", cfg.seed},
               {"next_epoch", next_epoch},
               {"epoch", next_epoch - 1},
               {"optimizer_steps", opt.steps()},
               {"lif_optimizer",
                {{"steps", lif_opt.inner().steps()},
                 {"m", lif_opt.inner().first_moment()},
                 {"v", lif_opt.inner().second_moment()}}},
               {"history", detail::history_json(res.history)},
               {"best_test_acc", res.best_test_acc},
               {"best_epoch", res.best_epoch},
               {"train_config", cfg}};
    return ck;
  };
  res.best = resume && resume_best ? *resume_best : snapshot(start_epoch);
  res.best.meta["train_config"] = cfg;
  auto finish = [&](int next_epoch) {
    res.last = snapshot(next_epoch);
    res.best.meta["history"] = detail::history_json(res.history);
    res.best.meta["best_test_acc"] = res.best_test_acc;
    res.best.meta["best_epoch"] = res.best_epoch;
  };

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    std::vector<std::size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(epoch))).shuffle(order);

    double loss_sum = 0.0;
    long correct = 0;
    std::vector<double> rate_sum;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      const std::span<const std::size_t> idx(order.data() + b, e - b);
      const Prepared<float> prep(net);
      const std::string where = " at epoch " + std::to_string(epoch) + ", batch " +
                                std::to_string(b / static_cast<std::size_t>(cfg.batch_size));
      BatchResult br;
      try {
        br = batch_gradient(net, prep, train_set, idx, cfg);
      } catch (const NumericalError &e) {
        throw NumericalError(e.what() + where);
      }
      if (!std::isfinite(br.loss)) throw NumericalError("non-finite loss" + where);
      const float inv = 1.0f / static_cast<float>(idx.size());
      for (auto &g : br.grad.params) {
        g *= inv;
        if (!std::isfinite(g)) throw NumericalError("non-finite gradient" + where);
      }
      opt.step(net.params, br.grad.params);
      if (cfg.train_lif && net.spec.activation == Activation::Lif) {
        auto &p = net.spec.lif;
        std::vector<double> x = {p.v_threshold, p.v_reset, p.delta_v};
        const double s = 1.0 / static_cast<double>(idx.size());
        lif_opt.step(x, {br.grad.v_threshold * s, br.grad.v_reset * s, br.grad.delta_v * s});
        p.v_threshold = x[0];
        p.v_reset = x[1];
        p.delta_v = std::max(0.0, x[2]);
        if (p.v_threshold < p.v_reset + 1e-3) p.v_threshold = p.v_reset + 1e-3;
      }
      loss_sum += br.loss;
      correct += br.correct;
      if (rate_sum.empty()) rate_sum.assign(br.rates.size(), 0.0);
      for (std::size_t l = 0; l < br.rates.size(); ++l) rate_sum[l] += br.rates[l];
    }

    EpochLog log;
    log.epoch = epoch;
    log.loss = loss_sum / static_cast<double>(train_set.size());
    log.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
    for (double r : rate_sum) log.firing_rates.push_back(r / static_cast<double>(train_set.size()));
    log.test_acc = test_set.empty() ? 0.0 : evaluate(net, test_set, cfg.threads).accuracy;
    res.history.push_back(log);
    if (res.best_epoch < 0 || log.test_acc > res.best_test_acc) {
      res.best_test_acc = log.test_acc;
      res.best_epoch = epoch;
      res.best = snapshot(epoch + 1);
    }
    if (on_epoch) on_epoch(log);
    if (on_checkpoint) {
      finish(epoch + 1);
      on_checkpoint(res);
    }
  }
  finish(std::max(cfg.epochs, start_epoch));
  return res;
}

inline Network<float> network_of(const CheckpointFile &ck) { return Network<float>(ck.spec, ck.params); }

} // namespace lcsnn
