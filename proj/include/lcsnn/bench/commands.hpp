#pragma once

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcsnn/bench/experiment.hpp"
#include "lcsnn/bench/pipeline.hpp"
#include "lcsnn/common/errors.hpp"
#include "lcsnn/common/format.hpp"
#include "lcsnn/common/parallel.hpp"
#include "lcsnn/complexity/complexity.hpp"
#include "lcsnn/ingest/dataset.hpp"
#include "lcsnn/ingest/wfdb.hpp"
#include "lcsnn/lcadc/lcadc.hpp"
#include "lcsnn/snn/checkpoint.hpp"
#include "lcsnn/train/trainer.hpp"

// Output layout under the run directory:
//
//   ingest/      manifest.json, class_counts.csv
//   cache/       <record>_ch<c>_<lcadc hash>.json  full-record spike trains
//   compress/    compression_records.csv, compression_summary.csv, reduction_by_bits.csv, compression.json
//   train/<tag>/ best.ckpt, last.ckpt, train_log.csv, metrics.json, confusion.csv
//   eval/<tag>/  metrics.json, confusion.csv
//   sweep/       sweep.csv, sweep_summary.json, accuracy_by_bits.csv, cells/<tag>/...
//   complexity/  complexity.csv, complexity.json
//   report/      report.json, reduction_by_bits.csv, accuracy_by_model.csv, complexity_by_t.csv, accuracy_by_bits.csv
//
// Every command directory also holds config.json, the effective config.

namespace lcsnn {

inline constexpr double kComplexityTarget = 0.968;

struct CommandOptions {
  std::filesystem::path out; // run directory
  bool allow_partial = false;
  bool resume = false;
  std::ostream *log = &std::cerr;
};

namespace bench_detail {

inline nlohmann::json ingest_fields(const ExperimentConfig &c) {
  return {{"corpus_dir", c.corpus_dir}, {"records", c.records}, {"channel", c.channel},
          {"window", {{"pre", c.window.pre}, {"post", c.window.post}}},
          {"per_class", c.per_class}, {"seed", c.seed}};
}

inline void archive_config(const std::filesystem::path &dir, const ExperimentConfig &c) {
  write_text(dir / "config.json", to_json(c).dump(2) + "\n");
}

inline CsvWriter report_csv(std::string_view command, const ExperimentConfig &c,
                            const std::vector<std::pair<std::string, std::string>> &extra) {
  CsvWriter w;
  w.comment("tool=lcsnn version=" + std::string(kVersion));
  w.comment("command=" + std::string(command));
  w.comment("config_hash=" + config_fingerprint(c));
  w.comment("seed=" + std::to_string(c.seed) + " train_seed=" + std::to_string(c.train.seed));
  for (const auto &[k, v] : extra) w.comment(k + "=" + v);
  return w;
}

inline nlohmann::json report_meta(std::string_view command, const ExperimentConfig &c) {
  return {{"tool", "lcsnn"}, {"version", kVersion}, {"command", command},
          {"config_hash", config_fingerprint(c)}, {"seed", c.seed}, {"train_seed", c.train.seed}};
}

inline std::string csv_quote(const std::string &s) {
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"') q += '"';
    q += ch == '\n' ? ' ' : ch;
  }
  return q + "\"";
}

inline void write_json(const std::filesystem::path &p, const nlohmann::json &j) { write_text(p, j.dump(2) + "\n"); }

inline nlohmann::json window_ref(const BeatWindow &w) {
  return {{"record", w.record_id}, {"center", w.center_index}, {"label", to_string(w.label)}};
}

inline nlohmann::json class_json(const std::array<std::size_t, 4> &c) {
  return {{"N", c[0]}, {"SVEB", c[1]}, {"VEB", c[2]}, {"F", c[3]}};
}

} // namespace bench_detail

// ---------------------------------------------------------------- ingest

struct IngestResult {
  nlohmann::json manifest;
  std::vector<std::string> missing;
};

/// Reads the corpus, segments every record, draws the balanced split and
/// writes the manifest.
inline IngestResult cmd_ingest(const ExperimentConfig &cfg, const CommandOptions &opt) {
  namespace fs = std::filesystem;
  cfg.validate();
  const fs::path dir = cfg.corpus_dir;
  const auto found = fs::is_directory(dir) ? list_records(dir) : std::vector<std::string>{};
  if (found.empty()) throw Error("no records found in " + dir.string() + " (0 records)");
  std::vector<std::string> wanted = cfg.records.empty() ? found : cfg.records;
  IngestResult res;
  std::vector<std::string> present;
  for (const auto &id : wanted) {
    if (std::find(found.begin(), found.end(), id) == found.end()) res.missing.push_back(id);
    else present.push_back(id);
  }
  if (!res.missing.empty()) {
    std::string list;
    for (const auto &m : res.missing) list += (list.empty() ? "" : ", ") + m;
    if (!opt.allow_partial)
      throw Error(std::to_string(res.missing.size()) + " missing record(s): " + list +
                  " (pass --allow-partial to continue without them)");
    *opt.log << "warning: continuing without " << list << "\n";
  }
  if (present.empty()) throw Error("no records left to ingest");

  struct PerRecord {
    EcgRecord rec;
    SegmentResult seg;
  };
  std::vector<PerRecord> per(present.size());
  parallel_for(present.size(), resolve_threads(cfg.train.threads), [&](std::size_t, std::size_t i) {
    per[i].rec = load_record(dir, present[i]);
    per[i].seg = segment_beats(per[i].rec, cfg.window, cfg.channel);
  });

  std::vector<BeatWindow> windows;
  std::map<AamiClass, std::size_t> beats;
  nlohmann::json records = nlohmann::json::array();
  for (auto &p : per) {
    const auto cc = count_classes(p.rec.annotations);
    nlohmann::json bc = nlohmann::json::object();
    for (const auto &[k, v] : cc) {
      bc[std::string(to_string(k))] = v;
      beats[k] += v;
    }
    records.push_back({{"id", p.rec.record_id},
                       {"length", p.rec.length()},
                       {"beats", bc},
                       {"windows", bench_detail::class_json(count_labels(p.seg.windows))},
                       {"skipped_boundary", p.seg.skipped_boundary},
                       {"skipped_class", p.seg.skipped_class}});
    for (auto &w : p.seg.windows) windows.push_back(std::move(w));
  }
  const auto split = balance_and_split(windows, cfg.per_class, cfg.seed);
  nlohmann::json tr = nlohmann::json::array(), te = nlohmann::json::array();
  for (const auto &w : split.train) tr.push_back(bench_detail::window_ref(w));
  for (const auto &w : split.test) te.push_back(bench_detail::window_ref(w));
  nlohmann::json beat_totals = nlohmann::json::object();
  for (const auto &[k, v] : beats) beat_totals[std::string(to_string(k))] = v;

  nlohmann::json m = bench_detail::report_meta("ingest", cfg);
  m["format"] = "lcsnn-manifest";
  m["manifest_version"] = 1;
  m["ingest_config"] = bench_detail::ingest_fields(cfg);
  m["missing"] = res.missing;
  m["records"] = records;
  m["beat_counts"] = beat_totals;
  m["window_counts"] = bench_detail::class_json(count_labels(windows));
  m["split"] = {{"seed", cfg.seed}, {"per_class", cfg.per_class}, {"ratio", "4:1"},
                {"train_counts", bench_detail::class_json(count_labels(split.train))},
                {"test_counts", bench_detail::class_json(count_labels(split.test))},
                {"train", tr}, {"test", te}};
  res.manifest = m;

  const auto out = opt.out / "ingest";
  bench_detail::write_json(out / "manifest.json", m);
  auto csv = bench_detail::report_csv("ingest", cfg, {{"units", "beats and windows (counts)"}});
  csv.row("class", "beats", "windows", "train", "test");
  const auto wc = count_labels(windows), trc = count_labels(split.train), tec = count_labels(split.test);
  for (std::size_t c = 0; c < 4; ++c)
    csv.row(to_string(kTrainClasses[c]), beats[kTrainClasses[c]], wc[c], trc[c], tec[c]);
  csv.row("Q", beats[AamiClass::Q], 0, 0, 0);
  write_text(out / "class_counts.csv", csv.str());
  bench_detail::archive_config(out, cfg);
  *opt.log << "ingest: " << present.size() << " records, " << windows.size() << " windows, split "
           << split.train.size() << "/" << split.test.size() << "\n";
  return res;
}

/// Rebuilds the manifest's split windows from the corpus.
inline DatasetSplit load_split(const ExperimentConfig &cfg, const CommandOptions &opt) {
  const auto path = opt.out / "ingest" / "manifest.json";
  if (!std::filesystem::exists(path)) throw Error("no manifest at " + path.string() + "; run ingest first");
  const auto m = nlohmann::json::parse(read_text(path));
  if (m.at("ingest_config") != bench_detail::ingest_fields(cfg))
    throw ConfigError("manifest was built with a different ingest configuration; rerun ingest");
  std::vector<std::string> ids;
  for (const auto &part : {"train", "test"})
    for (const auto &e : m.at("split").at(part)) {
      const auto id = e.at("record").get<std::string>();
      if (std::find(ids.begin(), ids.end(), id) == ids.end()) ids.push_back(id);
    }
  std::vector<std::unordered_map<std::int64_t, BeatWindow>> by_center(ids.size());
  parallel_for(ids.size(), resolve_threads(cfg.train.threads), [&](std::size_t, std::size_t i) {
    const auto rec = load_record(cfg.corpus_dir, ids[i]);
    for (auto &w : segment_beats(rec, cfg.window, cfg.channel).windows) by_center[i][w.center_index] = std::move(w);
  });
  DatasetSplit split;
  split.seed = m.at("split").at("seed").get<std::uint64_t>();
  for (const auto &part : {"train", "test"}) {
    auto &dst = std::string(part) == "train" ? split.train : split.test;
    for (const auto &e : m.at("split").at(part)) {
      const auto id = e.at("record").get<std::string>();
      const auto i = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), id) - ids.begin());
      const auto it = by_center[i].find(e.at("center").get<std::int64_t>());
      if (it == by_center[i].end() || to_string(it->second.label) != e.at("label").get<std::string>())
        throw ParseError("manifest window " + id + "@" + e.at("center").dump() + " not found in the corpus");
      dst.push_back(it->second);
    }
  }
  return split;
}

// ---------------------------------------------------------------- compress

struct CompressionRow {
  std::string record_id;
  int bits = 0;
  CompressionStats stats;
};

struct CompressSummary {
  int bits = 0;
  CompressionStats full_record; // pooled over every record
  double mean_record_reduction = 0.0;
  CompressionStats segmented;   // pooled over the split's beat windows
};

struct CompressResult {
  std::vector<CompressionRow> records;
  std::vector<CompressSummary> summary;
};

/// Full-record spike train of one channel, read from the cache when present.
inline TernarySpikeTrain cached_record_train(const std::filesystem::path &cache_dir, const EcgRecord &rec, int channel,
                                             const LcAdcConfig &adc) {
  const auto path = cache_dir / (rec.record_id + "_ch" + std::to_string(channel) + "_" + config_hash(adc) + ".json");
  if (std::filesystem::exists(path)) {
    auto t = train_from_json(nlohmann::json::parse(read_text(path)));
    if (t.values.size() == static_cast<std::size_t>(rec.length())) return t;
  }
  const auto t = encode(rec.channel_mv(channel), adc);
  write_text(path, train_to_json(t).dump() + "\n");
  return t;
}

inline CompressResult cmd_compress(const ExperimentConfig &cfg, const CommandOptions &opt) {
  cfg.validate();
  const auto mpath = opt.out / "ingest" / "manifest.json";
  if (!std::filesystem::exists(mpath)) throw Error("no manifest at " + mpath.string() + "; run ingest first");
  const auto manifest = nlohmann::json::parse(read_text(mpath));
  std::vector<std::string> ids;
  for (const auto &r : manifest.at("records")) ids.push_back(r.at("id").get<std::string>());
  const auto split = load_split(cfg, opt);
  std::vector<BeatWindow> windows = split.train;
  windows.insert(windows.end(), split.test.begin(), split.test.end());

  const auto &bits = cfg.compress_bits;
  std::vector<std::vector<CompressionStats>> per(ids.size(), std::vector<CompressionStats>(bits.size()));
  parallel_for(ids.size(), resolve_threads(cfg.train.threads), [&](std::size_t, std::size_t i) {
    const auto rec = load_record(cfg.corpus_dir, ids[i]);
    for (std::size_t b = 0; b < bits.size(); ++b) {
      LcAdcConfig adc = cfg.lcadc;
      adc.resolution_bits = bits[b];
      per[i][b] = compression_stats(cached_record_train(opt.out / "cache", rec, cfg.channel, adc));
    }
  });

  CompressResult res;
  for (std::size_t b = 0; b < bits.size(); ++b) {
    LcAdcConfig adc = cfg.lcadc;
    adc.resolution_bits = bits[b];
    std::vector<CompressionStats> parts, seg;
    double mean = 0.0;
    for (std::size_t i = 0; i < ids.size(); ++i) {
      res.records.push_back({ids[i], bits[b], per[i][b]});
      parts.push_back(per[i][b]);
      mean += per[i][b].reduction;
    }
    for (const auto &w : windows) seg.push_back(compression_stats(encode(w.samples_mv, adc)));
    res.summary.push_back({bits[b], aggregate(parts), mean / static_cast<double>(ids.size()),
                           seg.empty() ? CompressionStats{} : aggregate(seg)});
  }

  const auto out = opt.out / "compress";
  const std::vector<std::pair<std::string, std::string>> hdr = {
      {"a_fs_mv", fmt_real(cfg.lcadc.a_fs_mv)},
      {"channel", std::to_string(cfg.channel)},
      {"multi_spike", cfg.lcadc.multi_spike ? "1" : "0"},
      {"snap_to_level", cfg.lcadc.snap_to_level ? "1" : "0"},
      {"units", "points are 360 Hz ticks; reduction = 1 - spike_points/nyquist_points"}};
  auto rows = bench_detail::report_csv("compress", cfg, hdr);
  rows.row("record_id", "M", "nyquist_points", "spike_points", "reduction");
  for (const auto &r : res.records)
    rows.row(r.record_id, r.bits, r.stats.nyquist_points, r.stats.spike_points, r.stats.reduction);
  write_text(out / "compression_records.csv", rows.str());

  auto sum = bench_detail::report_csv("compress", cfg, hdr);
  sum.row("M", "lsb_mv", "full_record_reduction", "mean_record_reduction", "segmented_reduction", "nyquist_points",
          "spike_points");
  auto fig = bench_detail::report_csv("compress", cfg, {{"series", "x=M y=normalized data points (full records)"}});
  fig.row("x", "y");
  nlohmann::json js = bench_detail::report_meta("compress", cfg);
  js["summary"] = nlohmann::json::array();
  for (const auto &s : res.summary) {
    LcAdcConfig adc = cfg.lcadc;
    adc.resolution_bits = s.bits;
    sum.row(s.bits, compute_lsb(adc), s.full_record.reduction, s.mean_record_reduction, s.segmented.reduction,
            s.full_record.nyquist_points, s.full_record.spike_points);
    fig.row(s.bits, s.full_record.normalized_points);
    js["summary"].push_back({{"M", s.bits},
                             {"full_record_reduction", s.full_record.reduction},
                             {"mean_record_reduction", s.mean_record_reduction},
                             {"segmented_reduction", s.segmented.reduction}});
  }
  write_text(out / "compression_summary.csv", sum.str());
  write_text(out / "reduction_by_bits.csv", fig.str());
  bench_detail::write_json(out / "compression.json", js);
  bench_detail::archive_config(out, cfg);
  for (const auto &s : res.summary)
    *opt.log << "compress: M=" << s.bits << " reduction " << fmt_real(s.full_record.reduction) << "\n";
  return res;
}

// ---------------------------------------------------------------- train

enum class ModelKind { Scnn, Cnn };

inline std::string to_string(ModelKind k) { return k == ModelKind::Scnn ? "scnn" : "cnn"; }

struct RunSpec {
  ModelKind model = ModelKind::Scnn;
  InputEncoding encoding = InputEncoding::LcAdc;
  int bits = 5;
  int bin = 1;
  std::uint64_t seed = 1;

  std::string tag() const {
    std::string t = to_string(model) + "-" + to_string(encoding);
    if (encoding == InputEncoding::LcAdc) t += "-m" + std::to_string(bits);
    return t + "-b" + std::to_string(bin) + "-s" + std::to_string(seed);
  }
};

struct RunResult {
  RunSpec run;
  double test_acc = 0.0;
  int best_epoch = -1;
  Evaluation eval;
  double input_reduction = 0.0; // share of zero ticks in the encoded windows (LC-ADC runs)
  std::vector<EpochLog> history;
};

inline nlohmann::json input_meta(const RunSpec &r, const LcAdcConfig &adc) {
  return {{"model", to_string(r.model)}, {"encoding", to_string(r.encoding)}, {"bits", r.bits},
          {"bin", r.bin}, {"lcadc", adc}};
}

inline void write_eval_files(const std::filesystem::path &dir, const ExperimentConfig &cfg, std::string_view command,
                             const std::string &tag, const Evaluation &e, nlohmann::json extra) {
  auto csv = bench_detail::report_csv(command, cfg, {{"run", tag}, {"rows", "true class"}, {"cols", "predicted class"}});
  csv.row("true", "N", "SVEB", "VEB", "F");
  for (std::size_t i = 0; i < e.confusion.size(); ++i)
    csv.row(to_string(kTrainClasses[i]), e.confusion[i][0], e.confusion[i][1], e.confusion[i][2], e.confusion[i][3]);
  write_text(dir / "confusion.csv", csv.str());
  nlohmann::json m = bench_detail::report_meta(command, cfg);
  m["run"] = tag;
  m["accuracy"] = e.accuracy;
  m["confusion"] = e.confusion;
  m["test_samples"] = e.total();
  for (auto &[k, v] : extra.items()) m[k] = v;
  bench_detail::write_json(dir / "metrics.json", m);
}

/// Trains one configuration and writes its run directory.
inline RunResult run_training(const ExperimentConfig &cfg, const DatasetSplit &split, const RunSpec &run,
                              const std::filesystem::path &dir, const CommandOptions &opt) {
  LcAdcConfig adc = cfg.lcadc;
  adc.resolution_bits = run.bits;
  const auto train_set = make_samples(split.train, run.encoding, adc, run.bin);
  const auto test_set = make_samples(split.test, run.encoding, adc, run.bin);
  if (train_set.empty()) throw EmptyInput("training split is empty");
  NetworkSpec spec = experiment_network(cfg, static_cast<int>(train_set.front().input.size()));
  if (run.model == ModelKind::Cnn) spec = mirror_as_cnn(spec);
  TrainConfig tc = cfg.train;
  tc.seed = run.seed;

  std::optional<CheckpointFile> resume, resume_best;
  if (opt.resume && std::filesystem::exists(dir / "last.ckpt")) {
    resume = load_checkpoint(dir / "last.ckpt");
    if (std::filesystem::exists(dir / "best.ckpt")) resume_best = load_checkpoint(dir / "best.ckpt");
    auto same = [](nlohmann::json j) {
      if (j.is_object()) j.erase("epochs");
      return j;
    };
    if (same(resume->meta.value("train_config", nlohmann::json())) != same(nlohmann::json(tc)) ||
        resume->meta.value("input", nlohmann::json()) != input_meta(run, adc))
      throw ConfigError(run.tag() + ": existing checkpoint was trained with a different configuration");
    *opt.log << run.tag() << ": resuming at epoch " << resume->meta.at("next_epoch") << "\n";
  }

  auto log = bench_detail::report_csv("train", cfg, {{"run", run.tag()},
                                                      {"optimizer", to_string(tc.optimizer)},
                                                      {"learning_rate", fmt_real(tc.learning_rate)},
                                                      {"batch_size", std::to_string(tc.batch_size)},
                                                      {"epochs", std::to_string(tc.epochs)},
                                                      {"time_steps", std::to_string(spec.time_steps)},
                                                      {"surrogate", to_string(tc.surrogate.kind)},
                                                      {"units", "accuracy in [0,1]; rates are spikes per neuron per step"}});
  std::vector<std::string> head = {"epoch", "train_acc", "test_acc", "loss"};
  std::size_t n_rates = 0;
  for (const auto &l : spec.layers)
    if (l.kind == LayerKind::Conv1d || l.kind == LayerKind::FC) head.push_back("rate_l" + std::to_string(n_rates++));
  log.row_vec(head);
  auto log_row = [&](const EpochLog &e) {
    std::vector<std::string> cells = {std::to_string(e.epoch), fmt_real(e.train_acc), fmt_real(e.test_acc),
                                      fmt_real(e.loss)};
    for (std::size_t i = 0; i < n_rates; ++i)
      cells.push_back(i < e.firing_rates.size() ? fmt_real(e.firing_rates[i]) : "");
    log.row_vec(cells);
  };

  auto net = resume ? network_of(*resume) : Network<float>::initialized(spec, mix_seed(run.seed, 0x1a17));
  if (resume)
    for (const auto &e : resume->meta.at("history")) log_row(epoch_log_from_json(e));
  // Checkpoints and the log are rewritten after every epoch so an
  // interrupted run can resume.
  auto persist = [&](const TrainResult &r) {
    auto best = r.best, last = r.last;
    best.meta["input"] = input_meta(run, adc);
    last.meta["input"] = input_meta(run, adc);
    save_checkpoint(dir / "best.ckpt", best);
    save_checkpoint(dir / "last.ckpt", last);
    write_text(dir / "train_log.csv", log.str());
  };
  auto res = train(net, train_set, test_set, tc,
                   [&](const EpochLog &e) {
                     log_row(e);
                     *opt.log << run.tag() << " epoch " << e.epoch << " loss " << fmt_real(e.loss) << " train "
                              << fmt_real(e.train_acc) << " test " << fmt_real(e.test_acc) << "\n";
                   },
                   resume ? &*resume : nullptr, resume_best ? &*resume_best : nullptr, persist);
  persist(res);

  RunResult rr;
  rr.run = run;
  rr.history = res.history;
  rr.best_epoch = res.best_epoch;
  rr.eval = evaluate(network_of(res.best), test_set, tc.threads);
  rr.test_acc = rr.eval.accuracy;
  if (run.encoding == InputEncoding::LcAdc) {
    std::vector<CompressionStats> seg;
    for (const auto *part : {&split.train, &split.test})
      for (const auto &w : *part) seg.push_back(compression_stats(encode(w.samples_mv, adc)));
    rr.input_reduction = aggregate(seg).reduction;
  }
  write_eval_files(dir, cfg, "train", run.tag(), rr.eval,
                   {{"best_epoch", rr.best_epoch}, {"input", input_meta(run, adc)},
                    {"input_reduction", rr.input_reduction}, {"train_config", tc}, {"network", to_json(spec)}});
  return rr;
}

inline std::vector<RunResult> cmd_train(const ExperimentConfig &cfg, const CommandOptions &opt) {
  cfg.validate();
  const auto split = load_split(cfg, opt);
  std::vector<RunResult> out;
  const RunSpec scnn{ModelKind::Scnn, cfg.encoding, cfg.lcadc.resolution_bits, cfg.bin_factor, cfg.train.seed};
  out.push_back(run_training(cfg, split, scnn, opt.out / "train" / scnn.tag(), opt));
  if (cfg.train_cnn) {
    const RunSpec cnn{ModelKind::Cnn, InputEncoding::Amplitude, cfg.lcadc.resolution_bits, cfg.bin_factor,
                      cfg.train.seed};
    out.push_back(run_training(cfg, split, cnn, opt.out / "train" / cnn.tag(), opt));
  }
  bench_detail::archive_config(opt.out / "train", cfg);
  for (const auto &r : out) *opt.log << "train: " << r.run.tag() << " test accuracy " << fmt_real(r.test_acc) << "\n";
  return out;
}

// ---------------------------------------------------------------- eval

/// Re-evaluates a checkpoint on the manifest's test split, encoding inputs
/// the way the checkpoint was trained.
inline Evaluation cmd_eval(const ExperimentConfig &cfg, const CommandOptions &opt,
                           const std::filesystem::path &checkpoint) {
  cfg.validate();
  const auto ck = load_checkpoint(checkpoint);
  if (!ck.meta.contains("input")) throw ConfigError(checkpoint.string() + " has no input description");
  const auto &in = ck.meta.at("input");
  const auto enc = input_encoding_from_string(in.at("encoding").get<std::string>());
  const auto adc = in.at("lcadc").get<LcAdcConfig>();
  const int bin = in.at("bin").get<int>();
  const auto split = load_split(cfg, opt);
  const auto test = make_samples(split.test, enc, adc, bin);
  const auto e = evaluate(network_of(ck), test, cfg.train.threads);
  const auto tag = checkpoint.parent_path().filename().string() + "-" + checkpoint.stem().string();
  const auto dir = opt.out / "eval" / tag;
  write_eval_files(dir, cfg, "eval", tag, e, {{"checkpoint", checkpoint.filename().string()}, {"input", in}});
  bench_detail::archive_config(dir, cfg);
  *opt.log << "eval: " << tag << " accuracy " << fmt_real(e.accuracy) << "\n";
  return e;
}

// ---------------------------------------------------------------- sweep

struct SweepCell {
  RunSpec run;
  bool ok = false;
  std::string error;
  RunResult result;
};

struct SweepGroup {
  ModelKind model;
  InputEncoding encoding;
  int bits, bin;
  std::vector<double> accs;
  double median = 0.0, mean = 0.0;
  double input_reduction = 0.0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<SweepGroup> groups;
  nlohmann::json summary;
  bool all_ok = true;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline std::vector<RunSpec> sweep_grid(const ExperimentConfig &cfg) {
  std::vector<RunSpec> g;
  const auto &s = cfg.sweep;
  for (int bin : s.bin_factors) {
    for (int bits : s.resolution_bits)
      for (auto seed : s.seeds) g.push_back({ModelKind::Scnn, InputEncoding::LcAdc, bits, bin, seed});
    if (s.amplitude_baseline)
      for (auto seed : s.seeds) g.push_back({ModelKind::Scnn, InputEncoding::Amplitude, 0, bin, seed});
    if (s.cnn_baseline)
      for (auto seed : s.seeds) g.push_back({ModelKind::Cnn, InputEncoding::Amplitude, 0, bin, seed});
  }
  return g;
}

/// Summary statistics and the ordering checks over a finished grid.
inline nlohmann::json summarize_sweep(const ExperimentConfig &cfg, std::vector<SweepGroup> &groups) {
  nlohmann::json per_bin = nlohmann::json::array();
  for (int bin : cfg.sweep.bin_factors) {
    const SweepGroup *amp = nullptr, *cnn = nullptr;
    std::vector<const SweepGroup *> lc;
    for (const auto &g : groups) {
      if (g.bin != bin || g.accs.empty()) continue;
      if (g.model == ModelKind::Cnn) cnn = &g;
      else if (g.encoding == InputEncoding::Amplitude) amp = &g;
      else lc.push_back(&g);
    }
    nlohmann::json b = {{"bin", bin}};
    if (!lc.empty()) {
      double lo = 1.0, hi = 0.0, mean = 0.0;
      for (const auto *g : lc) {
        lo = std::min(lo, g->median);
        hi = std::max(hi, g->median);
        mean += g->median;
      }
      mean /= static_cast<double>(lc.size());
      b["lcadc_band_pp"] = 100.0 * (hi - lo);
      b["lcadc_mean_of_medians"] = mean;
      // Highest compression (fewest bits) whose accuracy is within 2 pp of the best.
      int best_bits = -1;
      double best_red = -1.0;
      for (const auto *g : lc)
        if (g->median >= hi - 0.02 && g->input_reduction > best_red) {
          best_red = g->input_reduction;
          best_bits = g->bits;
        }
      b["compression_optimal_bits"] = best_bits;
      for (const auto *g : lc)
        if (g->bits == 5) b["scnn_m5_median"] = g->median;
      if (amp) {
        b["amplitude_median"] = amp->median;
        b["lcadc_ge_amplitude"] = mean >= amp->median;
      }
      if (cnn && b.contains("scnn_m5_median")) {
        b["cnn_median"] = cnn->median;
        b["cnn_minus_scnn_m5_pp"] = 100.0 * (cnn->median - b["scnn_m5_median"].get<double>());
      }
    }
    per_bin.push_back(b);
  }
  return per_bin;
}

inline SweepResult cmd_sweep(const ExperimentConfig &cfg, const CommandOptions &opt) {
  cfg.validate();
  const auto split = load_split(cfg, opt);
  SweepResult res;
  for (const auto &run : sweep_grid(cfg)) {
    SweepCell cell;
    cell.run = run;
    try {
      cell.result = run_training(cfg, split, run, opt.out / "sweep" / "cells" / run.tag(), opt);
      cell.ok = true;
    } catch (const std::exception &e) {
      cell.error = e.what();
      res.all_ok = false;
      *opt.log << "sweep: " << run.tag() << " failed: " << e.what() << "\n";
    }
    res.cells.push_back(std::move(cell));
  }

  for (const auto &c : res.cells) {
    auto it = std::find_if(res.groups.begin(), res.groups.end(), [&](const SweepGroup &g) {
      return g.model == c.run.model && g.encoding == c.run.encoding && g.bits == c.run.bits && g.bin == c.run.bin;
    });
    if (it == res.groups.end()) {
      res.groups.push_back({c.run.model, c.run.encoding, c.run.bits, c.run.bin, {}, 0.0, 0.0, 0.0});
      it = res.groups.end() - 1;
    }
    if (c.ok) {
      it->accs.push_back(c.result.test_acc);
      it->input_reduction = c.result.input_reduction;
    }
  }
  for (auto &g : res.groups) {
    g.median = median_of(g.accs);
    for (double a : g.accs) g.mean += a / static_cast<double>(g.accs.size());
  }

  const auto out = opt.out / "sweep";
  auto csv = bench_detail::report_csv("sweep", cfg, {{"epochs", std::to_string(cfg.train.epochs)},
                                                     {"time_steps", std::to_string(cfg.time_steps)},
                                                     {"units", "accuracy in [0,1]; bits=0 for amplitude input"}});
  csv.row("model", "encoding", "bits", "bin", "seed", "status", "test_acc", "best_epoch", "input_reduction", "error");
  for (const auto &c : res.cells)
    csv.row(to_string(c.run.model), to_string(c.run.encoding), c.run.bits, c.run.bin, c.run.seed,
            c.ok ? "ok" : "failed", c.result.test_acc, c.result.best_epoch, c.result.input_reduction,
            bench_detail::csv_quote(c.error));
  write_text(out / "sweep.csv", csv.str());

  auto fig = bench_detail::report_csv("sweep", cfg, {{"series", "x=bits y=median test accuracy, one series per bin"}});
  fig.row("series", "x", "y");
  nlohmann::json groups = nlohmann::json::array();
  for (const auto &g : res.groups) {
    const std::string series = to_string(g.model) + "-" + to_string(g.encoding) + "-b" + std::to_string(g.bin);
    if (!g.accs.empty()) fig.row(series, g.bits, g.median);
    groups.push_back({{"model", to_string(g.model)}, {"encoding", to_string(g.encoding)}, {"bits", g.bits},
                      {"bin", g.bin}, {"accuracies", g.accs}, {"median", g.median}, {"mean", g.mean},
                      {"input_reduction", g.input_reduction}});
  }
  write_text(out / "accuracy_by_bits.csv", fig.str());
  res.summary = bench_detail::report_meta("sweep", cfg);
  res.summary["groups"] = groups;
  res.summary["per_bin"] = summarize_sweep(cfg, res.groups);
  res.summary["failed_cells"] = std::count_if(res.cells.begin(), res.cells.end(), [](const SweepCell &c) { return !c.ok; });
  bench_detail::write_json(out / "sweep_summary.json", res.summary);
  bench_detail::archive_config(out, cfg);
  return res;
}

// ---------------------------------------------------------------- complexity

struct ComplexityReport {
  ComplexityParams params;
  std::vector<InterpretationRow> rows;
  std::string csv;
  nlohmann::json json;
};

inline ComplexityReport cmd_complexity(const ExperimentConfig &cfg, const CommandOptions &opt) {
  cfg.validate();
  const int len = binned_length(cfg.window.length(), cfg.bin_factor);
  const NetworkSpec spec = experiment_network(cfg, len);
  ComplexityReport r;
  r.params = complexity_params(spec);
  for (const auto &w : complexity_warnings(r.params)) *opt.log << "warning: " << w << "\n";
  r.rows = interpretation_table(r.params, cfg.complexity_steps);

  auto csv = bench_detail::report_csv(
      "complexity", cfg,
      {{"costs", "add=" + std::to_string(r.params.costs.add) + " mul=" + std::to_string(r.params.costs.mul) +
                     " branch=" + std::to_string(r.params.costs.branch)},
       {"network_hash", hex64(fnv1a(to_json(spec).dump()))},
       {"target_reduction", fmt_real(kComplexityTarget)},
       {"units", "cycle counts (cycles x bits); reduction = 1 - tc_scnn/tc_cnn"}});
  csv.row("variant", "mode", "cnn_ops", "scnn_ops", "scnn_branch", "cnn_bit", "scnn_bit", "t", "tc_cnn", "tc_scnn",
          "reduction", "within_2pp");
  nlohmann::json rows = nlohmann::json::array(), attaining = nlohmann::json::array();
  for (const auto &row : r.rows) {
    const bool hit = std::abs(row.reduction - kComplexityTarget) <= 0.02;
    csv.row(row.name, to_string(row.mode), row.cnn_ops, row.scnn_ops, row.scnn_branch, row.cnn_bit, row.scnn_bit, row.t,
            row.tc_cnn, row.tc_scnn, row.reduction, hit);
    rows.push_back({{"variant", row.name}, {"mode", to_string(row.mode)}, {"cnn_ops", row.cnn_ops},
                    {"scnn_ops", row.scnn_ops}, {"scnn_branch", row.scnn_branch}, {"cnn_bit", row.cnn_bit},
                    {"scnn_bit", row.scnn_bit}, {"t", row.t}, {"tc_cnn", row.tc_cnn}, {"tc_scnn", row.tc_scnn},
                    {"reduction", row.reduction}, {"within_2pp", hit}});
    if (hit) attaining.push_back({{"variant", row.name}, {"t", row.t}, {"reduction", row.reduction}});
  }
  r.csv = csv.str();
  r.json = bench_detail::report_meta("complexity", cfg);
  r.json["params"] = to_json(r.params);
  r.json["network"] = to_json(spec);
  r.json["rows"] = rows;
  r.json["target_reduction"] = kComplexityTarget;
  r.json["attaining_target"] = attaining;
  const auto out = opt.out / "complexity";
  write_text(out / "complexity.csv", r.csv);
  bench_detail::write_json(out / "complexity.json", r.json);
  bench_detail::archive_config(out, cfg);
  for (const auto &row : r.rows)
    if (row.t == cfg.time_steps)
      *opt.log << "complexity: " << row.name << " t=" << row.t << " reduction " << fmt_real(row.reduction) << "\n";
  return r;
}

// ---------------------------------------------------------------- report

/// Collects whatever the other commands produced into one summary and the
/// figure series.
inline nlohmann::json cmd_report(const ExperimentConfig &cfg, const CommandOptions &opt) {
  namespace fs = std::filesystem;
  nlohmann::json rep = bench_detail::report_meta("report", cfg);
  const auto out = opt.out / "report";
  const auto comp = opt.out / "compress" / "compression.json";
  if (fs::exists(comp)) {
    const auto j = nlohmann::json::parse(read_text(comp));
    rep["compression"] = j.at("summary");
    write_text(out / "reduction_by_bits.csv", read_text(opt.out / "compress" / "reduction_by_bits.csv"));
  }
  const auto sweep = opt.out / "sweep" / "sweep_summary.json";
  if (fs::exists(sweep)) {
    const auto j = nlohmann::json::parse(read_text(sweep));
    rep["sweep"] = j.at("per_bin");
    rep["sweep_groups"] = j.at("groups");
    write_text(out / "accuracy_by_bits.csv", read_text(opt.out / "sweep" / "accuracy_by_bits.csv"));
    auto fig = bench_detail::report_csv("report", cfg, {{"series", "median test accuracy per model"}});
    fig.row("model", "encoding", "bits", "bin", "median_acc");
    for (const auto &g : j.at("groups"))
      fig.row(g.at("model").get<std::string>(), g.at("encoding").get<std::string>(), g.at("bits").get<int>(),
              g.at("bin").get<int>(), g.at("median").get<double>());
    write_text(out / "accuracy_by_model.csv", fig.str());
  }
  const auto cx = opt.out / "complexity" / "complexity.json";
  if (fs::exists(cx)) {
    const auto j = nlohmann::json::parse(read_text(cx));
    rep["complexity_attaining_target"] = j.at("attaining_target");
    auto fig = bench_detail::report_csv("report", cfg, {{"series", "normalized complexity tc/tc_cnn per variant"}});
    fig.row("variant", "t", "cnn", "scnn");
    for (const auto &r : j.at("rows")) fig.row(r.at("variant").get<std::string>(), r.at("t").get<std::int64_t>(), 1.0,
                                               1.0 - r.at("reduction").get<double>());
    write_text(out / "complexity_by_t.csv", fig.str());
  }
  if (!rep.contains("compression") && !rep.contains("sweep") && !rep.contains("complexity_attaining_target"))
    throw Error("nothing to report under " + opt.out.string());
  bench_detail::write_json(out / "report.json", rep);
  bench_detail::archive_config(out, cfg);
  return rep;
}

} // namespace lcsnn
