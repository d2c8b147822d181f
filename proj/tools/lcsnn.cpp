// lcsnn: command-line driver for the LC-ADC + spiking CNN ECG pipeline.

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lcsnn/bench/commands.hpp"
#include "lcsnn/ingest/synthetic.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<int> bits;
  std::vector<int> bins;
  std::string out;
  bool allow_partial = false;
  bool resume = false;
  std::optional<int> epochs;
  std::optional<int> threads;
};

void add_common(CLI::App *sub, Flags &f) {
  sub->add_option("--config", f.config, "experiment config (JSON)");
  sub->add_option("--seed", f.seed, "training seed");
  sub->add_option("--out", f.out, "output directory");
  sub->add_option("--epochs", f.epochs, "override train.epochs");
  sub->add_option("--threads", f.threads, "worker threads (0: all cores)");
}

lcsnn::ExperimentConfig resolve(const Flags &f) {
  lcsnn::ExperimentConfig c = f.config.empty() ? lcsnn::ExperimentConfig{} : lcsnn::load_experiment(f.config);
  if (f.seed) c.train.seed = *f.seed;
  if (!f.out.empty()) c.out_dir = f.out;
  if (f.epochs) c.train.epochs = *f.epochs;
  if (f.threads) c.train.threads = *f.threads;
  if (!f.bits.empty()) {
    c.compress_bits = f.bits;
    c.sweep.resolution_bits = f.bits;
    c.lcadc.resolution_bits = f.bits.front();
  }
  if (!f.bins.empty()) {
    c.sweep.bin_factors = f.bins;
    c.bin_factor = f.bins.front();
  }
  c.validate();
  return c;
}

lcsnn::CommandOptions options(const lcsnn::ExperimentConfig &c, const Flags &f) {
  lcsnn::CommandOptions o;
  o.out = c.out_dir;
  o.allow_partial = f.allow_partial;
  o.resume = f.resume;
  return o;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"LC-ADC spike encoding and spiking CNN arrhythmia classification"};
  app.set_version_flag("--version", std::string(lcsnn::kVersion));
  app.require_subcommand(1);
  Flags f;

  auto *ingest = app.add_subcommand("ingest", "segment the corpus and draw the balanced split");
  add_common(ingest, f);
  ingest->add_flag("--allow-partial", f.allow_partial, "continue when configured records are missing");

  auto *compress = app.add_subcommand("compress", "LC-ADC data-point reduction per resolution");
  add_common(compress, f);
  compress->add_option("--bits", f.bits, "resolutions to evaluate")->delimiter(',');

  auto *train = app.add_subcommand("train", "train the SCNN (and the CNN baseline when enabled)");
  add_common(train, f);
  train->add_option("--bits", f.bits, "LC-ADC resolution")->delimiter(',');
  train->add_option("--bin", f.bins, "input bin factor")->delimiter(',');
  train->add_flag("--resume", f.resume, "continue from last.ckpt when present");

  std::string checkpoint;
  auto *eval = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
  add_common(eval, f);
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();

  auto *sweep = app.add_subcommand("sweep", "accuracy and compression over resolution x bin factor");
  add_common(sweep, f);
  sweep->add_option("--bits", f.bits, "resolutions")->delimiter(',');
  sweep->add_option("--bin", f.bins, "bin factors")->delimiter(',');
  sweep->add_flag("--resume", f.resume, "continue cells from last.ckpt when present");

  auto *complexity = app.add_subcommand("complexity", "cycle-count model of SCNN vs CNN");
  add_common(complexity, f);
  complexity->add_option("--bin", f.bins, "input bin factor")->delimiter(',');

  auto *report = app.add_subcommand("report", "collect outputs into report.json and figure series");
  add_common(report, f);

  lcsnn::SyntheticConfig synth_cfg;
  std::string synth_dir = "data/synthetic";
  auto *synth = app.add_subcommand("synth", "write a synthetic two-channel ECG corpus in WFDB format");
  synth->add_option("--dir", synth_dir, "destination directory");
  synth->add_option("--records", synth_cfg.num_records, "record count");
  synth->add_option("--duration", synth_cfg.duration_s, "seconds per record");
  synth->add_option("--seed", synth_cfg.seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      const auto ids = lcsnn::write_synthetic_corpus(synth_dir, synth_cfg);
      std::cerr << "synth: wrote " << ids.size() << " records to " << synth_dir << "\n";
      return EXIT_SUCCESS;
    }
    const auto cfg = resolve(f);
    const auto opt = options(cfg, f);
    if (ingest->parsed()) {
      lcsnn::cmd_ingest(cfg, opt);
    } else if (compress->parsed()) {
      lcsnn::cmd_compress(cfg, opt);
    } else if (train->parsed()) {
      lcsnn::cmd_train(cfg, opt);
    } else if (eval->parsed()) {
      lcsnn::cmd_eval(cfg, opt, checkpoint);
    } else if (sweep->parsed()) {
      if (!lcsnn::cmd_sweep(cfg, opt).all_ok) return EXIT_FAILURE;
    } else if (complexity->parsed()) {
      lcsnn::cmd_complexity(cfg, opt);
    } else if (report->parsed()) {
      lcsnn::cmd_report(cfg, opt);
    }
  } catch (const lcsnn::InsufficientData &e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const lcsnn::ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}
