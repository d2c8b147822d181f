// Acceptance runner: one PASS / FAIL / SKIP line per criterion, INFO lines
// for supporting numbers. Exits nonzero iff a criterion fails. Criteria that
// need the real arrhythmia corpus are covered by acceptance_corpus.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>

#include <unistd.h>

#include "lcsnn/bench/commands.hpp"
#include "lcsnn/ingest/synthetic.hpp"
#include "oracles.hpp"

using namespace lcsnn;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void verdict(bool ok, const std::string &id, const std::string &what) {
  std::printf("%s %s %s\n", ok ? "PASS" : "FAIL", id.c_str(), what.c_str());
  std::fflush(stdout);
  failures += !ok;
}

void skip(const std::string &id, const std::string &what) { std::printf("SKIP %s %s\n", id.c_str(), what.c_str()); }

void info(const std::string &id, const std::string &what) {
  std::printf("INFO %s %s\n", id.c_str(), what.c_str());
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string pct(double x) { return fmt_real(std::round(x * 10000.0) / 100.0) + "%"; }

std::vector<double> random_walk(Rng &rng, std::size_t n, double step) {
  std::vector<double> x(n);
  double v = rng.uniform(-1.0, 1.0), slope = 0.0;
  for (auto &s : x) {
    slope = 0.9 * slope + rng.normal(0.0, step);
    v += slope;
    s = v;
  }
  return x;
}

std::size_t spike_count(const TernarySpikeTrain &t) {
  std::size_t n = 0;
  for (int v : t.values) n += v != 0;
  return n;
}

LcAdcConfig bits(int m) {
  LcAdcConfig c;
  c.resolution_bits = m;
  return c;
}

std::map<std::string, std::string> snapshot(const fs::path &root) {
  std::map<std::string, std::string> files;
  for (const auto &e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files[fs::relative(e.path(), root).string()] = read_text(e.path());
  return files;
}

// ---------------------------------------------------------------------------

// Determinism, shift invariance, resolution monotonicity and agreement with
// the reference converter.
bool lcadc_properties() {
  Rng rng(101);
  for (int trial = 0; trial < 300; ++trial) {
    const auto x = random_walk(rng, 1 + rng.bounded(800), rng.uniform(0.002, 0.05));
    const int m = 1 + static_cast<int>(rng.bounded(16));
    const auto a = encode(x, bits(m));
    if (!(a == encode(x, bits(m)))) return info("C5c", "determinism broken"), false;
    if (a.values != oracle::lcadc(x, 10.0, m)) return info("C5c", "reference converter disagrees"), false;
    std::size_t prev = 0;
    for (int k = 1; k <= 16; ++k) {
      const auto n = spike_count(encode(x, bits(k)));
      if (n < prev) return info("C5c", "spike count fell from M=" + std::to_string(k - 1)), false;
      prev = n;
    }
  }
  for (int trial = 0; trial < 300; ++trial) {
    // Dyadic samples and offsets keep every difference exact.
    std::vector<double> x(400), y(400);
    long v = static_cast<long>(rng.bounded(2048)) - 1024;
    for (auto &s : x) {
      v += static_cast<long>(rng.bounded(41)) - 20;
      s = static_cast<double>(v) / 256.0;
    }
    const double c = (static_cast<double>(rng.bounded(8192)) - 4096.0) / 64.0;
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] + c;
    const int m = 3 + static_cast<int>(rng.bounded(10));
    if (!(encode(x, bits(m)) == encode(y, bits(m)))) return info("C5c", "shift changed the spike train"), false;
  }
  return true;
}

void criterion_1(bool lcadc_ok, const fs::path &work) {
  if (const char *dir = std::getenv("LCSNN_MITDB_DIR"); dir && *dir)
    info("C1", std::string("corpus at ") + dir + " is checked by acceptance_corpus");
  else
    skip("C1", "reduction on the 48-record corpus: LCSNN_MITDB_DIR not set (acceptance_corpus checks it)");

  const auto t0 = std::chrono::steady_clock::now();
  SyntheticConfig s;
  s.num_records = 8;
  s.duration_s = 300;
  const auto corpus = work / "c1_corpus";
  write_synthetic_corpus(corpus, s);
  ExperimentConfig cfg;
  cfg.corpus_dir = corpus.string();
  cfg.per_class = 20;
  cfg.train.threads = 1;
  cfg.compress_bits = {3, 4, 5, 6, 7, 8, 9};
  CommandOptions opt;
  opt.out = work / "c1_out";
  std::ostringstream quiet;
  opt.log = &quiet;
  cmd_ingest(cfg, opt);
  const auto res = cmd_compress(cfg, opt);
  bool monotone = true;
  std::string series;
  for (std::size_t i = 0; i < res.summary.size(); ++i) {
    const auto &sm = res.summary[i];
    series += (i ? " " : "") + std::string("M") + std::to_string(sm.bits) + "=" + pct(sm.full_record.reduction);
    if (i && sm.full_record.reduction > res.summary[i - 1].full_record.reduction) monotone = false;
  }
  std::map<std::string, std::vector<double>> per_record;
  for (const auto &r : res.records) per_record[r.record_id].push_back(r.stats.reduction);
  for (const auto &[id, red] : per_record)
    for (std::size_t i = 1; i < red.size(); ++i) monotone = monotone && red[i] <= red[i - 1];
  const double secs = seconds_since(t0);
  info("C1", "synthetic reduction " + series + " (" + fmt_real(std::round(secs * 10) / 10) + " s, 1 thread)");
  verdict(monotone && lcadc_ok && secs < 300.0, "C1",
          "synthetic fallback: reduction non-increasing in M on every record and pooled, lc-adc property suites " +
              std::string(lcadc_ok ? "pass" : "fail"));
}

// Synthetic stand-in for the accuracy criteria: same pipeline and grid at a
// reduced size. Reported, never scored.
void criteria_2_3_proxy(const fs::path &work) {
  skip("C2", "accuracy >= 90.0% on the balanced 3200-window corpus split: needs LCSNN_MITDB_DIR (acceptance_corpus)");
  skip("C3", "accuracy orderings on the corpus: needs LCSNN_MITDB_DIR (acceptance_corpus)");
  const auto t0 = std::chrono::steady_clock::now();
  SyntheticConfig s;
  s.num_records = 6;
  s.duration_s = 300;
  const auto corpus = work / "proxy_corpus";
  write_synthetic_corpus(corpus, s);
  ExperimentConfig cfg;
  cfg.corpus_dir = corpus.string();
  cfg.per_class = 100;
  cfg.bin_factor = 2;
  cfg.train.epochs = 10;
  cfg.sweep.bin_factors = {2};
  CommandOptions opt;
  opt.out = work / "proxy_out";
  std::ostringstream quiet;
  opt.log = &quiet;
  cmd_ingest(cfg, opt);
  const auto sw = cmd_sweep(cfg, opt);
  for (const auto &g : sw.groups) {
    std::string accs;
    for (double a : g.accs) accs += (accs.empty() ? "" : ",") + pct(a);
    info("C2-proxy", to_string(g.model) + "-" + to_string(g.encoding) + (g.bits ? "-m" + std::to_string(g.bits) : "") +
                         " median " + pct(g.median) + " [" + accs + "]");
  }
  const auto &b = sw.summary.at("per_bin").at(0);
  auto num = [&](const char *k) { return b.contains(k) ? pct(b.at(k).get<double>()) : std::string("n/a"); };
  auto pp = [&](const char *k) {
    return b.contains(k) ? fmt_real(std::round(b.at(k).get<double>() * 100.0) / 100.0) + " pp" : std::string("n/a");
  };
  info("C3-proxy", "cnn - scnn(M5) " + pp("cnn_minus_scnn_m5_pp") + "; M band " + pp("lcadc_band_pp") +
                       "; lc-adc mean " + num("lcadc_mean_of_medians") + " vs amplitude " + num("amplitude_median"));
  info("C2-proxy", "synthetic corpus, 400 windows, 10 epochs, " + fmt_real(std::round(seconds_since(t0))) +
                       " s; not a substitute for the corpus criteria");
}

void criterion_4() {
  const auto cases = oracle::complexity_cases();
  std::size_t exact = 0;
  for (const auto &c : cases) {
    const auto got = c.spiking ? tc_scnn(c.params) : tc_cnn(c.params);
    if (got == c.expected) ++exact;
    else info("C4", c.name + ": got " + std::to_string(got) + ", expected " + std::to_string(c.expected));
  }
  verdict(exact == cases.size() && cases.size() >= 20, "C4",
          "cycle counts equal hand-substituted values on " + std::to_string(exact) + "/" + std::to_string(cases.size()) +
              " parameter sets");

  std::vector<std::int64_t> steps;
  for (std::int64_t t = 1; t <= 320; ++t) steps.push_back(t);
  const auto rows = interpretation_table(complexity_params(default_network(320, 10)), steps);
  const InterpretationRow *hit = nullptr;
  for (const auto &r : rows)
    if (r.name == "decomposition" && r.t == 10) hit = &r;
  std::map<std::string, std::pair<std::int64_t, std::int64_t>> span; // first and last attaining t
  for (const auto &r : rows)
    if (std::abs(r.reduction - 0.968) <= 0.02) {
      auto [it, fresh] = span.try_emplace(r.name, r.t, r.t);
      if (!fresh) it->second.second = r.t;
    }
  std::string attaining;
  for (const auto &[name, ts] : span)
    attaining += " " + name + " t=" + std::to_string(ts.first) + ".." + std::to_string(ts.second);
  info("C4", "variants within 96.8% +- 2 pp:" + attaining);
  verdict(hit && std::abs(hit->reduction - 0.968) <= 0.02, "C4",
          "default architecture, decomposition mode (mul 10, add 1, 32-bit CNN, 1-bit SCNN, t=10): reduction " +
              (hit ? pct(hit->reduction) : std::string("missing")) + ", target 96.8% +- 2 pp");
}

void criterion_5a() {
  const auto stats = oracle::gradcheck_random(2024, 100);
  info("C5a", std::to_string(stats.checked) + " coordinates checked, " + std::to_string(stats.skipped) +
                  " skipped at a spike/clamp boundary, " + std::to_string(stats.hard_spikes) + " spikes, " +
                  std::to_string(stats.clamped) + " clamps; worst " + stats.worst);
  verdict(stats.nets == 100 && stats.max_rel_err < 1e-4 && stats.checked > 10 * stats.skipped, "C5a",
          "surrogate gradient vs central differences on 100 random nets: max rel err " + fmt_real(stats.max_rel_err) +
              " < 1e-4");
}

void criterion_5b() {
  Rng rng(55);
  int exact = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int cin = 1 + static_cast<int>(rng.bounded(4)), cout = 1 + static_cast<int>(rng.bounded(5));
    const int k = 1 + static_cast<int>(rng.bounded(5)), stride = 1 + static_cast<int>(rng.bounded(3));
    const int pad = static_cast<int>(rng.bounded(static_cast<std::uint64_t>(k)));
    const int len = k + static_cast<int>(rng.bounded(40));
    const auto l = LayerSpec::conv(cin, cout, k, stride, pad);
    // Dyadic weights: every partial sum is exact, so equality is bitwise.
    auto dyadic = [&] { return (static_cast<double>(rng.bounded(513)) - 256.0) / 64.0; };
    std::vector<double> w(static_cast<std::size_t>(cout * cin * k)), b(static_cast<std::size_t>(cout));
    for (auto &v : w) v = dyadic();
    for (auto &v : b) v = dyadic();
    SpikeTensor x(cin, len);
    oracle::Tensor ref{cin, len, std::vector<double>(static_cast<std::size_t>(cin * len))};
    for (int c = 0; c < cin; ++c)
      for (int j = 0; j < len; ++j) {
        x.at(c, j) = static_cast<std::int8_t>(static_cast<int>(rng.bounded(3)) - 1);
        ref.at(c, j) = x.at(c, j);
      }
    exact += conv1d_spiking_forward(x, l, w, b) == oracle::conv(ref, l, w.data(), b.data()).v;
  }
  verdict(exact == 1000, "C5b", "spiking conv accumulation equals dense MAC exactly on " + std::to_string(exact) + "/1000 cases");
}

void criterion_5d() {
  Rng rng(212);
  long exact = 0;
  for (long i = 0; i < 1000000; ++i) {
    const auto v = rng.next();
    const auto b0 = static_cast<std::uint8_t>(v), b1 = static_cast<std::uint8_t>(v >> 8),
               b2 = static_cast<std::uint8_t>(v >> 16);
    const auto s = decode_212(b0, b1, b2);
    exact += s == oracle::decode_212(b0, b1, b2) && encode_212(s[0], s[1]) == std::array<std::uint8_t, 3>{b0, b1, b2};
  }
  verdict(exact == 1000000, "C5d", "format 212 decode/encode round-trip exact on " + std::to_string(exact) + "/1000000 groups");
}

void criterion_6(const fs::path &work) {
  SyntheticConfig s;
  s.num_records = 3;
  s.duration_s = 120;
  const auto corpus = work / "c6_corpus";
  write_synthetic_corpus(corpus, s);
  ExperimentConfig cfg;
  cfg.corpus_dir = corpus.string();
  cfg.per_class = 25;
  cfg.bin_factor = 4;
  cfg.train.epochs = 2;
  cfg.train_cnn = true;
  cfg.sweep.resolution_bits = {5, 6};
  cfg.sweep.bin_factors = {4};
  cfg.sweep.seeds = {1, 2};
  auto run = [&](const fs::path &out, int threads) {
    auto c = cfg;
    c.train.threads = threads;
    CommandOptions opt;
    opt.out = out;
    std::ostringstream quiet;
    opt.log = &quiet;
    cmd_ingest(c, opt);
    cmd_compress(c, opt);
    cmd_train(c, opt);
    cmd_eval(c, opt, out / "train" / "scnn-lcadc-m5-b4-s1" / "best.ckpt");
    cmd_sweep(c, opt);
    cmd_complexity(c, opt);
    cmd_report(c, opt);
    return snapshot(out);
  };
  const auto out = work / "c6_out";
  const auto a = run(out, 1);
  fs::remove_all(out);
  const auto b = run(out, 2);
  std::size_t same = 0, reports = 0;
  for (const auto &[name, text] : a) {
    const auto it = b.find(name);
    if (it != b.end() && it->second == text) ++same;
    else info("C6", "differs: " + name);
    reports += name.ends_with(".csv") || name.ends_with(".json");
  }
  verdict(a.size() == b.size() && same == a.size() && reports > 20, "C6",
          "every command rerun with identical config and seed: " + std::to_string(same) + "/" + std::to_string(a.size()) +
              " output files byte-identical (" + std::to_string(reports) + " CSV/JSON reports)");
}

} // namespace

int main() {
  const auto work = fs::temp_directory_path() / ("lcsnn_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(work);
  fs::create_directories(work);
  try {
    const bool lcadc_ok = lcadc_properties();
    criterion_1(lcadc_ok, work);
    criteria_2_3_proxy(work);
    criterion_4();
    criterion_5a();
    criterion_5b();
    verdict(lcadc_ok, "C5c", "lc-adc determinism, shift invariance, resolution monotonicity and reference agreement");
    criterion_5d();
    criterion_6(work);
  } catch (const std::exception &e) {
    verdict(false, "ERROR", e.what());
  }
  fs::remove_all(work);
  std::printf("%s: %d failing criteria\n", failures ? "FAILED" : "OK", failures);
  return failures ? EXIT_FAILURE : EXIT_SUCCESS;
}
