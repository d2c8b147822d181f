#include <gtest/gtest.h>

#include <filesystem>
#include <set>

#include "lcsnn/common/rng.hpp"
#include "lcsnn/ingest/dataset.hpp"
#include "lcsnn/ingest/synthetic.hpp"
#include "lcsnn/ingest/wfdb.hpp"
#include "oracles.hpp"

using namespace lcsnn;

namespace {

std::filesystem::path temp_dir(const std::string &name) {
  auto p = std::filesystem::temp_directory_path() / ("lcsnn_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

EcgRecord flat_record(std::size_t n, std::vector<BeatAnnotation> anns) {
  EcgRecord r;
  r.record_id = "t";
  r.channels[0].assign(n, 1024);
  r.channels[1].assign(n, 1024);
  r.annotations = std::move(anns);
  return r;
}

std::vector<BeatWindow> fake_windows(std::array<std::size_t, 4> counts) {
  std::vector<BeatWindow> ws;
  std::int64_t c = 0;
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < counts[k]; ++i) {
      BeatWindow w;
      w.record_id = "r" + std::to_string(i % 7);
      w.center_index = c++;
      w.label = kTrainClasses[k];
      ws.push_back(w);
    }
  return ws;
}

} // namespace

TEST(Format212, KnownBytes) {
  EXPECT_EQ(decode_212(0xE8, 0x03, 0x00), (std::array<int, 2>{1000, 0}));
  EXPECT_EQ(decode_212(0xFF, 0xFF, 0xFF), (std::array<int, 2>{-1, -1}));
  EXPECT_EQ(decode_212(0x00, 0x88, 0x00), (std::array<int, 2>{-2048, -2048}));
  EXPECT_EQ(decode_212(0xFF, 0x77, 0xFF), (std::array<int, 2>{2047, 2047}));
}

TEST(Format212, RandomGroupsRoundTripAndMatchOracle) {
  Rng rng(212);
  for (int i = 0; i < 200000; ++i) {
    const auto b0 = static_cast<std::uint8_t>(rng.bounded(256));
    const auto b1 = static_cast<std::uint8_t>(rng.bounded(256));
    const auto b2 = static_cast<std::uint8_t>(rng.bounded(256));
    const auto s = decode_212(b0, b1, b2);
    ASSERT_EQ(s, oracle::decode_212(b0, b1, b2));
    ASSERT_EQ(encode_212(s[0], s[1]), (std::array<std::uint8_t, 3>{b0, b1, b2}));
  }
}

TEST(Format212, EncodeRejectsOutOfRange) {
  std::vector<int> a = {0, 2048}, b = {0, 0};
  EXPECT_THROW(encode_212_signal(a, b), ShapeError);
}

TEST(WfdbHeader, ParsesMitBihStyleHeader) {
  const std::string text = "100 2 360 650000\n"
                           "100.dat 212 200 11 1024 995 -22131 0 MLII\n"
                           "100.dat 212 200 11 1024 1011 20052 0 V5\n";
  const auto h = parse_wfdb_header(text);
  EXPECT_EQ(h.record_name, "100");
  EXPECT_EQ(h.num_signals, 2);
  EXPECT_DOUBLE_EQ(h.sampling_frequency, 360.0);
  EXPECT_EQ(h.num_samples, 650000);
  ASSERT_EQ(h.signals.size(), 2u);
  EXPECT_EQ(h.signals[0].format, 212);
  EXPECT_DOUBLE_EQ(h.signals[0].gain, 200.0);
  EXPECT_EQ(h.signals[0].resolution_bits, 11);
  EXPECT_EQ(h.signals[0].zero, 1024);
  EXPECT_EQ(h.signals[0].initial_value, 995);
  EXPECT_EQ(h.signals[0].checksum, -22131);
  EXPECT_EQ(h.signals[1].description, "V5");
}

TEST(WfdbHeader, GainWithBaselineAndUnits) {
  const auto h = parse_wfdb_header("x 2 360 10\nx.dat 212 200(1024)/mV 11 1024 0 0 0 a\nx.dat 212 200/mV 11 1024 0 0 0 b\n");
  EXPECT_DOUBLE_EQ(h.signals[0].gain, 200.0);
  EXPECT_DOUBLE_EQ(h.signals[1].gain, 200.0);
}

TEST(WfdbRecord, ParseRejectsBadInput) {
  const std::string hdr = "r 2 360 2\nr.dat 212 200 11 1024\nr.dat 212 200 11 1024\n";
  std::vector<std::uint8_t> bytes = {0xE8, 0x03, 0x00, 0x01, 0x00, 0x00};
  EXPECT_NO_THROW(parse_wfdb_212(hdr, bytes));
  std::vector<std::uint8_t> odd = {0xE8, 0x03, 0x00, 0x01};
  EXPECT_THROW(parse_wfdb_212(hdr, odd), ParseError);
  std::vector<std::uint8_t> short_bytes = {0xE8, 0x03, 0x00};
  EXPECT_THROW(parse_wfdb_212(hdr, short_bytes), ParseError);
  EXPECT_THROW(parse_wfdb_212("r 2 360 2\nr.dat 16 200 11 1024\nr.dat 16 200 11 1024\n", bytes),
               UnsupportedFormat);
  EXPECT_THROW(parse_wfdb_212("r 1 360 2\nr.dat 212 200 11 1024\n", bytes), UnsupportedFormat);
  EXPECT_THROW(parse_wfdb_212("r 2 360 2\nr.dat 212 200 11 1024 999\nr.dat 212 200 11 1024\n", bytes),
               ParseError);
  EXPECT_THROW(parse_wfdb_212("r 2 360 2\nr.dat 212 200 11 1024 1000 5\nr.dat 212 200 11 1024\n", bytes),
               ParseError);
  EXPECT_NO_THROW(parse_wfdb_212("r 2 360 2\nr.dat 212 200 11 1024 1000 1001\nr.dat 212 200 11 1024\n", bytes));
}

TEST(Annotations, SingleNormalBeat) {
  const unsigned w = (1u << 10) | 360u;
  std::vector<std::uint8_t> bytes = {static_cast<std::uint8_t>(w & 0xFF), static_cast<std::uint8_t>(w >> 8), 0, 0};
  const auto anns = parse_annotations(bytes);
  ASSERT_EQ(anns.size(), 1u);
  EXPECT_EQ(anns[0].sample_index, 360);
  EXPECT_EQ(anns[0].symbol, 'N');
  EXPECT_EQ(anns[0].aami_class, AamiClass::N);
}

TEST(Annotations, EmptyAndDangling) {
  EXPECT_TRUE(parse_annotations({}).empty());
  std::vector<std::uint8_t> one = {0x68};
  EXPECT_THROW(parse_annotations(one), ParseError);
  std::vector<std::uint8_t> skip = {0x00, static_cast<std::uint8_t>(59 << 2), 0x00};
  EXPECT_THROW(parse_annotations(skip), ParseError);
}

TEST(Annotations, SkipAuxAndNonBeatCodes) {
  std::vector<std::uint8_t> b;
  auto put = [&](unsigned w) {
    b.push_back(static_cast<std::uint8_t>(w & 0xFF));
    b.push_back(static_cast<std::uint8_t>(w >> 8));
  };
  put(59u << 10); // SKIP 70000 = 0x00011170
  put(0x0001);
  put(0x1170);
  put((5u << 10) | 10u); // V at 70010
  put((63u << 10) | 3u); // AUX, 3 bytes + pad
  b.insert(b.end(), {'(', 'N', 0, 0});
  put((28u << 10) | 0u); // '+' rhythm change, same sample
  put((60u << 10) | 1u); // NUM
  put((8u << 10) | 5u);  // A at 70015
  put(0);
  const auto a = parse_annotations(b);
  ASSERT_EQ(a.size(), 3u);
  EXPECT_EQ(a[0].sample_index, 70010);
  EXPECT_EQ(a[0].aami_class, AamiClass::VEB);
  EXPECT_EQ(a[1].symbol, '+');
  EXPECT_EQ(a[1].aami_class, AamiClass::NonBeat);
  EXPECT_EQ(a[1].sample_index, 70010);
  EXPECT_EQ(a[2].sample_index, 70015);
  EXPECT_EQ(a[2].aami_class, AamiClass::SVEB);
}

TEST(Annotations, RandomStreamsRoundTripWithNonDecreasingIndices) {
  const std::string symbols = "NLRaVFJASEj/Qf+~x|";
  Rng rng(77);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<BeatAnnotation> anns;
    std::int64_t t = 0;
    const auto n = rng.bounded(60);
    for (std::uint64_t i = 0; i < n; ++i) {
      const auto kind = rng.bounded(10);
      t += kind == 0 ? 0 : (kind == 1 ? static_cast<std::int64_t>(1024 + rng.bounded(200000)) : static_cast<std::int64_t>(rng.bounded(1024)));
      const char s = symbols[rng.bounded(symbols.size())];
      anns.push_back({t, s, map_to_aami(s)});
    }
    const auto back = parse_annotations(encode_annotations(anns));
    ASSERT_EQ(back, anns);
    for (std::size_t i = 1; i < back.size(); ++i) ASSERT_LE(back[i - 1].sample_index, back[i].sample_index);
  }
}

TEST(Aami, MappingTable) {
  for (char c : std::string("NLRej")) EXPECT_EQ(map_to_aami(c), AamiClass::N) << c;
  for (char c : std::string("AaJS")) EXPECT_EQ(map_to_aami(c), AamiClass::SVEB) << c;
  for (char c : std::string("VE")) EXPECT_EQ(map_to_aami(c), AamiClass::VEB) << c;
  EXPECT_EQ(map_to_aami('F'), AamiClass::F);
  for (char c : std::string("Q/f")) EXPECT_EQ(map_to_aami(c), AamiClass::Q) << c;
  for (char c : std::string("+~|x!\"[]")) EXPECT_EQ(map_to_aami(c), AamiClass::NonBeat) << c;
  EXPECT_EQ(label_index(AamiClass::F), 3);
  EXPECT_FALSE(label_index(AamiClass::Q).has_value());
}

TEST(WfdbRecord, DirectoryRoundTrip) {
  const auto dir = temp_dir("wfdb_rt");
  SyntheticConfig cfg;
  cfg.num_records = 2;
  cfg.duration_s = 20;
  const auto ids = write_synthetic_corpus(dir, cfg);
  EXPECT_EQ(list_records(dir), ids);
  for (int i = 0; i < 2; ++i) {
    const auto want = generate_synthetic_record(cfg, i);
    const auto got = load_record(dir, ids[static_cast<std::size_t>(i)]);
    EXPECT_EQ(got.channels, want.channels);
    EXPECT_EQ(got.annotations, want.annotations);
    EXPECT_DOUBLE_EQ(got.adc_gain, 200.0);
    EXPECT_EQ(got.adc_zero, 1024);
    EXPECT_EQ(got.sampling_rate_hz, 360);
  }
}

TEST(WfdbRecord, CsvFallback) {
  const auto dir = temp_dir("csv_rt");
  auto r = flat_record(5, {{2, 'V', AamiClass::VEB}});
  r.record_id = "c1";
  r.channels[0] = {1, 2, 3, 4, 5};
  write_text(dir / "c1.csv", format_csv_record(r));
  write_text(dir / "c1.ann.csv", format_csv_annotations(r));
  EXPECT_EQ(list_records(dir), std::vector<std::string>{"c1"});
  const auto back = load_record(dir, "c1");
  EXPECT_EQ(back.channels[0], r.channels[0]);
  EXPECT_EQ(back.annotations, r.annotations);
  EXPECT_THROW(load_record(dir, "missing"), Error);
}

TEST(Segment, WindowBoundaries) {
  const std::size_t n = 1000;
  auto r = flat_record(n, {{127, 'N', AamiClass::N},
                           {128, 'V', AamiClass::VEB},
                           {static_cast<std::int64_t>(n - 192), 'A', AamiClass::SVEB},
                           {static_cast<std::int64_t>(n - 191), 'F', AamiClass::F},
                           {500, 'Q', AamiClass::Q},
                           {501, '+', AamiClass::NonBeat}});
  r.channels[0][0] = 1224;
  r.channels[0][319] = 824;
  const auto s = segment_beats(r, {}, 0);
  ASSERT_EQ(s.windows.size(), 2u);
  EXPECT_EQ(s.skipped_boundary, 2u);
  EXPECT_EQ(s.skipped_class, 1u);
  EXPECT_EQ(s.windows[0].label, AamiClass::VEB);
  ASSERT_EQ(s.windows[0].samples_mv.size(), 320u);
  EXPECT_DOUBLE_EQ(s.windows[0].samples_mv.front(), 1.0);
  EXPECT_DOUBLE_EQ(s.windows[0].samples_mv.back(), -1.0);
  EXPECT_THROW(segment_beats(r, {}, 2), ConfigError);
}

TEST(Split, BalancedFourToOne) {
  const auto ws = fake_windows({5000, 1000, 900, 802});
  const auto split = balance_and_split(ws, 800, 42);
  EXPECT_EQ(split.train.size(), 2560u);
  EXPECT_EQ(split.test.size(), 640u);
  EXPECT_EQ(count_labels(split.train), (std::array<std::size_t, 4>{640, 640, 640, 640}));
  EXPECT_EQ(count_labels(split.test), (std::array<std::size_t, 4>{160, 160, 160, 160}));
  std::set<std::int64_t> tr, te;
  for (const auto &w : split.train) tr.insert(w.center_index);
  for (const auto &w : split.test) te.insert(w.center_index);
  EXPECT_EQ(tr.size(), 2560u);
  for (auto c : te) EXPECT_FALSE(tr.count(c));
}

TEST(Split, DeterministicForSeed) {
  const auto ws = fake_windows({50, 40, 30, 20});
  const auto a = balance_and_split(ws, 1, 9), b = balance_and_split(ws, 1, 9);
  ASSERT_EQ(a.train.size(), 0u);
  ASSERT_EQ(a.test.size(), 4u);
  for (std::size_t i = 0; i < a.test.size(); ++i) EXPECT_EQ(a.test[i].center_index, b.test[i].center_index);
  const auto c = balance_and_split(ws, 10, 9), d = balance_and_split(ws, 10, 9), e = balance_and_split(ws, 10, 10);
  bool differs = false;
  for (std::size_t i = 0; i < c.train.size(); ++i) {
    EXPECT_EQ(c.train[i].center_index, d.train[i].center_index);
    differs |= c.train[i].center_index != e.train[i].center_index;
  }
  EXPECT_TRUE(differs);
}

TEST(Split, InsufficientClassReportsAvailability) {
  const auto ws = fake_windows({5000, 1000, 1000, 802});
  try {
    balance_and_split(ws, 900, 1);
    FAIL() << "expected InsufficientData";
  } catch (const InsufficientData &e) {
    EXPECT_EQ(e.class_name(), "F");
    EXPECT_EQ(e.available(), 802u);
  }
}

TEST(Synthetic, DeterministicAndCoversEveryClass) {
  SyntheticConfig cfg;
  cfg.duration_s = 120;
  const auto a = generate_synthetic_record(cfg, 0), b = generate_synthetic_record(cfg, 0);
  EXPECT_EQ(a.channels, b.channels);
  EXPECT_EQ(a.annotations, b.annotations);
  const auto c = generate_synthetic_record(cfg, 1);
  EXPECT_NE(a.channels, c.channels);
  EXPECT_NO_THROW(a.validate());
  const auto counts = count_labels(segment_beats(a, {}, 0).windows);
  for (auto k : counts) EXPECT_GT(k, 5u);
  for (int v : a.channels[0]) {
    ASSERT_GE(v, 0);
    ASSERT_LE(v, 2047);
  }
}
