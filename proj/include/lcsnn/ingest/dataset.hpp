#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lcsnn/common/errors.hpp"
#include "lcsnn/common/rng.hpp"
#include "lcsnn/ingest/aami.hpp"
#include "lcsnn/ingest/wfdb.hpp"

namespace lcsnn {

struct WindowGeometry {
  int pre = 128;
  int post = 192;

  int length() const { return pre + post; }
};

struct BeatWindow {
  std::string record_id;
  std::int64_t center_index = 0;
  std::vector<double> samples_mv;
  AamiClass label = AamiClass::N;
};

struct SegmentResult {
  std::vector<BeatWindow> windows;
  std::size_t skipped_boundary = 0;
  std::size_t skipped_class = 0; // Q and non-beat annotations
};

/// One window per N/SVEB/VEB/F beat whose [center - pre, center + post)
/// span lies inside the record.
inline SegmentResult segment_beats(const EcgRecord &record, WindowGeometry geom, int channel) {
  if (channel != 0 && channel != 1) throw ConfigError("channel must be 0 or 1");
  if (geom.pre < 0 || geom.post < 0 || geom.length() <= 0)
    throw ConfigError("window geometry must be non-negative with positive length");
  SegmentResult res;
  const auto &ch = record.channels[static_cast<std::size_t>(channel)];
  const auto n = static_cast<std::int64_t>(ch.size());
  for (const auto &a : record.annotations) {
    if (a.aami_class == AamiClass::NonBeat) continue;
    if (!label_index(a.aami_class)) {
      ++res.skipped_class;
      continue;
    }
    const std::int64_t lo = a.sample_index - geom.pre;
    const std::int64_t hi = a.sample_index + geom.post;
    if (lo < 0 || hi > n) {
      ++res.skipped_boundary;
      continue;
    }
    BeatWindow w;
    w.record_id = record.record_id;
    w.center_index = a.sample_index;
    w.label = a.aami_class;
    w.samples_mv.resize(static_cast<std::size_t>(geom.length()));
    for (std::int64_t i = lo; i < hi; ++i)
      w.samples_mv[static_cast<std::size_t>(i - lo)] = record.to_mv(ch[static_cast<std::size_t>(i)]);
    res.windows.push_back(std::move(w));
  }
  return res;
}

struct DatasetSplit {
  std::vector<BeatWindow> train;
  std::vector<BeatWindow> test;
  std::uint64_t seed = 0;
};

/// Per-class stratified selection without replacement.
///
/// Classes are processed in the order N, SVEB, VEB, F with one Rng seeded by
/// `seed`. For each class, the candidate windows keep their input order and
/// `per_class` of them are drawn with Rng::sample_indices; the first
/// train_parts/(train_parts+test_parts) of the draw (rounded down) go to the
/// training set, the rest to the test set. Each output set is then ordered
/// by class, then draw order.
inline DatasetSplit balance_and_split(const std::vector<BeatWindow> &windows, std::size_t per_class,
                                      std::uint64_t seed, int train_parts = 4, int test_parts = 1) {
  if (train_parts <= 0 || test_parts <= 0) throw ConfigError("split ratio parts must be positive");
  std::array<std::vector<std::size_t>, 4> by_class;
  for (std::size_t i = 0; i < windows.size(); ++i)
    if (auto li = label_index(windows[i].label)) by_class[static_cast<std::size_t>(*li)].push_back(i);

  for (std::size_t c = 0; c < 4; ++c)
    if (by_class[c].size() < per_class)
      throw InsufficientData(std::string(to_string(kTrainClasses[c])), by_class[c].size(), per_class);

  DatasetSplit split;
  split.seed = seed;
  Rng rng(seed);
  const std::size_t n_train = per_class * static_cast<std::size_t>(train_parts) /
                              static_cast<std::size_t>(train_parts + test_parts);
  for (std::size_t c = 0; c < 4; ++c) {
    const auto pick = rng.sample_indices(by_class[c].size(), per_class);
    for (std::size_t k = 0; k < pick.size(); ++k) {
      const auto &w = windows[by_class[c][pick[k]]];
      (k < n_train ? split.train : split.test).push_back(w);
    }
  }
  return split;
}

inline std::map<AamiClass, std::size_t> count_classes(const std::vector<BeatAnnotation> &anns) {
  std::map<AamiClass, std::size_t> counts;
  for (const auto &a : anns)
    if (a.aami_class != AamiClass::NonBeat) ++counts[a.aami_class];
  return counts;
}

inline std::array<std::size_t, 4> count_labels(const std::vector<BeatWindow> &ws) {
  std::array<std::size_t, 4> c{};
  for (const auto &w : ws)
    if (auto li = label_index(w.label)) ++c[static_cast<std::size_t>(*li)];
  return c;
}

} // namespace lcsnn
