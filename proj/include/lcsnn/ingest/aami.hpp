#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace lcsnn {

enum class AamiClass { N, SVEB, VEB, F, Q, NonBeat };

/// The four classes that take part in training, in label-index order.
inline constexpr std::array<AamiClass, 4> kTrainClasses = {
    AamiClass::N, AamiClass::SVEB, AamiClass::VEB, AamiClass::F};

inline constexpr std::string_view to_string(AamiClass c) {
  switch (c) {
  case AamiClass::N: return "N";
  case AamiClass::SVEB: return "SVEB";
  case AamiClass::VEB: return "VEB";
  case AamiClass::F: return "F";
  case AamiClass::Q: return "Q";
  case AamiClass::NonBeat: return "NonBeat";
  }
  return "?";
}

inline std::optional<AamiClass> aami_from_string(std::string_view s) {
  for (auto c : {AamiClass::N, AamiClass::SVEB, AamiClass::VEB, AamiClass::F,
                 AamiClass::Q, AamiClass::NonBeat})
    if (to_string(c) == s) return c;
  return std::nullopt;
}

/// Label index in [0, 4) for a training class; nullopt for Q and non-beats.
inline constexpr std::optional<int> label_index(AamiClass c) {
  switch (c) {
  case AamiClass::N: return 0;
  case AamiClass::SVEB: return 1;
  case AamiClass::VEB: return 2;
  case AamiClass::F: return 3;
  default: return std::nullopt;
  }
}

/// AAMI grouping of MIT-BIH beat codes. Total: anything that is not one of
/// the fifteen listed beat codes is a non-beat annotation.
inline constexpr AamiClass map_to_aami(char symbol) {
  switch (symbol) {
  case 'N': case 'L': case 'R': case 'e': case 'j':
    return AamiClass::N;
  case 'A': case 'a': case 'J': case 'S':
    return AamiClass::SVEB;
  case 'V': case 'E':
    return AamiClass::VEB;
  case 'F':
    return AamiClass::F;
  case 'Q': case '/': case 'f':
    return AamiClass::Q;
  default:
    return AamiClass::NonBeat;
  }
}

} // namespace lcsnn
