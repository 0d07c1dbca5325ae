#include "caire/seqcore/alphabet.hpp"

#include <utility>

#include "caire/errors.hpp"

namespace caire::seqcore {

namespace {

constexpr std::array<int, 128> make_lookup() {
  std::array<int, 128> t{};
  for (auto& v : t) v = -1;
  for (std::size_t i = 0; i < kAlphabet.size(); ++i) t[static_cast<unsigned char>(kAlphabet[i])] = static_cast<int>(i);
  return t;
}

constexpr auto kLookup = make_lookup();

}  // namespace

int residue_index(char c) noexcept {
  const auto u = static_cast<unsigned char>(c);
  return u < 128 ? kLookup[u] : -1;
}

bool is_valid_sequence(std::string_view s) noexcept {
  if (s.empty()) return false;
  for (char c : s)
    if (residue_index(c) < 0) return false;
  return true;
}

AminoSequence::AminoSequence(std::string residues) : residues_(std::move(residues)) {
  if (residues_.empty()) throw LengthError("empty amino-acid sequence");
  for (char c : residues_)
    if (residue_index(c) < 0)
      throw Error("non-canonical residue '" + std::string(1, c) + "' in " + residues_);
}

const std::array<std::array<double, kNumResidues>, kNumResidues>& blosum50() {
  //                      A   C   D   E   F   G   H   I   K   L   M   N   P   Q   R   S   T   V   W   Y
  static const std::array<std::array<double, kNumResidues>, kNumResidues> m = {{
      {{5, -1, -2, -1, -3, 0, -2, -1, -1, -2, -1, -1, -1, -1, -2, 1, 0, 0, -3, -2}},     // A
      {{-1, 13, -4, -3, -2, -3, -3, -2, -3, -2, -2, -2, -4, -3, -4, -1, -1, -1, -5, -3}},  // C
      {{-2, -4, 8, 2, -5, -1, -1, -4, -1, -4, -4, 2, -1, 0, -2, 0, -1, -4, -5, -3}},     // D
      {{-1, -3, 2, 6, -3, -3, 0, -4, 1, -3, -2, 0, -1, 2, 0, -1, -1, -3, -3, -2}},       // E
      {{-3, -2, -5, -3, 8, -4, -1, 0, -4, 1, 0, -4, -4, -4, -3, -3, -2, -1, 1, 4}},      // F
      {{0, -3, -1, -3, -4, 8, -2, -4, -2, -4, -3, 0, -2, -2, -3, 0, -2, -4, -3, -3}},    // G
      {{-2, -3, -1, 0, -1, -2, 10, -4, 0, -3, -1, 1, -2, 1, 0, -1, -2, -4, -3, 2}},      // H
      {{-1, -2, -4, -4, 0, -4, -4, 5, -3, 2, 2, -3, -3, -3, -4, -3, -1, 4, -3, -1}},     // I
      {{-1, -3, -1, 1, -4, -2, 0, -3, 6, -3, -2, 0, -1, 2, 3, 0, -1, -3, -3, -2}},       // K
      {{-2, -2, -4, -3, 1, -4, -3, 2, -3, 5, 3, -4, -4, -2, -3, -3, -1, 1, -2, -1}},     // L
      {{-1, -2, -4, -2, 0, -3, -1, 2, -2, 3, 7, -2, -3, 0, -2, -2, -1, 1, -1, 0}},       // M
      {{-1, -2, 2, 0, -4, 0, 1, -3, 0, -4, -2, 7, -2, 0, -1, 1, 0, -3, -4, -2}},         // N
      {{-1, -4, -1, -1, -4, -2, -2, -3, -1, -4, -3, -2, 10, -1, -3, -1, -1, -3, -4, -3}},  // P
      {{-1, -3, 0, 2, -4, -2, 1, -3, 2, -2, 0, 0, -1, 7, 1, 0, -1, -3, -1, -1}},         // Q
      {{-2, -4, -2, 0, -3, -3, 0, -4, 3, -3, -2, -1, -3, 1, 7, -1, -1, -3, -3, -1}},     // R
      {{1, -1, 0, -1, -3, 0, -1, -3, 0, -3, -2, 1, -1, 0, -1, 5, 2, -2, -4, -2}},        // S
      {{0, -1, -1, -1, -2, -2, -2, -1, -1, -1, -1, 0, -1, -1, -1, 2, 5, 0, -3, -2}},     // T
      {{0, -1, -4, -3, -1, -4, -4, 4, -3, 1, 1, -3, -3, -3, -3, -2, 0, 5, -3, -1}},      // V
      {{-3, -5, -5, -3, 1, -3, -3, -3, -3, -2, -1, -4, -4, -1, -3, -4, -3, -3, 15, 2}},  // W
      {{-2, -3, -3, -2, 4, -3, 2, -1, -2, -1, 0, -2, -3, -1, -1, -2, -2, -1, 2, 8}},     // Y
  }};
  return m;
}

}  // namespace caire::seqcore
