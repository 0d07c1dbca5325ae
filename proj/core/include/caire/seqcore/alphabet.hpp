#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace caire::seqcore {

inline constexpr std::string_view kAlphabet = "ACDEFGHIKLMNPQRSTVWY";
inline constexpr std::size_t kNumResidues = 20;
inline constexpr std::uint8_t kEndToken = 20;
/// Columns of an encoded row: 20 residues, end token, 3 position features.
inline constexpr std::size_t kEncodingWidth = 24;
inline constexpr std::size_t kPositionFeatures = 3;

/// Index of a residue letter in kAlphabet, or -1.
int residue_index(char c) noexcept;

/// BLOSUM50 substitution scores, rows and columns in kAlphabet order.
const std::array<std::array<double, kNumResidues>, kNumResidues>& blosum50();

/// A non-empty string over the 20 canonical amino-acid letters.
class AminoSequence {
 public:
  AminoSequence() = default;
  /// Throws LengthError on an empty string, Error on a bad letter.
  explicit AminoSequence(std::string residues);

  const std::string& str() const noexcept { return residues_; }
  std::size_t length() const noexcept { return residues_.size(); }
  char operator[](std::size_t i) const noexcept { return residues_[i]; }

  friend bool operator==(const AminoSequence&, const AminoSequence&) = default;
  friend auto operator<=>(const AminoSequence&, const AminoSequence&) = default;

 private:
  std::string residues_;
};

/// True when every character is canonical and the string is non-empty.
bool is_valid_sequence(std::string_view s) noexcept;

}  // namespace caire::seqcore
