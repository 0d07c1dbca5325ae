#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "caire/seqcore/alphabet.hpp"

namespace caire::seqcore {

enum class EncodingMode { kOneHot, kBlosum50 };

std::string_view to_string(EncodingMode mode) noexcept;
EncodingMode encoding_mode_from_string(std::string_view s);

/// Start, end and center indicators of occupied row `row` in a sequence whose
/// encoded length (residues plus end token) is `encoded_length`.
std::array<double, kPositionFeatures> position_features(std::size_t row, std::size_t encoded_length) noexcept;

/// Dense L_max x 24 encoding. Rows past the end token are zero.
struct EncodedSequence {
  std::size_t l_max = 0;
  std::size_t true_length = 0;
  std::vector<double> matrix;  // row-major, l_max * kEncodingWidth

  double at(std::size_t row, std::size_t col) const { return matrix[row * kEncodingWidth + col]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(matrix).subspan(r * kEncodingWidth, kEncodingWidth);
  }
};

/// `context` is prepended to the error message when the sequence is too long
/// (e.g. "patient P7").
EncodedSequence encode_onehot(const AminoSequence& seq, std::size_t l_max, std::string_view context = {});
EncodedSequence encode_blosum(const AminoSequence& seq, std::size_t l_max, std::string_view context = {});
EncodedSequence encode(const AminoSequence& seq, std::size_t l_max, EncodingMode mode,
                       std::string_view context = {});

/// Inverse of encode_onehot.
AminoSequence decode_onehot(const EncodedSequence& enc);

/// Residue codes followed by kEndToken. This is the compact form consumed by
/// the feature networks; the dense matrix is recoverable from it and the mode.
struct TokenizedSequence {
  std::vector<std::uint8_t> codes;

  std::size_t encoded_length() const noexcept { return codes.size(); }
};

TokenizedSequence tokenize(const AminoSequence& seq);

/// Throws LengthError if seq cannot be encoded in l_max rows.
void check_fits(const AminoSequence& seq, std::size_t l_max, std::string_view context = {});

}  // namespace caire::seqcore
