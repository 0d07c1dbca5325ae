#include "caire/seqcore/encoding.hpp"

#include <cmath>

#include "caire/errors.hpp"

namespace caire::seqcore {

std::string_view to_string(EncodingMode mode) noexcept {
  return mode == EncodingMode::kOneHot ? "onehot" : "blosum50";
}

EncodingMode encoding_mode_from_string(std::string_view s) {
  if (s == "onehot") return EncodingMode::kOneHot;
  if (s == "blosum50") return EncodingMode::kBlosum50;
  throw ConfigError("unknown encoding mode '" + std::string(s) + "'");
}

std::array<double, kPositionFeatures> position_features(std::size_t row, std::size_t encoded_length) noexcept {
  if (encoded_length <= 1) return {0.0, 0.0, 0.0};
  const double span = static_cast<double>(encoded_length - 1);
  const double i = static_cast<double>(row);
  return {i / span, (span - i) / span, 1.0 - std::abs(2.0 * i / span - 1.0)};
}

void check_fits(const AminoSequence& seq, std::size_t l_max, std::string_view context) {
  if (seq.length() == 0) throw LengthError("empty sequence");
  if (seq.length() + 1 > l_max) {
    std::string msg;
    if (!context.empty()) msg.append(context).append(": ");
    msg += "sequence " + seq.str() + " has length " + std::to_string(seq.length()) +
           " but the encoding holds at most " + std::to_string(l_max == 0 ? 0 : l_max - 1) + " residues";
    throw LengthError(msg);
  }
}

namespace {

EncodedSequence encode_impl(const AminoSequence& seq, std::size_t l_max, bool blosum, std::string_view context) {
  check_fits(seq, l_max, context);
  EncodedSequence enc;
  enc.l_max = l_max;
  enc.true_length = seq.length();
  enc.matrix.assign(l_max * kEncodingWidth, 0.0);
  const std::size_t encoded_length = seq.length() + 1;
  for (std::size_t r = 0; r < encoded_length; ++r) {
    double* row = enc.matrix.data() + r * kEncodingWidth;
    if (r < seq.length()) {
      const auto aa = static_cast<std::size_t>(residue_index(seq[r]));
      if (blosum) {
        const auto& b = blosum50()[aa];
        for (std::size_t c = 0; c < kNumResidues; ++c) row[c] = b[c];
      } else {
        row[aa] = 1.0;
      }
    } else {
      row[kEndToken] = 1.0;
    }
    const auto pf = position_features(r, encoded_length);
    for (std::size_t p = 0; p < kPositionFeatures; ++p) row[kNumResidues + 1 + p] = pf[p];
  }
  return enc;
}

}  // namespace

EncodedSequence encode_onehot(const AminoSequence& seq, std::size_t l_max, std::string_view context) {
  return encode_impl(seq, l_max, false, context);
}

EncodedSequence encode_blosum(const AminoSequence& seq, std::size_t l_max, std::string_view context) {
  return encode_impl(seq, l_max, true, context);
}

EncodedSequence encode(const AminoSequence& seq, std::size_t l_max, EncodingMode mode, std::string_view context) {
  return encode_impl(seq, l_max, mode == EncodingMode::kBlosum50, context);
}

AminoSequence decode_onehot(const EncodedSequence& enc) {
  std::string out;
  for (std::size_t r = 0; r < enc.l_max; ++r) {
    if (enc.at(r, kEndToken) != 0.0) break;
    std::size_t hot = kNumResidues;
    for (std::size_t c = 0; c < kNumResidues; ++c)
      if (enc.at(r, c) != 0.0) hot = c;
    if (hot == kNumResidues) throw Error("row " + std::to_string(r) + " is not a one-hot residue");
    out.push_back(kAlphabet[hot]);
  }
  return AminoSequence(std::move(out));
}

TokenizedSequence tokenize(const AminoSequence& seq) {
  TokenizedSequence t;
  t.codes.reserve(seq.length() + 1);
  for (std::size_t i = 0; i < seq.length(); ++i) t.codes.push_back(static_cast<std::uint8_t>(residue_index(seq[i])));
  t.codes.push_back(kEndToken);
  return t;
}

}  // namespace caire::seqcore
