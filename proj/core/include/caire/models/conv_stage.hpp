#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "caire/ndiff/params.hpp"
#include "caire/seqcore/encoding.hpp"
#include "caire/seqcore/rng.hpp"

namespace caire::models {

enum class Pooling {
  kMaxSelu,  // max over valid positions of SELU(conv)
  kSum,      // sum over valid positions of conv, no nonlinearity
};

/// Number of output positions that see the sequence: windows start inside the
/// encoded length L (residues + end token) and at least one window exists.
inline std::size_t valid_positions(std::size_t encoded_length, std::size_t kernel) noexcept {
  return encoded_length >= kernel ? encoded_length - kernel + 1 : 1;
}

struct ConvTrace {
  std::vector<double> pre;          // pre-activation max per channel (max mode)
  std::vector<std::uint16_t> argmax;  // window index per channel (max mode)
};

/// First stage shared by h_a, h_r and the encoder: a valid 1D convolution over
/// the L_max x 24 encoding, pooled over positions. Evaluated on token codes with
/// per-code lookup tables, which is exact because every encoded row is a fixed
/// function of its code plus the position features.
class ConvStage {
 public:
  ConvStage() = default;
  ConvStage(std::string prefix, std::size_t channels, std::size_t kernel, seqcore::EncodingMode mode, Pooling pooling);

  const std::string& prefix() const noexcept { return prefix_; }
  std::size_t channels() const noexcept { return channels_; }
  std::size_t kernel() const noexcept { return kernel_; }
  Pooling pooling() const noexcept { return pooling_; }
  std::string weight_name() const { return prefix_ + ".w"; }
  std::string bias_name() const { return prefix_ + ".b"; }

  void add_params(ndiff::ParamStore& store) const;
  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) with fan_in = kernel * 24.
  void init_params(ndiff::ParamStore& store, seqcore::Rng& rng) const;

  /// Rebuilds lookup tables from the current parameter values for sequences of
  /// encoded length up to l_max, and binds the gradient buffers. Must be called
  /// again after the parameters change.
  void prepare(ndiff::ParamStore& store, std::size_t l_max);

  void forward(const seqcore::TokenizedSequence& seq, double* out, ConvTrace* trace = nullptr) const;
  /// Accumulates d loss / d params given d loss / d out.
  void backward(const seqcore::TokenizedSequence& seq, const ConvTrace& trace, const double* grad_out);
  /// Adds the accumulated gradients into the store and clears them.
  void flush_grads();

  /// Reference evaluation on the dense encoding through ndiff::conv1d.
  std::vector<double> forward_dense(const seqcore::EncodedSequence& enc, const ndiff::ParamStore& store) const;

 private:
  const double* table_row(std::uint8_t code, std::size_t j) const noexcept {
    return tables_.data() + (static_cast<std::size_t>(code) * kernel_ + j) * channels_;
  }
  const double* position_row(std::size_t len, std::size_t t) const noexcept {
    return position_.data() + (position_offset_[len] + t) * channels_;
  }

  std::string prefix_;
  std::size_t channels_ = 0, kernel_ = 0;
  seqcore::EncodingMode mode_ = seqcore::EncodingMode::kOneHot;
  Pooling pooling_ = Pooling::kMaxSelu;

  std::size_t l_max_ = 0;
  std::vector<double> tables_;     // [code][j][channel], codes 0..20
  std::vector<double> position_;   // [len][t][channel] position-feature contribution plus bias
  std::vector<std::size_t> position_offset_;
  ndiff::Param* weight_ = nullptr;
  ndiff::Param* bias_ = nullptr;

  std::vector<double> grad_tables_;    // same layout as tables_
  std::vector<double> grad_position_;  // [channel][j][feature]
  std::vector<double> grad_bias_;
};

}  // namespace caire::models
