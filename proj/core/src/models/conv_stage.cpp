#include "caire/models/conv_stage.hpp"

#include <algorithm>
#include <cmath>

#include "caire/errors.hpp"
#include "caire/ndiff/layers.hpp"

namespace caire::models {

using seqcore::kEncodingWidth;
using seqcore::kEndToken;
using seqcore::kNumResidues;
using seqcore::kPositionFeatures;

namespace {
constexpr std::size_t kCodes = kNumResidues + 1;
constexpr std::size_t kPosCol = kNumResidues + 1;
constexpr std::size_t kMaxChannels = 64;
}  // namespace

ConvStage::ConvStage(std::string prefix, std::size_t channels, std::size_t kernel, seqcore::EncodingMode mode,
                     Pooling pooling)
    : prefix_(std::move(prefix)), channels_(channels), kernel_(kernel), mode_(mode), pooling_(pooling) {
  if (channels_ == 0 || kernel_ == 0) throw ConfigError(prefix_ + ": channels and kernel must be positive");
  if (channels_ > kMaxChannels) throw ConfigError(prefix_ + ": at most 64 channels are supported");
  if (kernel_ > 0xffff) throw ConfigError(prefix_ + ": kernel too large");
}

void ConvStage::add_params(ndiff::ParamStore& store) const {
  store.add(weight_name(), {channels_, kernel_, kEncodingWidth});
  store.add(bias_name(), {channels_});
}

void ConvStage::init_params(ndiff::ParamStore& store, seqcore::Rng& rng) const {
  const double bound = 1.0 / std::sqrt(static_cast<double>(kernel_ * kEncodingWidth));
  for (auto* a : {&store.value(weight_name()), &store.value(bias_name())})
    for (double& v : a->values()) v = bound * (2.0 * rng.uniform() - 1.0);
}

void ConvStage::prepare(ndiff::ParamStore& store, std::size_t l_max) {
  weight_ = &store.at(weight_name());
  bias_ = &store.at(bias_name());
  if (l_max == 0) throw ConfigError(prefix_ + ": l_max must be positive");
  if (l_max > 0xffff) throw ConfigError(prefix_ + ": l_max too large");
  l_max_ = l_max;
  const double* w = weight_->value.data();
  const double* b = bias_->value.data();
  auto wat = [&](std::size_t o, std::size_t j, std::size_t col) { return w[(o * kernel_ + j) * kEncodingWidth + col]; };

  tables_.assign(kCodes * kernel_ * channels_, 0.0);
  const auto& blosum = seqcore::blosum50();
  for (std::size_t code = 0; code < kCodes; ++code)
    for (std::size_t j = 0; j < kernel_; ++j)
      for (std::size_t o = 0; o < channels_; ++o) {
        double v = 0.0;
        if (code == kEndToken || mode_ == seqcore::EncodingMode::kOneHot) {
          v = wat(o, j, code);
        } else {
          for (std::size_t a = 0; a < kNumResidues; ++a) v += wat(o, j, a) * blosum[code][a];
        }
        tables_[(code * kernel_ + j) * channels_ + o] = v;
      }

  // Position features depend only on (row, encoded length), so their
  // contribution to each window is tabulated per length together with the bias.
  position_offset_.assign(l_max_ + 1, 0);
  std::size_t rows = 0;
  for (std::size_t len = 1; len <= l_max_; ++len) {
    position_offset_[len] = rows;
    rows += valid_positions(len, kernel_);
  }
  position_.assign(rows * channels_, 0.0);
  for (std::size_t len = 1; len <= l_max_; ++len) {
    const std::size_t nv = valid_positions(len, kernel_);
    for (std::size_t t = 0; t < nv; ++t) {
      double* out = position_.data() + (position_offset_[len] + t) * channels_;
      for (std::size_t o = 0; o < channels_; ++o) out[o] = b[o];
      for (std::size_t j = 0; j < kernel_ && t + j < len; ++j) {
        const auto pf = seqcore::position_features(t + j, len);
        for (std::size_t o = 0; o < channels_; ++o)
          for (std::size_t f = 0; f < kPositionFeatures; ++f) out[o] += wat(o, j, kPosCol + f) * pf[f];
      }
    }
  }

  grad_tables_.assign(tables_.size(), 0.0);
  grad_position_.assign(channels_ * kernel_ * kPositionFeatures, 0.0);
  grad_bias_.assign(channels_, 0.0);
}

void ConvStage::forward(const seqcore::TokenizedSequence& seq, double* out, ConvTrace* trace) const {
  const std::size_t len = seq.encoded_length();
  if (len == 0 || len > l_max_)
    throw ShapeError(prefix_ + ": encoded length " + std::to_string(len) + " does not fit L_max " +
                     std::to_string(l_max_));
  const std::size_t nv = valid_positions(len, kernel_);
  const std::uint8_t* codes = seq.codes.data();
  const std::size_t C = channels_;

  if (pooling_ == Pooling::kSum) {
    std::fill(out, out + C, 0.0);
    for (std::size_t t = 0; t < nv; ++t) {
      const double* p = position_row(len, t);
      for (std::size_t o = 0; o < C; ++o) out[o] += p[o];
      for (std::size_t j = 0; j < kernel_ && t + j < len; ++j) {
        const double* row = table_row(codes[t + j], j);
        for (std::size_t o = 0; o < C; ++o) out[o] += row[o];
      }
    }
    return;
  }

  double bp[kMaxChannels], acc[kMaxChannels];
  std::uint16_t ap[kMaxChannels];
  for (std::size_t t = 0; t < nv; ++t) {
    const double* p = position_row(len, t);
    for (std::size_t o = 0; o < C; ++o) acc[o] = p[o];
    for (std::size_t j = 0; j < kernel_ && t + j < len; ++j) {
      const double* row = table_row(codes[t + j], j);
      for (std::size_t o = 0; o < C; ++o) acc[o] += row[o];
    }
    for (std::size_t o = 0; o < C; ++o) {
      if (t == 0 || acc[o] > bp[o]) {
        bp[o] = acc[o];
        ap[o] = static_cast<std::uint16_t>(t);
      }
    }
  }
  for (std::size_t o = 0; o < C; ++o) out[o] = ndiff::selu(bp[o]);
  if (trace) {
    trace->pre.assign(bp, bp + C);
    trace->argmax.assign(ap, ap + C);
  }
}

void ConvStage::backward(const seqcore::TokenizedSequence& seq, const ConvTrace& trace, const double* grad_out) {
  const std::size_t len = seq.encoded_length();
  const std::uint8_t* codes = seq.codes.data();
  const std::size_t C = channels_;
  auto add_window = [&](std::size_t t, std::size_t o, double g) {
    grad_bias_[o] += g;
    for (std::size_t j = 0; j < kernel_ && t + j < len; ++j) {
      grad_tables_[(static_cast<std::size_t>(codes[t + j]) * kernel_ + j) * C + o] += g;
      const auto pf = seqcore::position_features(t + j, len);
      double* gp = grad_position_.data() + (o * kernel_ + j) * kPositionFeatures;
      for (std::size_t f = 0; f < kPositionFeatures; ++f) gp[f] += g * pf[f];
    }
  };
  if (pooling_ == Pooling::kSum) {
    const std::size_t nv = valid_positions(len, kernel_);
    for (std::size_t t = 0; t < nv; ++t)
      for (std::size_t o = 0; o < C; ++o)
        if (grad_out[o] != 0.0) add_window(t, o, grad_out[o]);
    return;
  }
  for (std::size_t o = 0; o < C; ++o) {
    const double g = grad_out[o] * ndiff::selu_grad(trace.pre[o]);
    if (g != 0.0) add_window(trace.argmax[o], o, g);
  }
}

void ConvStage::flush_grads() {
  if (!weight_) throw Error(prefix_ + ": prepare() was not called");
  double* dw = weight_->grad.data();
  const auto& blosum = seqcore::blosum50();
  auto dwat = [&](std::size_t o, std::size_t j, std::size_t col) -> double& {
    return dw[(o * kernel_ + j) * kEncodingWidth + col];
  };
  for (std::size_t code = 0; code < kCodes; ++code)
    for (std::size_t j = 0; j < kernel_; ++j)
      for (std::size_t o = 0; o < channels_; ++o) {
        double& g = grad_tables_[(code * kernel_ + j) * channels_ + o];
        if (g == 0.0) continue;
        if (code == kEndToken || mode_ == seqcore::EncodingMode::kOneHot) {
          dwat(o, j, code) += g;
        } else {
          for (std::size_t a = 0; a < kNumResidues; ++a) dwat(o, j, a) += g * blosum[code][a];
        }
        g = 0.0;
      }
  for (std::size_t o = 0; o < channels_; ++o)
    for (std::size_t j = 0; j < kernel_; ++j)
      for (std::size_t f = 0; f < kPositionFeatures; ++f) {
        double& g = grad_position_[(o * kernel_ + j) * kPositionFeatures + f];
        dwat(o, j, kPosCol + f) += g;
        g = 0.0;
      }
  double* db = bias_->grad.data();
  for (std::size_t o = 0; o < channels_; ++o) {
    db[o] += grad_bias_[o];
    grad_bias_[o] = 0.0;
  }
}

std::vector<double> ConvStage::forward_dense(const seqcore::EncodedSequence& enc,
                                             const ndiff::ParamStore& store) const {
  if (enc.l_max < kernel_) throw ShapeError(prefix_ + ": L_max smaller than the kernel");
  const ndiff::Array input({enc.l_max, kEncodingWidth}, enc.matrix);
  const ndiff::Array conv = ndiff::conv1d(input, store.value(weight_name()), store.value(bias_name()));
  const std::size_t nv = valid_positions(enc.true_length + 1, kernel_);
  std::vector<double> out(channels_, 0.0);
  if (pooling_ == Pooling::kSum) {
    for (std::size_t t = 0; t < nv; ++t)
      for (std::size_t o = 0; o < channels_; ++o) out[o] += conv(t, o);
    return out;
  }
  const auto pooled = ndiff::maxpool_positions(ndiff::selu(conv), nv);
  for (std::size_t o = 0; o < channels_; ++o) out[o] = pooled.values[o];
  return out;
}

}  // namespace caire::models
