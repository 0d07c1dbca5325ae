#pragma once

#include <cstddef>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "caire/seqcore/encoding.hpp"

namespace caire::models {

enum class Variant { kCaire, kNoPropensity, kUncorrected, kAttention, kDeepRCStar, kNonNeural };

/// Canonical tags: CAIRE, NoPropensityCAIRE, Uncorrected, AttentionCAIRE,
/// DeepRCStar, NonNeuralCAIRE.
std::string_view to_string(Variant v) noexcept;
/// Case-insensitive; also accepts the short forms caire, nopropensity,
/// uncorrected, attention, deeprc, nonneural.
Variant variant_from_string(std::string_view s);

/// Which parts of the model a variant uses.
struct VariantTraits {
  bool fitness;     // encoder, h_r and the classifier; rho enters the outcome
  bool propensity;  // W, B, tau_e and the residual in the outcome mean
  bool attention;   // attention pooling of the repertoire embedding
  bool linear;      // sum-pooled linear convolutions, single-layer h_r
};
VariantTraits traits(Variant v) noexcept;

struct ModelConfig {
  Variant variant = Variant::kCaire;
  std::size_t d_a = 8;
  std::size_t d_r = 4;
  std::size_t kernel = 5;
  std::size_t l_max = 0;
  seqcore::EncodingMode encoding = seqcore::EncodingMode::kOneHot;
  std::size_t fitness_channels = 8;
  std::size_t fitness_hidden = 16;
  std::size_t encoder_channels = 8;
  std::size_t encoder_hidden = 8;
  std::size_t attention_hidden = 32;

  /// The non-neural variant fixes d_a = d_r = 4, kernel 3 and BLOSUM50.
  static ModelConfig for_variant(Variant v, std::size_t l_max);

  /// Throws ConfigError on inconsistent settings.
  void validate() const;

  nlohmann::ordered_json to_json() const;
  /// Throws ConfigError on missing or malformed fields.
  static ModelConfig from_json(const nlohmann::json& j);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace caire::models
