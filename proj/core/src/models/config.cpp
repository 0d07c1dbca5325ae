#include "caire/models/config.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "caire/errors.hpp"

namespace caire::models {

namespace {

struct VariantName {
  Variant v;
  std::string_view tag, short_name;
};

constexpr std::array<VariantName, 6> kVariantNames{{
    {Variant::kCaire, "CAIRE", "caire"},
    {Variant::kNoPropensity, "NoPropensityCAIRE", "nopropensity"},
    {Variant::kUncorrected, "Uncorrected", "uncorrected"},
    {Variant::kAttention, "AttentionCAIRE", "attention"},
    {Variant::kDeepRCStar, "DeepRCStar", "deeprc"},
    {Variant::kNonNeural, "NonNeuralCAIRE", "nonneural"},
}};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string_view to_string(Variant v) noexcept {
  for (const auto& n : kVariantNames)
    if (n.v == v) return n.tag;
  return "?";
}

Variant variant_from_string(std::string_view s) {
  const std::string l = lower(s);
  for (const auto& n : kVariantNames)
    if (l == lower(n.tag) || l == n.short_name) return n.v;
  if (l == "deeprc*") return Variant::kDeepRCStar;
  throw ConfigError("unknown model variant '" + std::string(s) + "'");
}

VariantTraits traits(Variant v) noexcept {
  switch (v) {
    case Variant::kCaire: return {true, true, false, false};
    case Variant::kNoPropensity: return {true, false, false, false};
    case Variant::kUncorrected: return {false, false, false, false};
    case Variant::kAttention: return {true, true, true, false};
    case Variant::kDeepRCStar: return {false, false, true, false};
    case Variant::kNonNeural: return {true, true, false, true};
  }
  return {};
}

ModelConfig ModelConfig::for_variant(Variant v, std::size_t l_max) {
  ModelConfig c;
  c.variant = v;
  c.l_max = l_max;
  if (v == Variant::kNonNeural) {
    c.d_a = 4;
    c.d_r = 4;
    c.kernel = 3;
    c.encoding = seqcore::EncodingMode::kBlosum50;
  }
  return c;
}

void ModelConfig::validate() const {
  if (d_a == 0 || d_a > 64) throw ConfigError("d_a must be in [1, 64]");
  if (d_r < 1 || d_r > 32) throw ConfigError("d_r must be in [1, 32]");
  if (kernel == 0) throw ConfigError("kernel must be positive");
  if (l_max < kernel) throw ConfigError("l_max must be at least the kernel size");
  if (fitness_channels == 0 || encoder_channels == 0 || fitness_hidden == 0 || encoder_hidden == 0 ||
      attention_hidden == 0)
    throw ConfigError("layer widths must be positive");
  if (fitness_channels > 64 || encoder_channels > 64) throw ConfigError("at most 64 convolution channels");
}

nlohmann::ordered_json ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["variant"] = std::string(to_string(variant));
  j["d_a"] = d_a;
  j["d_r"] = d_r;
  j["kernel"] = kernel;
  j["l_max"] = l_max;
  j["encoding"] = std::string(seqcore::to_string(encoding));
  j["fitness_channels"] = fitness_channels;
  j["fitness_hidden"] = fitness_hidden;
  j["encoder_channels"] = encoder_channels;
  j["encoder_hidden"] = encoder_hidden;
  j["attention_hidden"] = attention_hidden;
  return j;
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.d_a = j.at("d_a").get<std::size_t>();
    c.d_r = j.at("d_r").get<std::size_t>();
    c.kernel = j.at("kernel").get<std::size_t>();
    c.l_max = j.at("l_max").get<std::size_t>();
    c.encoding = seqcore::encoding_mode_from_string(j.at("encoding").get<std::string>());
    c.fitness_channels = j.value("fitness_channels", c.fitness_channels);
    c.fitness_hidden = j.value("fitness_hidden", c.fitness_hidden);
    c.encoder_channels = j.value("encoder_channels", c.encoder_channels);
    c.encoder_hidden = j.value("encoder_hidden", c.encoder_hidden);
    c.attention_hidden = j.value("attention_hidden", c.attention_hidden);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model manifest: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace caire::models
