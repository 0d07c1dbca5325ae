#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace caire::train {

/// `key = value` lines; '#' starts a comment; blank lines are skipped. Keys
/// keep file order. Throws ParseError on a line without '=' or an empty key,
/// and on a repeated key.
using KeyValues = std::vector<std::pair<std::string, std::string>>;
KeyValues parse_key_values(std::string_view text, const std::string& source = "<config>");
KeyValues read_key_values(const std::filesystem::path& path);
std::string format_key_values(const KeyValues& kv);

struct TrainConfig {
  std::size_t batch_patients = 8;
  /// Sequences per patient per step, split evenly between mature (s = 1) and
  /// pre-selection (s = 0) draws.
  std::size_t batch_seqs = 512;
  double lr = 0.01;
  double weight_decay = 0.01;
  std::size_t total_steps = 3000;
  double anneal_fraction = 0.6;
  std::size_t propensity_period = 10;
  std::size_t eval_period = 500;
  double val_fraction = 0.125;
  std::uint64_t seed = 0;

  /// Throws ConfigError on out-of-range settings.
  void validate() const;
  /// Sets one field from text. Returns false for an unknown key; throws
  /// ConfigError on a malformed value.
  bool set(std::string_view key, std::string_view value);
  KeyValues to_key_values() const;
};

/// Prior annealing weight: 0 at step 0, linear, 1 from anneal_fraction * total on.
double anneal_weight(std::size_t step, std::size_t total_steps, double anneal_fraction) noexcept;

}  // namespace caire::train
