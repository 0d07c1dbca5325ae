#include "caire/train/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "caire/errors.hpp"
#include "caire/seqcore/cohort_io.hpp"

namespace caire::train {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::size_t parse_size(std::string_view key, std::string_view v) {
  std::size_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError("setting " + std::string(key) + ": expected a nonnegative integer, got '" + std::string(v) + "'");
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw ConfigError("setting " + std::string(key) + ": expected a nonnegative integer, got '" + std::string(v) + "'");
  return out;
}

double parse_real(std::string_view key, std::string_view v) {
  try {
    return seqcore::parse_double(v);
  } catch (const Error&) {
    throw ConfigError("setting " + std::string(key) + ": expected a number, got '" + std::string(v) + "'");
  }
}

}  // namespace

KeyValues parse_key_values(std::string_view text, const std::string& source) {
  KeyValues out;
  std::set<std::string> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ParseError(source, line_no, "empty key");
    if (!seen.insert(key).second) throw ParseError(source, line_no, "repeated key '" + key + "'");
    out.emplace_back(key, std::string(trim(line.substr(eq + 1))));
  }
  return out;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str(), path.string());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

void TrainConfig::validate() const {
  if (batch_patients == 0) throw ConfigError("batch_patients must be at least 1");
  if (batch_seqs < 2 || batch_seqs % 2 != 0) throw ConfigError("batch_seqs must be a positive even number");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(weight_decay >= 0.0)) throw ConfigError("weight_decay must be nonnegative");
  if (total_steps == 0) throw ConfigError("total_steps must be at least 1");
  if (!(anneal_fraction > 0.0 && anneal_fraction <= 1.0)) throw ConfigError("anneal_fraction must be in (0, 1]");
  if (propensity_period == 0) throw ConfigError("propensity_period must be at least 1");
  if (eval_period == 0) throw ConfigError("eval_period must be at least 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in (0, 1)");
}

bool TrainConfig::set(std::string_view key, std::string_view value) {
  if (key == "batch_patients") batch_patients = parse_size(key, value);
  else if (key == "batch_seqs") batch_seqs = parse_size(key, value);
  else if (key == "lr") lr = parse_real(key, value);
  else if (key == "weight_decay") weight_decay = parse_real(key, value);
  else if (key == "total_steps") total_steps = parse_size(key, value);
  else if (key == "anneal_fraction") anneal_fraction = parse_real(key, value);
  else if (key == "propensity_period") propensity_period = parse_size(key, value);
  else if (key == "eval_period") eval_period = parse_size(key, value);
  else if (key == "val_fraction") val_fraction = parse_real(key, value);
  else if (key == "seed") seed = parse_u64(key, value);
  else return false;
  return true;
}

KeyValues TrainConfig::to_key_values() const {
  return {
      {"batch_patients", std::to_string(batch_patients)},
      {"batch_seqs", std::to_string(batch_seqs)},
      {"lr", seqcore::format_double(lr)},
      {"weight_decay", seqcore::format_double(weight_decay)},
      {"total_steps", std::to_string(total_steps)},
      {"anneal_fraction", seqcore::format_double(anneal_fraction)},
      {"propensity_period", std::to_string(propensity_period)},
      {"eval_period", std::to_string(eval_period)},
      {"val_fraction", seqcore::format_double(val_fraction)},
      {"seed", std::to_string(seed)},
  };
}

double anneal_weight(std::size_t step, std::size_t total_steps, double anneal_fraction) noexcept {
  const double end = anneal_fraction * static_cast<double>(total_steps);
  if (end <= 0.0) return 1.0;
  return std::min(1.0, static_cast<double>(step) / end);
}

}  // namespace caire::train
