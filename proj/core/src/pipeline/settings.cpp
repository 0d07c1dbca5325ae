#include <charconv>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <openssl/evp.h>

#include "caire/pipeline/pipeline.hpp"
#include "caire/seqcore/cohort_io.hpp"

namespace caire::pipeline {

namespace {

train::KeyValues defaults_for(Command c) {
  switch (c) {
    case Command::kSimulate:
      return {{"out", ""},          {"seed", "0"},           {"n_patients", "240"}, {"m_mature", "2000"},
              {"m_pool", "0"},      {"b_preselect", "2000"}, {"eta", "0.01"},       {"p_zeta", "0.4"},
              {"p_u", "0.4"},       {"fitness_u", "6"},      {"fitness_base", "-5"}, {"gamma_a", "0.4"},
              {"gamma_u", "2"},     {"gamma_0", "0"},        {"tau_y", "0.1"},      {"motif_position", "3"},
              {"corpus", ""}};
    case Command::kTrain: {
      train::KeyValues kv{{"cohort", ""}, {"out", ""},   {"variant", "CAIRE"}, {"d_a", ""},          {"d_r", ""},
                          {"kernel", ""}, {"encoding", ""}, {"mode", "single"}, {"folds", "8"},      {"repeats", "3"},
                          {"resume", ""}, {"stop_after", "0"}};
      for (auto& e : train::TrainConfig{}.to_key_values()) kv.push_back(std::move(e));
      return kv;
    }
    case Command::kEstimate:
      return {{"model", ""}, {"sequences", ""}, {"out", ""}, {"epsilon", "0.1"}};
    case Command::kEvaluate:
      return {{"models", ""},   {"cohort", ""},    {"out", ""},         {"mode", "simulated"}, {"epsilon", "0.01"},
              {"binders", ""},  {"unlabeled", ""}, {"n_perm", "10000"}, {"seed", "0"},         {"bins", "30"}};
    case Command::kReport:
      return {{"input", ""}, {"out", ""}};
  }
  return {};
}

}  // namespace

std::string_view to_string(Command c) noexcept {
  switch (c) {
    case Command::kSimulate: return "simulate";
    case Command::kTrain: return "train";
    case Command::kEstimate: return "estimate";
    case Command::kEvaluate: return "evaluate";
    case Command::kReport: return "report";
  }
  return "?";
}

std::string_view to_string(Provenance p) noexcept {
  switch (p) {
    case Provenance::kDefault: return "default";
    case Provenance::kFile: return "file";
    case Provenance::kFlag: return "flag";
  }
  return "?";
}

Settings::Settings(Command command) : command_(command), values_(defaults_for(command)) {
  sources_.assign(values_.size(), Provenance::kDefault);
}

std::size_t Settings::index(const std::string& key) const {
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (values_[i].first == key) return i;
  throw UsageError("unknown setting '" + key + "' for " + std::string(to_string(command_)));
}

void Settings::set(const std::string& key, const std::string& value, Provenance source) {
  const std::size_t i = index(key);
  values_[i].second = value;
  sources_[i] = source;
}

void Settings::apply_file(const std::filesystem::path& path) {
  for (const auto& [k, v] : train::read_key_values(path)) set(k, v, Provenance::kFile);
}

const std::string& Settings::get(const std::string& key) const { return values_[index(key)].second; }
Provenance Settings::source(const std::string& key) const { return sources_[index(key)]; }

double Settings::real(const std::string& key) const {
  try {
    return seqcore::parse_double(get(key));
  } catch (const Error&) {
    throw UsageError("setting " + key + ": expected a number, got '" + get(key) + "'");
  }
}

std::uint64_t Settings::u64(const std::string& key) const {
  const auto& v = get(key);
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size())
    throw UsageError("setting " + key + ": expected a nonnegative integer, got '" + v + "'");
  return out;
}

std::size_t Settings::count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

std::filesystem::path Settings::path(const std::string& key) const { return get(key); }

std::filesystem::path Settings::required_path(const std::string& key) const {
  if (empty(key)) throw UsageError(std::string(to_string(command_)) + " needs --" + key);
  return get(key);
}

nlohmann::ordered_json Settings::to_json() const {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < values_.size(); ++i)
    j[values_[i].first] = {{"value", values_[i].second}, {"source", std::string(to_string(sources_[i]))}};
  return j;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string() + " for hashing");
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("SHA-256 unavailable");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

void write_manifest(const std::filesystem::path& out_dir, const Settings& settings,
                    const std::vector<std::filesystem::path>& inputs, const std::vector<std::filesystem::path>& outputs,
                    const nlohmann::ordered_json& extra) {
  auto digests = [&](const std::vector<std::filesystem::path>& files) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& f : files) {
      const auto rel = f.lexically_relative(out_dir);
      const bool inside = !rel.empty() && *rel.begin() != "..";
      arr.push_back({{"path", (inside ? rel : f).generic_string()}, {"sha256", sha256_file(f)}});
    }
    return arr;
  };
  nlohmann::ordered_json j;
  j["format"] = "caire-manifest";
  j["version"] = 1;
  j["command"] = std::string(to_string(settings.command()));
  j["settings"] = settings.to_json();
  j["inputs"] = digests(inputs);
  j["outputs"] = digests(outputs);
  for (const auto& [k, v] : extra.items()) j[k] = v;
  std::ofstream out(out_dir / "manifest.json", std::ios::binary);
  if (!out) throw Error("cannot write manifest in " + out_dir.string());
  out << j.dump(2) << '\n';
}

}  // namespace caire::pipeline
