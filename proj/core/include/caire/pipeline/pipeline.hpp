#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "caire/errors.hpp"
#include "caire/seqcore/repertoire.hpp"
#include "caire/simsynth/simulate.hpp"
#include "caire/train/config.hpp"

namespace caire::pipeline {

/// Bad invocation: unknown setting, malformed value, missing required path.
class UsageError : public Error {
 public:
  using Error::Error;
};

enum class Command { kSimulate, kTrain, kEstimate, kEvaluate, kReport };
std::string_view to_string(Command c) noexcept;

enum class Provenance { kDefault, kFile, kFlag };
std::string_view to_string(Provenance p) noexcept;

/// Flat key-value settings for one command. Every key has a default; values
/// from a config file override defaults and flags override both.
class Settings {
 public:
  explicit Settings(Command command);

  Command command() const noexcept { return command_; }
  /// Throws UsageError on a key the command does not know.
  void set(const std::string& key, const std::string& value, Provenance source);
  void apply_file(const std::filesystem::path& path);

  const std::string& get(const std::string& key) const;
  Provenance source(const std::string& key) const;
  bool empty(const std::string& key) const { return get(key).empty(); }
  /// Typed accessors; throw UsageError naming the key on malformed values.
  double real(const std::string& key) const;
  std::size_t count(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  std::filesystem::path path(const std::string& key) const;
  /// Throws UsageError when the value is empty.
  std::filesystem::path required_path(const std::string& key) const;

  const train::KeyValues& values() const noexcept { return values_; }
  nlohmann::ordered_json to_json() const;

 private:
  std::size_t index(const std::string& key) const;

  Command command_;
  train::KeyValues values_;
  std::vector<Provenance> sources_;
};

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// Writes <out_dir>/manifest.json: command, settings with provenance, and
/// SHA-256 digests of inputs and outputs (paths relative to out_dir where possible).
void write_manifest(const std::filesystem::path& out_dir, const Settings& settings,
                    const std::vector<std::filesystem::path>& inputs, const std::vector<std::filesystem::path>& outputs,
                    const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());

/// A simulated or imported cohort directory.
struct CohortFiles {
  seqcore::CohortDataset dataset;
  std::optional<simsynth::GroundTruth> truth;
  std::vector<std::filesystem::path> inputs;
};
CohortFiles load_cohort_dir(const std::filesystem::path& dir);

void cmd_simulate(const Settings& s, std::ostream& log);
void cmd_train(const Settings& s, std::ostream& log);
void cmd_estimate(const Settings& s, std::ostream& log);
void cmd_evaluate(const Settings& s, std::ostream& log);
void cmd_report(const Settings& s, std::ostream& log);

/// Runs a command and maps failures to exit codes: 0 ok, 1 domain error,
/// 2 usage or configuration error. Messages go to `err`.
int run_command(const Settings& s, std::ostream& log, std::ostream& err);

/// SVG renderings of <input_dir>/metrics.csv and every hist_*.csv there.
std::vector<std::filesystem::path> render_report(const std::filesystem::path& input_dir,
                                                 const std::filesystem::path& out_dir);

}  // namespace caire::pipeline
