#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "caire/seqcore/repertoire.hpp"

namespace caire::seqcore {

/// Shortest decimal form that round-trips to the same double.
std::string format_double(double v);
/// Strict parse; throws Error if `s` is not a complete finite number.
double parse_double(std::string_view s);

std::vector<std::string_view> split_fields(std::string_view line, char delim);

/// Reads the repertoire TSV (`patient_id, cdr3_aa, weight, compartment`) and
/// the outcomes CSV (`patient_id, y`). Repertoires keep the order in which
/// patients first appear in the TSV. Splits come from `split`.
CohortDataset load_cohort(const std::filesystem::path& repertoire_path, const std::filesystem::path& outcomes_path,
                          const SplitConfig& split);

/// Writes both files. Rows are emitted in repertoire order, mature before
/// pre-selection, with the stored (normalized) weights.
void write_cohort(std::span<const Repertoire> repertoires, const std::filesystem::path& repertoire_path,
                  const std::filesystem::path& outcomes_path);

/// One sequence per line; blank lines and lines starting with '#' are skipped.
/// Lines are returned verbatim so callers can report per-row errors.
std::vector<std::string> read_sequence_lines(const std::filesystem::path& path);

}  // namespace caire::seqcore
