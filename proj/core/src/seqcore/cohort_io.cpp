#include "caire/seqcore/cohort_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <unordered_map>

#include "caire/errors.hpp"

namespace caire::seqcore {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw Error("not a finite number: '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split_fields(std::string_view line, char delim) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

namespace {

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  return in;
}

struct PatientRows {
  std::vector<AminoSequence> mature, pre;
  std::vector<double> mature_w, pre_w;
};

}  // namespace

CohortDataset load_cohort(const std::filesystem::path& repertoire_path, const std::filesystem::path& outcomes_path,
                          const SplitConfig& split) {
  const std::string rfile = repertoire_path.string();
  const std::string ofile = outcomes_path.string();

  std::map<std::string, double> outcomes;
  {
    auto in = open_input(outcomes_path);
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError(ofile, 1, "missing header row");
    ++lineno;
    const auto header = split_fields(trim_cr(line), ',');
    if (header.size() != 2 || header[0] != "patient_id" || header[1] != "y")
      throw ParseError(ofile, lineno, "expected header 'patient_id,y'");
    while (std::getline(in, line)) {
      ++lineno;
      const auto row = trim_cr(line);
      if (row.empty()) continue;
      const auto f = split_fields(row, ',');
      if (f.size() != 2 || f[0].empty()) throw ParseError(ofile, lineno, "expected 2 fields");
      double y = 0.0;
      try {
        y = parse_double(f[1]);
      } catch (const Error& e) {
        throw ParseError(ofile, lineno, e.what());
      }
      if (!outcomes.emplace(std::string(f[0]), y).second)
        throw ParseError(ofile, lineno, "duplicate patient_id '" + std::string(f[0]) + "'");
    }
  }

  std::vector<std::string> order;
  std::unordered_map<std::string, PatientRows> rows;
  {
    auto in = open_input(repertoire_path);
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) throw ParseError(rfile, 1, "missing header row");
    const auto header = split_fields(trim_cr(line), '\t');
    if (header.size() != 4 || header[0] != "patient_id" || header[1] != "cdr3_aa" || header[2] != "weight" ||
        header[3] != "compartment")
      throw ParseError(rfile, 1, "expected header 'patient_id\\tcdr3_aa\\tweight\\tcompartment'");
    while (std::getline(in, line)) {
      ++lineno;
      const auto row = trim_cr(line);
      if (row.empty()) continue;
      const auto f = split_fields(row, '\t');
      if (f.size() != 4 || f[0].empty()) throw ParseError(rfile, lineno, "expected 4 tab-separated fields");
      if (!is_valid_sequence(f[1]))
        throw ParseError(rfile, lineno, "invalid amino-acid sequence '" + std::string(f[1]) + "'");
      double w = 0.0;
      try {
        w = parse_double(f[2]);
      } catch (const Error& e) {
        throw ParseError(rfile, lineno, e.what());
      }
      if (w < 0.0) throw ParseError(rfile, lineno, "negative weight");
      const std::string id(f[0]);
      auto [it, inserted] = rows.try_emplace(id);
      if (inserted) order.push_back(id);
      if (f[3] == "mature") {
        it->second.mature.emplace_back(std::string(f[1]));
        it->second.mature_w.push_back(w);
      } else if (f[3] == "preselection") {
        it->second.pre.emplace_back(std::string(f[1]));
        it->second.pre_w.push_back(w);
      } else {
        throw ParseError(rfile, lineno, "compartment must be 'mature' or 'preselection'");
      }
    }
  }

  CohortDataset ds;
  for (const auto& [id, y] : outcomes)
    if (!rows.contains(id) || rows.at(id).mature.empty())
      throw Error("patient " + id + " has an outcome but no mature sequences");
  for (const auto& id : order) {
    const auto it = outcomes.find(id);
    if (it == outcomes.end()) throw Error("patient " + id + " has sequences but no outcome");
    auto& r = rows.at(id);
    if (r.mature.empty()) throw Error("patient " + id + " has no mature sequences");
    WeightedSet pre = r.pre.empty() ? WeightedSet() : WeightedSet(std::move(r.pre), std::move(r.pre_w));
    ds.repertoires.emplace_back(id, WeightedSet(std::move(r.mature), std::move(r.mature_w)), it->second,
                                std::move(pre));
  }
  ds.split_assignment = assign_splits(ds.repertoires, split);
  return ds;
}

void write_cohort(std::span<const Repertoire> repertoires, const std::filesystem::path& repertoire_path,
                  const std::filesystem::path& outcomes_path) {
  std::ofstream rep(repertoire_path, std::ios::binary);
  std::ofstream out(outcomes_path, std::ios::binary);
  if (!rep || !out) throw Error("cannot write cohort files");
  rep << "patient_id\tcdr3_aa\tweight\tcompartment\n";
  out << "patient_id,y\n";
  for (const auto& r : repertoires) {
    const auto emit = [&](const WeightedSet& set, const char* compartment) {
      for (std::size_t i = 0; i < set.size(); ++i)
        rep << r.patient_id() << '\t' << set.sequences()[i].str() << '\t' << format_double(set.weights()[i]) << '\t'
            << compartment << '\n';
    };
    emit(r.mature(), "mature");
    emit(r.preselection(), "preselection");
    out << r.patient_id() << ',' << format_double(r.outcome()) << '\n';
  }
  if (!rep || !out) throw Error("write failed");
}

std::vector<std::string> read_sequence_lines(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    const auto row = trim_cr(line);
    if (row.empty() || row.front() == '#') continue;
    out.emplace_back(row);
  }
  return out;
}

}  // namespace caire::seqcore
