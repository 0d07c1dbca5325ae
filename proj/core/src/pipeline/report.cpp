#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "caire/pipeline/pipeline.hpp"
#include "caire/seqcore/cohort_io.hpp"

namespace caire::pipeline {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path, std::size_t columns) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 || line.empty()) continue;
    const auto fields = seqcore::split_fields(line, ',');
    if (fields.size() != columns)
      throw ParseError(path.string(), line_no, "expected " + std::to_string(columns) + " fields");
    rows.emplace_back(fields.begin(), fields.end());
  }
  return rows;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string svg_open(int w, int h) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(w) + "\" height=\"" +
         std::to_string(h) + "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

// Horizontal bars on a fixed [0, 1] axis, with +-1 standard error whiskers.
std::string metrics_svg(const std::vector<std::vector<std::string>>& rows) {
  const int left = 220, width = 360, bar = 22, gap = 10, top = 30;
  std::vector<std::tuple<std::string, double, double>> bars;
  for (const auto& r : rows) {
    if (r[0].rfind("pr_auc.", 0) != 0 && r[0].rfind("roc_auc", 0) != 0) continue;
    bars.emplace_back(r[0], seqcore::parse_double(r[1]), seqcore::parse_double(r[2]));
  }
  const int h = top + static_cast<int>(bars.size()) * (bar + gap) + 40;
  std::ostringstream s;
  s << svg_open(left + width + 60, h);
  s << "<text x=\"10\" y=\"18\" font-weight=\"bold\">Held-out metrics</text>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const auto& [name, v, se] = bars[i];
    const double y = top + static_cast<double>(i) * (bar + gap);
    const double x1 = left + width * std::clamp(v, 0.0, 1.0);
    s << "<text x=\"" << left - 8 << "\" y=\"" << num(y + bar * 0.7) << "\" text-anchor=\"end\">" << escape(name)
      << "</text>\n";
    s << "<rect x=\"" << left << "\" y=\"" << num(y) << "\" width=\"" << num(x1 - left) << "\" height=\"" << bar
      << "\" fill=\"#4c72b0\"/>\n";
    if (std::isfinite(se)) {
      const double a = left + width * std::clamp(v - se, 0.0, 1.0), b = left + width * std::clamp(v + se, 0.0, 1.0);
      s << "<line x1=\"" << num(a) << "\" x2=\"" << num(b) << "\" y1=\"" << num(y + bar / 2.0) << "\" y2=\""
        << num(y + bar / 2.0) << "\" stroke=\"black\"/>\n";
    }
    s << "<text x=\"" << num(x1 + 4) << "\" y=\"" << num(y + bar * 0.7) << "\">" << num(v) << "</text>\n";
  }
  const int axis_y = top + static_cast<int>(bars.size()) * (bar + gap);
  s << "<line x1=\"" << left << "\" x2=\"" << left + width << "\" y1=\"" << axis_y << "\" y2=\"" << axis_y
    << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double x = left + width * t / 4.0;
    s << "<text x=\"" << num(x) << "\" y=\"" << axis_y + 16 << "\" text-anchor=\"middle\">" << num(t / 4.0)
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string histogram_svg(const std::string& title, const std::vector<std::vector<std::string>>& rows) {
  const int left = 50, width = 480, height = 220, top = 30;
  double max_count = 0.0;
  for (const auto& r : rows) max_count = std::max(max_count, seqcore::parse_double(r[2]));
  if (max_count == 0.0) max_count = 1.0;
  std::ostringstream s;
  s << svg_open(left + width + 20, top + height + 40);
  s << "<text x=\"10\" y=\"18\" font-weight=\"bold\">" << escape(title) << "</text>\n";
  const double bw = rows.empty() ? 0.0 : static_cast<double>(width) / static_cast<double>(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double hgt = height * seqcore::parse_double(rows[i][2]) / max_count;
    s << "<rect x=\"" << num(left + bw * static_cast<double>(i)) << "\" y=\"" << num(top + height - hgt)
      << "\" width=\"" << num(bw) << "\" height=\"" << num(hgt) << "\" fill=\"#55a868\" stroke=\"white\"/>\n";
  }
  const int axis_y = top + height;
  s << "<line x1=\"" << left << "\" x2=\"" << left + width << "\" y1=\"" << axis_y << "\" y2=\"" << axis_y
    << "\" stroke=\"black\"/>\n";
  if (!rows.empty()) {
    s << "<text x=\"" << left << "\" y=\"" << axis_y + 16 << "\" text-anchor=\"start\">" << escape(rows.front()[0])
      << "</text>\n";
    s << "<text x=\"" << left + width << "\" y=\"" << axis_y + 16 << "\" text-anchor=\"end\">" << escape(rows.back()[1])
      << "</text>\n";
  }
  s << "<text x=\"" << left - 6 << "\" y=\"" << top + 10 << "\" text-anchor=\"end\">" << static_cast<long long>(max_count)
    << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace

std::vector<fs::path> render_report(const fs::path& input_dir, const fs::path& out_dir) {
  const fs::path metrics = input_dir / "metrics.csv";
  if (!fs::exists(metrics)) throw ConfigError("no metrics.csv in " + input_dir.string());
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  const fs::path msvg = out_dir / "metrics.svg";
  write_text(msvg, metrics_svg(read_csv(metrics, 4)));
  written.push_back(msvg);

  std::vector<fs::path> hists;
  for (const auto& e : fs::directory_iterator(input_dir)) {
    const std::string name = e.path().filename().string();
    if (name.rfind("hist_", 0) == 0 && e.path().extension() == ".csv") hists.push_back(e.path());
  }
  std::sort(hists.begin(), hists.end());
  for (const auto& h : hists) {
    const std::string stem = h.stem().string();
    const fs::path svg = out_dir / (stem + ".svg");
    write_text(svg, histogram_svg("Effect distribution: " + stem.substr(5), read_csv(h, 3)));
    written.push_back(svg);
  }
  return written;
}

}  // namespace caire::pipeline
