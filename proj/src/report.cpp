#include "spotlight/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "spotlight/error.hpp"

namespace spotlight {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

CsvWriter::CsvWriter(std::vector<std::string> header) : columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) text_ += ',';
    text_ += header[i];
  }
  text_ += '\n';
}

CsvWriter& CsvWriter::cell(const std::string& s) {
  if (pending_) text_ += ',';
  if (s.find_first_of(",\"\n") != std::string::npos) {
    text_ += '"';
    for (char c : s) {
      if (c == '"') text_ += '"';
      text_ += c;
    }
    text_ += '"';
  } else {
    text_ += s;
  }
  ++pending_;
  return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_number(v)); }
CsvWriter& CsvWriter::cell(std::int64_t v) { return cell(std::to_string(v)); }

void CsvWriter::end_row() {
  if (pending_ != columns_) {
    throw Error(ErrorCode::InvalidConfig, "csv row has " + std::to_string(pending_) + " cells, header has " +
                                              std::to_string(columns_));
  }
  text_ += '\n';
  pending_ = 0;
}

void CsvWriter::save(const std::filesystem::path& path) const { write_text_file(path, text_); }

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::CorruptFile, "cannot write " + path.string());
}

HistogramSet intensity_histograms(const std::vector<const Volume*>& volumes, int nbins) {
  if (nbins < 1) throw Error(ErrorCode::InvalidConfig, "histogram needs at least one bin");
  HistogramSet h;
  bool first = true;
  for (const Volume* v : volumes) {
    for (float x : *v) {
      if (!std::isfinite(x)) continue;
      if (first) {
        h.lo = h.hi = x;
        first = false;
      }
      h.lo = std::min<double>(h.lo, x);
      h.hi = std::max<double>(h.hi, x);
    }
  }
  const int bins = h.hi > h.lo ? nbins : 1;
  for (const Volume* v : volumes) {
    std::vector<std::int64_t> c(bins, 0);
    for (float x : *v) {
      if (!std::isfinite(x)) continue;
      int b = bins == 1 ? 0 : static_cast<int>((x - h.lo) / (h.hi - h.lo) * bins);
      c[std::clamp(b, 0, bins - 1)] += 1;
    }
    h.counts.push_back(std::move(c));
  }
  return h;
}

namespace {

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string histogram_svg(const HistogramSet& h, const std::vector<std::string>& names,
                          const std::vector<double>& thresholds, const std::string& title) {
  constexpr double W = 640, H = 400, L = 60, R = 20, T = 40, B = 50;
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  const double pw = W - L - R, ph = H - T - B;
  double ymax = 1.0;
  for (const auto& c : h.counts)
    for (auto n : c) ymax = std::max(ymax, std::log10(1.0 + static_cast<double>(n)));
  const double span = h.hi > h.lo ? h.hi - h.lo : 1.0;
  auto xpos = [&](double v) { return L + (v - h.lo) / span * pw; };
  auto ypos = [&](double n) { return T + ph - std::log10(1.0 + n) / ymax * ph; };

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
  s += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
  if (!title.empty()) {
    s += "<text x=\"320\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" +
         xml_escape(title) + "</text>\n";
  }
  s += "<line x1=\"" + fmt(L) + "\" y1=\"" + fmt(T + ph) + "\" x2=\"" + fmt(L + pw) + "\" y2=\"" + fmt(T + ph) +
       "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + fmt(L) + "\" y1=\"" + fmt(T) + "\" x2=\"" + fmt(L) + "\" y2=\"" + fmt(T + ph) +
       "\" stroke=\"black\"/>\n";
  s += "<text x=\"" + fmt(L) + "\" y=\"" + fmt(H - 20) + "\" font-family=\"sans-serif\" font-size=\"11\">" +
       format_number(h.lo) + "</text>\n";
  s += "<text x=\"" + fmt(L + pw) + "\" y=\"" + fmt(H - 20) +
       "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" + format_number(h.hi) + "</text>\n";
  s += "<text x=\"" + fmt(L + pw / 2) + "\" y=\"" + fmt(H - 6) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">intensity</text>\n";
  s += "<text x=\"16\" y=\"" + fmt(T + ph / 2) + "\" transform=\"rotate(-90 16 " + fmt(T + ph / 2) +
       ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">log10(1 + voxels)</text>\n";

  const int bins = h.bins();
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    const char* color = colors[k % 6];
    std::string pts;
    for (int b = 0; b < bins; ++b) {
      const double x0 = L + pw * b / bins, x1 = L + pw * (b + 1) / bins;
      const double y = ypos(static_cast<double>(h.counts[k][b]));
      pts += fmt(x0) + "," + fmt(y) + " " + fmt(x1) + "," + fmt(y) + " ";
    }
    s += "<polyline fill=\"none\" stroke=\"" + std::string(color) + "\" stroke-width=\"1.5\" points=\"" + pts +
         "\"/>\n";
    const std::string name = k < names.size() ? names[k] : "volume " + std::to_string(k);
    s += "<text x=\"" + fmt(L + pw - 4) + "\" y=\"" + fmt(T + 14 + 14.0 * k) + "\" text-anchor=\"end\" fill=\"" +
         color + "\" font-family=\"sans-serif\" font-size=\"12\">" + xml_escape(name) + "</text>\n";
  }
  for (double t : thresholds) {
    if (!(t >= h.lo && t <= h.lo + span)) continue;
    const double x = xpos(t);
    s += "<line class=\"threshold\" x1=\"" + fmt(x) + "\" y1=\"" + fmt(T) + "\" x2=\"" + fmt(x) + "\" y2=\"" +
         fmt(T + ph) + "\" stroke=\"black\" stroke-dasharray=\"5,4\"/>\n";
  }
  s += "</svg>\n";
  return s;
}

}  // namespace spotlight
