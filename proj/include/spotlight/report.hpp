#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "spotlight/volume.hpp"

namespace spotlight {

/// Shortest round-trip-stable text for a double ("nan", "inf", "-inf" for
/// non-finite values). Output is locale independent.
std::string format_number(double v);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& cell(const std::string& s);
  CsvWriter& cell(double v);
  CsvWriter& cell(std::int64_t v);
  CsvWriter& cell(int v) { return cell(static_cast<std::int64_t>(v)); }
  void end_row();
  const std::string& text() const { return text_; }
  void save(const std::filesystem::path& path) const;

 private:
  std::size_t columns_;
  std::size_t pending_ = 0;
  std::string text_;
};

void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Voxel-intensity histograms sharing one set of bin edges over the joint
/// range of all volumes. A constant joint range collapses to a single bin.
struct HistogramSet {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::vector<std::int64_t>> counts;  // per volume
  int bins() const { return counts.empty() ? 0 : static_cast<int>(counts.front().size()); }
};

HistogramSet intensity_histograms(const std::vector<const Volume*>& volumes, int nbins = 100);

/// Overlaid log-scale histograms with dashed vertical lines at `thresholds`.
std::string histogram_svg(const HistogramSet& h, const std::vector<std::string>& names,
                          const std::vector<double>& thresholds, const std::string& title = {});

}  // namespace spotlight
