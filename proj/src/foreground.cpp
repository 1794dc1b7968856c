#include "spotlight/foreground.hpp"

#include <algorithm>
#include <cmath>

namespace spotlight {

OtsuResult otsu_threshold(const Volume& v, int nbins) {
  if (nbins < 2) throw Error(ErrorCode::InvalidConfig, "otsu needs at least two bins");
  if (v.empty()) throw Error(ErrorCode::ConstantImage, "empty volume");
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) throw Error(ErrorCode::ConstantImage, "otsu on a constant volume");

  OtsuResult r;
  r.bin_edges.resize(static_cast<std::size_t>(nbins) + 1);
  const double width = (hi - lo) / nbins;
  for (int i = 0; i <= nbins; ++i) r.bin_edges[i] = lo + width * i;
  r.bin_edges[nbins] = hi;

  // Bin membership must agree with the `v >= edge` comparison used by the mask.
  std::vector<double> count(nbins, 0.0);
  std::vector<double> sum(nbins, 0.0);
  for (float f : v) {
    const double x = f;
    auto b = static_cast<int>(std::floor((x - lo) / width));
    b = std::clamp(b, 0, nbins - 1);
    while (b > 0 && x < r.bin_edges[b]) --b;
    while (b < nbins - 1 && x >= r.bin_edges[b + 1]) ++b;
    count[b] += 1.0;
    sum[b] += x;
  }

  const double n = static_cast<double>(v.size());
  double total = 0.0;
  for (double s : sum) total += s;

  r.inter_class_variance.assign(nbins, 0.0);
  double n0 = 0.0;
  double s0 = 0.0;
  double best = -1.0;
  int best_cut = 1;
  for (int c = 1; c < nbins; ++c) {
    n0 += count[c - 1];
    s0 += sum[c - 1];
    const double n1 = n - n0;
    if (n0 == 0.0 || n1 == 0.0) continue;
    const double mu0 = s0 / n0;
    const double mu1 = (total - s0) / n1;
    const double w0 = n0 / n;
    const double w1 = n1 / n;
    const double score = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    r.inter_class_variance[c] = score;
    if (score > best) {
      best = score;
      best_cut = c;
    }
  }
  r.threshold = r.bin_edges[best_cut];
  return r;
}

MaskVolume foreground_mask(const Volume& v, double t) {
  MaskVolume m(v.shape(), 0, v.voxel_size());
  for (std::size_t i = 0; i < v.size(); ++i) m[i] = static_cast<double>(v[i]) >= t ? 1 : 0;
  return m;
}

std::int64_t count_set(const MaskVolume& m) {
  std::int64_t n = 0;
  for (auto b : m) n += b != 0;
  return n;
}

double fg_fraction(const MaskVolume& m) {
  if (m.empty()) return 0.0;
  return static_cast<double>(count_set(m)) / static_cast<double>(m.size());
}

MeanStd mean_std(const Volume& v) {
  MeanStd r;
  if (v.empty()) return r;
  double s = 0.0;
  for (float f : v) s += f;
  r.mean = s / static_cast<double>(v.size());
  double ss = 0.0;
  for (float f : v) ss += (f - r.mean) * (f - r.mean);
  r.stddev = std::sqrt(ss / static_cast<double>(v.size()));
  return r;
}

Standardized standardize(const Volume& v, double center) {
  const MeanStd ms = mean_std(v);
  if (!(ms.stddev > 0.0)) throw Error(ErrorCode::ConstantImage, "zero standard deviation");
  Standardized out{Volume(v.shape(), 0.0f, v.voxel_size()), ms.stddev};
  for (std::size_t i = 0; i < v.size(); ++i) {
    out.volume[i] = static_cast<float>((static_cast<double>(v[i]) - center) / ms.stddev);
  }
  return out;
}

}  // namespace spotlight
