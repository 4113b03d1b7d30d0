#include "detbench/metrics.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "detbench/errors.hpp"

namespace detbench {

ConfusionStats confusion(std::span<const int> verdicts, std::span<const int> labels) {
  if (verdicts.size() != labels.size())
    throw ShapeError("confusion: " + std::to_string(verdicts.size()) + " verdicts vs " +
                     std::to_string(labels.size()) + " labels");
  ConfusionStats s;
  std::size_t misses = 0, false_alarms = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1) {
      ++s.n_positive;
      if (verdicts[i] != 1) ++misses;
    } else {
      ++s.n_negative;
      if (verdicts[i] == 1) ++false_alarms;
    }
  }
  if (s.n_positive > 0) s.fnr = static_cast<double>(misses) / static_cast<double>(s.n_positive);
  if (s.n_negative > 0) s.fpr = static_cast<double>(false_alarms) / static_cast<double>(s.n_negative);
  const std::size_t total = s.n_positive + s.n_negative;
  if (total > 0) s.acc = static_cast<double>(total - misses - false_alarms) / static_cast<double>(total);
  return s;
}

double psnr(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "psnr");
  const auto x = a.data();
  const auto y = b.data();
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    sse += d * d;
  }
  if (sse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(static_cast<double>(x.size()) / sse);
}

double psnr_capped(const ImageTensor& a, const ImageTensor& b) { return std::min(psnr(a, b), kPsnrCap); }

namespace {

// Valid-mode separable filtering with the 11-tap SSIM window.
Plane filter_valid(const Plane& p, const std::vector<double>& w) {
  const Eigen::Index k = static_cast<Eigen::Index>(w.size());
  const Eigen::Index rows = p.rows() - k + 1;
  const Eigen::Index cols = p.cols() - k + 1;
  Plane tmp(p.rows(), cols);
  for (Eigen::Index y = 0; y < p.rows(); ++y)
    for (Eigen::Index x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) acc += w[static_cast<std::size_t>(j)] * p(y, x + j);
      tmp(y, x) = acc;
    }
  Plane out(rows, cols);
  for (Eigen::Index y = 0; y < rows; ++y)
    for (Eigen::Index x = 0; x < cols; ++x) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < k; ++j) acc += w[static_cast<std::size_t>(j)] * tmp(y + j, x);
      out(y, x) = acc;
    }
  return out;
}

}  // namespace

double ssim(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "ssim");
  constexpr int kTaps = 11;
  constexpr double kSigma = 1.5;
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  if (a.height() < kTaps || a.width() < kTaps) throw ShapeError("ssim: image smaller than the 11x11 window");
  std::vector<double> w(kTaps);
  double sum = 0.0;
  for (int i = 0; i < kTaps; ++i) {
    const double d = i - kTaps / 2;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (double& v : w) v /= sum;

  const Plane x = luma_plane(a);
  const Plane y = luma_plane(b);
  const Plane mx = filter_valid(x, w);
  const Plane my = filter_valid(y, w);
  const Plane sxx = filter_valid(x.cwiseProduct(x), w) - mx.cwiseProduct(mx);
  const Plane syy = filter_valid(y.cwiseProduct(y), w) - my.cwiseProduct(my);
  const Plane sxy = filter_valid(x.cwiseProduct(y), w) - mx.cwiseProduct(my);
  const auto num = (2.0 * mx.array() * my.array() + c1) * (2.0 * sxy.array() + c2);
  const auto den = (mx.array().square() + my.array().square() + c1) * (sxx.array() + syy.array() + c2);
  return (num / den).mean();
}

}  // namespace detbench
