#include "detbench/wmcodec.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numeric>
#include <tuple>

#include <boost/multiprecision/cpp_int.hpp>

#include "detbench/dct.hpp"
#include "detbench/errors.hpp"
#include "detbench/metrics.hpp"
#include "detbench/parallel.hpp"

namespace detbench {

using boost::multiprecision::cpp_int;

// ---------------------------------------------------------------- BitString

BitString::BitString(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto b : bits_)
    if (b > 1) throw ParameterError("bitstring values must be 0 or 1");
}

BitString BitString::zeros(std::size_t n) { return BitString(std::vector<std::uint8_t>(n, 0)); }

BitString BitString::random(std::size_t n, RngStream& rng) {
  std::vector<std::uint8_t> bits(n);
  for (auto& b : bits) b = rng.coin() ? 1 : 0;
  return BitString(std::move(bits));
}

BitString BitString::from_hex(std::string_view hex, std::size_t n_bits) {
  if (hex.size() * 4 < n_bits)
    throw FormatError("hex watermark has " + std::to_string(hex.size() * 4) + " bits, need " + std::to_string(n_bits));
  std::vector<std::uint8_t> bits(n_bits);
  for (std::size_t i = 0; i < n_bits; ++i) {
    const char ch = hex[i / 4];
    int nibble;
    if (ch >= '0' && ch <= '9') nibble = ch - '0';
    else if (ch >= 'a' && ch <= 'f') nibble = ch - 'a' + 10;
    else if (ch >= 'A' && ch <= 'F') nibble = ch - 'A' + 10;
    else throw FormatError(std::string("invalid hex digit '") + ch + "' in watermark");
    bits[i] = static_cast<std::uint8_t>((nibble >> (3 - i % 4)) & 1);
  }
  return BitString(std::move(bits));
}

std::string BitString::to_hex() const {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out((bits_.size() + 3) / 4, '0');
  for (std::size_t i = 0; i < bits_.size(); ++i)
    if (bits_[i]) {
      const int nibble = (out[i / 4] >= 'a' ? out[i / 4] - 'a' + 10 : out[i / 4] - '0') | (1 << (3 - i % 4));
      out[i / 4] = kDigits[nibble];
    }
  return out;
}

BitString BitString::complement() const {
  std::vector<std::uint8_t> bits(bits_.size());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = bits_[i] ^ 1;
  return BitString(std::move(bits));
}

std::size_t matching_bits(const BitString& a, const BitString& b) {
  if (a.size() != b.size())
    throw ShapeError("bitstring length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  std::size_t m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m += a[i] == b[i];
  return m;
}

double bitwise_accuracy(const BitString& a, const BitString& b) {
  const std::size_t m = matching_bits(a, b);
  if (a.size() == 0) throw ShapeError("bitwise accuracy of empty bitstrings");
  return static_cast<double>(m) / static_cast<double>(a.size());
}

// ------------------------------------------------------------------ Params

void CodecParams::validate() const {
  if (n_bits == 0) throw ParameterError("codec: n_bits must be positive");
  if (chips_per_bit == 0) throw ParameterError("codec: chips_per_bit must be positive");
  if (!(strength > 0.0) || !std::isfinite(strength)) throw ParameterError("codec: strength must be positive");
  if (!(band.lo >= 0.0 && band.lo < band.hi)) throw ParameterError("codec: band must satisfy 0 <= lo < hi");
  if (!(soft_sharpness > 0.0)) throw ParameterError("codec: soft_sharpness must be positive");
  if (!(host_rejection >= 0.0 && host_rejection <= 1.0))
    throw ParameterError("codec: host_rejection must lie in [0, 1]");
}

// ------------------------------------------------------------------ Layout

struct WatermarkCodec::Layout {
  std::size_t height = 0;
  std::size_t width = 0;
  Eigen::Index band_rows = 0;
  Eigen::Index band_cols = 0;
  Plane row_basis;  // band_rows x height
  Plane col_basis;  // band_cols x width
  std::size_t capacity = 0;
  std::vector<std::vector<std::uint32_t>> chip_index;  // into band_rows x band_cols
  std::vector<std::vector<double>> chip_sign;
};

namespace {

using LayoutKey = std::tuple<std::uint64_t, std::size_t, std::size_t, double, double, std::size_t, std::size_t>;

Eigen::Index band_extent(double hi, std::size_t n) {
  const auto e = static_cast<Eigen::Index>(std::floor(hi * static_cast<double>(n))) + 1;
  return std::min<Eigen::Index>(e, static_cast<Eigen::Index>(n));
}

std::vector<std::uint32_t> band_members(const FrequencyBand& band, std::size_t h, std::size_t w, Eigen::Index rows,
                                        Eigen::Index cols) {
  std::vector<std::uint32_t> members;
  for (Eigen::Index u = 0; u < rows; ++u)
    for (Eigen::Index v = 0; v < cols; ++v) {
      const double r = std::hypot(static_cast<double>(u) / static_cast<double>(h),
                                  static_cast<double>(v) / static_cast<double>(w));
      if (r >= band.lo && r <= band.hi) members.push_back(static_cast<std::uint32_t>(u * cols + v));
    }
  return members;
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

WatermarkCodec::WatermarkCodec(CodecParams params) : params_(params) { params_.validate(); }

std::size_t WatermarkCodec::band_capacity(std::size_t height, std::size_t width) const {
  return band_members(params_.band, height, width, band_extent(params_.band.hi, height),
                      band_extent(params_.band.hi, width))
      .size();
}

std::shared_ptr<const WatermarkCodec::Layout> WatermarkCodec::layout(std::size_t height, std::size_t width) const {
  static std::mutex mutex;
  static std::map<LayoutKey, std::shared_ptr<const Layout>> cache;
  const LayoutKey key{params_.key, params_.n_bits, params_.chips_per_bit, params_.band.lo, params_.band.hi, height, width};
  {
    std::lock_guard lock(mutex);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }

  auto l = std::make_shared<Layout>();
  l->height = height;
  l->width = width;
  l->band_rows = band_extent(params_.band.hi, height);
  l->band_cols = band_extent(params_.band.hi, width);
  auto members = band_members(params_.band, height, width, l->band_rows, l->band_cols);
  l->capacity = members.size();
  const std::size_t required = params_.n_bits * params_.chips_per_bit;
  if (required > l->capacity) throw CapacityError(required, l->capacity);

  l->row_basis = dct_basis(height)->topRows(l->band_rows);
  l->col_basis = dct_basis(width)->topRows(l->band_cols);

  // Disjoint chip sets: a keyed permutation of the band, sliced per bit.
  RngStream perm = RngStream::derive(params_.key, {"chips", "layout"});
  for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[perm.below(i)]);
  l->chip_index.resize(params_.n_bits);
  l->chip_sign.resize(params_.n_bits);
  for (std::size_t b = 0; b < params_.n_bits; ++b) {
    RngStream signs = RngStream::derive(params_.key, {"chips", b});
    auto first = members.begin() + static_cast<std::ptrdiff_t>(b * params_.chips_per_bit);
    l->chip_index[b].assign(first, first + static_cast<std::ptrdiff_t>(params_.chips_per_bit));
    l->chip_sign[b].resize(params_.chips_per_bit);
    for (auto& s : l->chip_sign[b]) s = signs.coin() ? 1.0 : -1.0;
  }

  std::lock_guard lock(mutex);
  return cache.emplace(key, std::move(l)).first->second;
}

namespace {

Plane band_coefficients(const WatermarkCodec::Layout& l, const Plane& luma);
std::vector<double> chip_correlations(const WatermarkCodec::Layout& l, const CodecParams& params, const Plane& coeffs);

}  // namespace

std::vector<double> WatermarkCodec::correlations(const Layout& l, const Plane& luma) const {
  return chip_correlations(l, params_, band_coefficients(l, luma));
}

namespace {

Plane band_coefficients(const WatermarkCodec::Layout& l, const Plane& luma) {
  Plane tmp;
  tmp.noalias() = luma * l.col_basis.transpose();
  Plane coeffs;
  coeffs.noalias() = l.row_basis * tmp;
  return coeffs;
}

std::vector<double> chip_correlations(const WatermarkCodec::Layout& l, const CodecParams& params_, const Plane& coeffs) {
  const double norm = static_cast<double>(params_.chips_per_bit) * params_.strength;
  std::vector<double> s(params_.n_bits);
  for (std::size_t b = 0; b < params_.n_bits; ++b) {
    double acc = 0.0;
    for (std::size_t k = 0; k < params_.chips_per_bit; ++k) acc += l.chip_sign[b][k] * coeffs.data()[l.chip_index[b][k]];
    s[b] = acc / norm;
  }
  return s;
}

}  // namespace

WatermarkCodec::IncrementalDecoder::IncrementalDecoder(const WatermarkCodec& codec, const ImageTensor& img)
    : codec_(&codec), layout_(codec.layout(img.height(), img.width())), luma_(luma_plane(img)) {
  coeffs_ = band_coefficients(*layout_, luma_);
  current_ = chip_correlations(*layout_, codec_->params(), coeffs_);
}

const std::vector<double>& WatermarkCodec::IncrementalDecoder::propose(Eigen::Index y0, Eigen::Index x0,
                                                                      const Plane& patch) {
  if (y0 < 0 || x0 < 0 || y0 + patch.rows() > luma_.rows() || x0 + patch.cols() > luma_.cols())
    throw ShapeError("incremental decode: patch outside the image");
  const Plane diff = patch - luma_.block(y0, x0, patch.rows(), patch.cols());
  Plane tmp;
  tmp.noalias() = diff * layout_->col_basis.middleCols(x0, patch.cols()).transpose();
  pending_coeffs_ = coeffs_;
  pending_coeffs_.noalias() += layout_->row_basis.middleCols(y0, patch.rows()) * tmp;
  pending_patch_ = patch;
  pending_y0_ = y0;
  pending_x0_ = x0;
  pending_ = chip_correlations(*layout_, codec_->params(), pending_coeffs_);
  return pending_;
}

void WatermarkCodec::IncrementalDecoder::accept() {
  if (pending_y0_ < 0) throw PreconditionError("incremental decode: nothing proposed");
  coeffs_.swap(pending_coeffs_);
  luma_.block(pending_y0_, pending_x0_, pending_patch_.rows(), pending_patch_.cols()) = pending_patch_;
  current_.swap(pending_);
  pending_y0_ = -1;
}

ImageTensor WatermarkCodec::embed(const ImageTensor& img, const BitString& bits) const {
  return embed_scaled(img, bits, 1.0);
}

ImageTensor WatermarkCodec::embed_scaled(const ImageTensor& img, const BitString& bits, double gain) const {
  if (bits.size() != params_.n_bits)
    throw ShapeError("embed: watermark has " + std::to_string(bits.size()) + " bits, codec expects " +
                     std::to_string(params_.n_bits));
  const auto l = layout(img.height(), img.width());
  const Plane coeffs = band_coefficients(*l, luma_plane(img));

  Plane delta = Plane::Zero(l->band_rows, l->band_cols);
  const double chips = static_cast<double>(params_.chips_per_bit);
  for (std::size_t b = 0; b < params_.n_bits; ++b) {
    double projection = 0.0;
    for (std::size_t k = 0; k < params_.chips_per_bit; ++k)
      projection += l->chip_sign[b][k] * coeffs.data()[l->chip_index[b][k]];
    projection /= chips;
    const double amplitude =
        gain * params_.strength * (bits[b] ? 1.0 : -1.0) - params_.host_rejection * projection;
    for (std::size_t k = 0; k < params_.chips_per_bit; ++k)
      delta.data()[l->chip_index[b][k]] = amplitude * l->chip_sign[b][k];
  }
  Plane back;
  back.noalias() = delta * l->col_basis;
  Plane spatial;
  spatial.noalias() = l->row_basis.transpose() * back;

  ImageTensor out = img;
  add_to_all_channels(out, spatial);
  out.clamp();
  return out;
}

SoftDecode WatermarkCodec::decode_soft(const ImageTensor& img) const {
  const auto l = layout(img.height(), img.width());
  SoftDecode d;
  d.correlation = correlations(*l, luma_plane(img));
  d.soft.resize(d.correlation.size());
  for (std::size_t i = 0; i < d.soft.size(); ++i) d.soft[i] = sigmoid(params_.soft_sharpness * d.correlation[i]);
  return d;
}

BitString WatermarkCodec::decode_bits(const ImageTensor& img) const {
  const auto l = layout(img.height(), img.width());
  const auto s = correlations(*l, luma_plane(img));
  std::vector<std::uint8_t> bits(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) bits[i] = s[i] > 0.0 ? 1 : 0;
  return BitString(std::move(bits));
}

ImageTensor WatermarkCodec::correlation_gradient(const ImageTensor& like, std::span<const double> df_ds) const {
  if (df_ds.size() != params_.n_bits) throw ShapeError("correlation_gradient: wrong number of bit derivatives");
  const auto l = layout(like.height(), like.width());
  const double norm = static_cast<double>(params_.chips_per_bit) * params_.strength;
  Plane dcoeff = Plane::Zero(l->band_rows, l->band_cols);
  for (std::size_t b = 0; b < params_.n_bits; ++b)
    for (std::size_t k = 0; k < params_.chips_per_bit; ++k)
      dcoeff.data()[l->chip_index[b][k]] = df_ds[b] * l->chip_sign[b][k] / norm;
  Plane back;
  back.noalias() = dcoeff * l->col_basis;
  Plane dluma;
  dluma.noalias() = l->row_basis.transpose() * back;
  return luma_gradient_to_pixels(dluma, like.channels());
}

BitDistance WatermarkCodec::bit_distance(const ImageTensor& img, const BitString& target, bool with_gradient,
                                         bool squared_gradient) const {
  if (target.size() != params_.n_bits) throw ShapeError("bit_distance: target length mismatch");
  const SoftDecode d = decode_soft(img);
  BitDistance out;
  for (std::size_t i = 0; i < params_.n_bits; ++i) {
    const double e = d.soft[i] - target[i];
    out.squared += e * e;
  }
  out.distance = std::sqrt(out.squared);
  if (!with_gradient) return out;

  std::vector<double> df_ds(params_.n_bits);
  // d||e|| = d(||e||^2) / (2 ||e||); the distance is not differentiable at 0.
  const double outer = squared_gradient ? 1.0 : (out.distance > 0.0 ? 0.5 / out.distance : 0.0);
  for (std::size_t i = 0; i < params_.n_bits; ++i) {
    const double p = d.soft[i];
    df_ds[i] = outer * 2.0 * (p - target[i]) * params_.soft_sharpness * p * (1.0 - p);
  }
  out.gradient = correlation_gradient(img, df_ds);
  return out;
}

// -------------------------------------------------------------- Threshold

namespace {

cpp_int tail_count(std::size_t n, std::size_t k) {
  cpp_int binom = 1;  // C(n, 0)
  cpp_int total = 0;
  for (std::size_t j = 0; j <= n; ++j) {
    if (j >= k) total += binom;
    binom = binom * (n - j) / (j + 1);
  }
  return total;
}

// Exact test of count / 2^n <= p for a finite double p > 0.
bool tail_at_most(const cpp_int& count, std::size_t n, double p) {
  int exponent = 0;
  const double mantissa = std::frexp(p, &exponent);  // p = mantissa * 2^exponent, mantissa in [0.5, 1)
  const auto m = static_cast<std::uint64_t>(std::ldexp(mantissa, 53));
  const long shift = static_cast<long>(exponent) - 53 + static_cast<long>(n);
  // count <= m * 2^(exponent - 53 + n)
  if (shift >= 0) return count <= (cpp_int(m) << shift);
  return (count << static_cast<unsigned>(-shift)) <= cpp_int(m);
}

}  // namespace

double binomial_tail(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  const cpp_int count = tail_count(n, k);
  return std::ldexp(count.convert_to<double>(), -static_cast<int>(n));
}

std::size_t calibrate_tau(std::size_t n_bits, double fpr_target) {
  if (n_bits == 0) throw ParameterError("calibrate_tau: n_bits must be positive");
  if (!(fpr_target > 0.0 && fpr_target < 1.0)) throw ParameterError("calibrate_tau: fpr_target must lie in (0, 1)");
  for (std::size_t k = 1; k <= n_bits; ++k)
    if (tail_at_most(tail_count(n_bits, k), n_bits, fpr_target)) return k;
  throw InfeasibleError("calibrate_tau: no threshold reaches fpr " + std::to_string(fpr_target) + " with " +
                        std::to_string(n_bits) + " bits (minimum is 2^-" + std::to_string(n_bits) + ")");
}

WatermarkDetectorConfig WatermarkDetectorConfig::make(const CodecParams& params, BitString w_t, double fpr_target) {
  WatermarkDetectorConfig cfg{params, std::move(w_t), calibrate_tau(params.n_bits, fpr_target), fpr_target};
  cfg.validate();
  return cfg;
}

void WatermarkDetectorConfig::validate() const {
  params.validate();
  if (w_t.size() != params.n_bits) throw ConfigError("detector: w_t length does not match n_bits");
  if (tau_matches == 0 || tau_matches > params.n_bits) throw ConfigError("detector: tau_matches out of range");
  if (!(fpr_target > 0.0 && fpr_target < 1.0)) throw ConfigError("detector: fpr_target must lie in (0, 1)");
  if (!tail_at_most(tail_count(params.n_bits, tau_matches), params.n_bits, fpr_target))
    throw ConfigError("detector: tau_matches " + std::to_string(tau_matches) + " violates the fpr target");
}

DetectionVerdict detect(const ImageTensor& img, const WatermarkDetectorConfig& cfg) {
  const WatermarkCodec codec(cfg.params);
  const std::size_t matches = matching_bits(codec.decode_bits(img), cfg.w_t);
  return {matches >= cfg.tau_matches ? 1 : 0, static_cast<double>(matches),
          static_cast<double>(matches) / static_cast<double>(cfg.params.n_bits)};
}

// ----------------------------------------------------------------- Tuning

TuneResult tune_robustness(const CodecParams& base, const SeenPerturbationRanges& seen,
                           std::span<const ImageTensor> images, const TuneOptions& options, const RngStream& rng) {
  if (options.strengths.empty() || options.chips.empty()) throw ConfigError("tune: empty candidate grid");
  if (images.empty()) throw ConfigError("tune: no tuning images");
  if (!seen.empty()) seen.validate();

  TuneResult result;
  result.evaluated = seen.strongest();
  std::vector<std::pair<double, std::size_t>> grid;
  for (double s : options.strengths)
    for (std::size_t c : options.chips) grid.emplace_back(s, c);
  std::sort(grid.begin(), grid.end());

  const std::size_t n_pert = result.evaluated.size();
  for (const auto& [strength, chips] : grid) {
    TuneCandidate cand;
    cand.strength = strength;
    cand.chips_per_bit = chips;
    CodecParams params = base;
    params.strength = strength;
    params.chips_per_bit = chips;
    const WatermarkCodec codec(params);
    if (codec.band_capacity(images[0].height(), images[0].width()) < params.n_bits * chips) {
      cand.fits = false;
      result.sweep.push_back(cand);
      continue;
    }
    std::vector<double> psnrs(images.size()), clean(images.size());
    std::vector<std::vector<double>> acc(images.size(), std::vector<double>(n_pert));
    parallel_for(images.size(), options.workers, [&](std::size_t i) {
      // Same watermark and perturbation noise for every candidate.
      RngStream bits_rng = rng.child({"tune", "bits", i});
      const BitString w = BitString::random(params.n_bits, bits_rng);
      const ImageTensor marked = codec.embed(images[i], w);
      psnrs[i] = psnr_capped(marked, images[i]);
      clean[i] = bitwise_accuracy(codec.decode_bits(marked), w);
      for (std::size_t j = 0; j < n_pert; ++j) {
        RngStream prng = rng.child({"tune", "perturb", i, j});
        const ImageTensor p = apply_perturbation(result.evaluated[j], marked, prng);
        acc[i][j] = bitwise_accuracy(codec.decode_bits(p), w);
      }
    });
    const double n = static_cast<double>(images.size());
    cand.clean_psnr = std::accumulate(psnrs.begin(), psnrs.end(), 0.0) / n;
    cand.clean_accuracy = std::accumulate(clean.begin(), clean.end(), 0.0) / n;
    cand.accuracy_per_perturbation.assign(n_pert, 0.0);
    for (std::size_t j = 0; j < n_pert; ++j) {
      for (std::size_t i = 0; i < images.size(); ++i) cand.accuracy_per_perturbation[j] += acc[i][j];
      cand.accuracy_per_perturbation[j] /= n;
    }
    cand.mean_accuracy = n_pert == 0 ? cand.clean_accuracy
                                     : std::accumulate(cand.accuracy_per_perturbation.begin(),
                                                       cand.accuracy_per_perturbation.end(), 0.0) /
                                           static_cast<double>(n_pert);
    cand.qualifies = cand.mean_accuracy >= options.target_accuracy && cand.clean_psnr >= options.min_psnr &&
                     (n_pert > 0 || cand.clean_accuracy == 1.0);
    result.sweep.push_back(std::move(cand));
  }

  const auto chosen = std::find_if(result.sweep.begin(), result.sweep.end(), [](const TuneCandidate& c) { return c.qualifies; });
  if (chosen == result.sweep.end()) {
    const TuneCandidate* best = nullptr;
    for (const auto& c : result.sweep)
      if (c.fits && (!best || c.mean_accuracy > best->mean_accuracy)) best = &c;
    std::string msg = "tune: no candidate reaches accuracy " + std::to_string(options.target_accuracy) +
                      " with PSNR >= " + std::to_string(options.min_psnr);
    if (best)
      msg += "; best strength " + std::to_string(best->strength) + " chips " + std::to_string(best->chips_per_bit) +
             " accuracy " + std::to_string(best->mean_accuracy) + " psnr " + std::to_string(best->clean_psnr);
    throw TuningError(msg);
  }
  result.params = base;
  result.params.strength = chosen->strength;
  result.params.chips_per_bit = chosen->chips_per_bit;
  return result;
}

}  // namespace detbench
