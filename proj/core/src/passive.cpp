#include "detbench/passive.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "detbench/dct.hpp"
#include "detbench/errors.hpp"
#include "detbench/parallel.hpp"

namespace detbench {

namespace {

// Source index for a center crop (or edge-replicated pad) of length n to side.
std::size_t crop_source(std::size_t i, std::size_t n, std::size_t side) {
  const auto offset = (static_cast<std::ptrdiff_t>(n) - static_cast<std::ptrdiff_t>(side)) / 2;
  const auto j = static_cast<std::ptrdiff_t>(i) + offset;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(j, 0, static_cast<std::ptrdiff_t>(n) - 1));
}

Plane center_crop(const Plane& luma, std::size_t side) {
  const auto h = static_cast<std::size_t>(luma.rows());
  const auto w = static_cast<std::size_t>(luma.cols());
  Plane out(static_cast<Eigen::Index>(side), static_cast<Eigen::Index>(side));
  for (std::size_t y = 0; y < side; ++y)
    for (std::size_t x = 0; x < side; ++x)
      out(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) =
          luma(static_cast<Eigen::Index>(crop_source(y, h, side)), static_cast<Eigen::Index>(crop_source(x, w, side)));
  return out;
}

double channel_value(const ImageTensor& img, std::ptrdiff_t y, std::ptrdiff_t x, std::size_t c) {
  const auto h = static_cast<std::ptrdiff_t>(img.height());
  const auto w = static_cast<std::ptrdiff_t>(img.width());
  return img.at(static_cast<std::size_t>(mirror_index(y, h)), static_cast<std::size_t>(mirror_index(x, w)), c);
}

void add_to_histogram(double v, double lo, double width, Eigen::Ref<Eigen::VectorXd> hist) {
  const auto bins = hist.size();
  auto bin = static_cast<Eigen::Index>(std::floor((v - lo) / width));
  hist(std::clamp<Eigen::Index>(bin, 0, bins - 1)) += 1.0;
}

double softplus(double z) noexcept { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

struct Standardization {
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  std::vector<std::size_t> dropped;
};

Standardization fit_standardization(std::span<const FeatureVector> features) {
  const auto d = features.front().values.size();
  const auto n = static_cast<double>(features.size());
  Standardization s;
  s.mean = Eigen::VectorXd::Zero(d);
  for (const auto& f : features) s.mean += f.values;
  s.mean /= n;
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  for (const auto& f : features) var += (f.values - s.mean).cwiseAbs2();
  s.std = (var / n).cwiseSqrt();
  for (Eigen::Index j = 0; j < d; ++j)
    if (!(s.std(j) > 1e-12)) {
      s.std(j) = 1.0;
      s.dropped.push_back(static_cast<std::size_t>(j));
    }
  return s;
}

Eigen::MatrixXd design_matrix(std::span<const FeatureVector> features, const Standardization& s) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(features.size()), s.mean.size());
  for (std::size_t i = 0; i < features.size(); ++i)
    x.row(static_cast<Eigen::Index>(i)) = ((features[i].values - s.mean).array() / s.std.array()).matrix().transpose();
  for (auto j : s.dropped) x.col(static_cast<Eigen::Index>(j)).setZero();
  return x;
}

void check_training_set(std::size_t n_features, std::span<const int> labels) {
  if (n_features != labels.size()) throw TrainingError("feature and label counts differ");
  if (labels.empty()) throw TrainingError("empty training set");
  std::size_t positives = 0;
  for (int y : labels) {
    if (y != 0 && y != 1) throw TrainingError("labels must be 0 or 1");
    positives += static_cast<std::size_t>(y);
  }
  if (positives == 0 || positives == labels.size()) throw TrainingError("training set contains a single class");
}

PassiveModel make_model(FeatureKind kind, std::size_t side, const Standardization& s, const Eigen::VectorXd& theta) {
  PassiveModel m;
  m.kind = kind;
  m.feature_side = side;
  m.weights = theta.head(theta.size() - 1);
  m.bias = theta(theta.size() - 1);
  m.mean = s.mean;
  m.std = s.std;
  m.dropped = s.dropped;
  for (auto j : s.dropped) m.weights(static_cast<Eigen::Index>(j)) = 0.0;
  return m;
}

Eigen::VectorXd label_vector(std::span<const int> labels) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Eigen::Index>(i)) = labels[i];
  return y;
}

}  // namespace

std::string_view to_string(FeatureKind kind) noexcept {
  return kind == FeatureKind::Frequency ? "frequency" : "spatial";
}

FeatureKind feature_kind_from_string(std::string_view name) {
  if (name == "frequency") return FeatureKind::Frequency;
  if (name == "spatial") return FeatureKind::Spatial;
  throw FormatError("unknown feature kind '" + std::string(name) + "'");
}

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

FeatureVector freq_features(const ImageTensor& img, std::size_t side) {
  if (side == 0) throw ParameterError("freq_features: side must be positive");
  const Plane coeffs = dct2_full(center_crop(luma_plane(img), side));
  FeatureVector f{Eigen::VectorXd(coeffs.size()), FeatureKind::Frequency};
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) f.values(i) = std::log1p(std::abs(coeffs.data()[i]));
  return f;
}

FeatureVector spatial_features(const ImageTensor& img) {
  FeatureVector f{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(kSpatialFeatureDim)), FeatureKind::Spatial};
  const auto h = static_cast<std::ptrdiff_t>(img.height());
  const auto w = static_cast<std::ptrdiff_t>(img.width());
  const double n = static_cast<double>(img.pixels());

  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t c = std::min(k, img.channels() - 1);
    double mean = 0.0;
    for (std::size_t i = 0; i < img.pixels(); ++i) mean += img.data()[i * img.channels() + c];
    mean /= n;
    double m2 = 0.0, m3 = 0.0;
    for (std::size_t i = 0; i < img.pixels(); ++i) {
      const double d = img.data()[i * img.channels() + c] - mean;
      m2 += d * d;
      m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    const auto base = static_cast<Eigen::Index>(3 * k);
    f.values(base) = mean;
    f.values(base + 1) = m2;
    f.values(base + 2) = m2 > 1e-18 ? m3 / std::pow(m2, 1.5) : 0.0;
  }

  const Plane luma = luma_plane(img);
  auto lum = [&](std::ptrdiff_t y, std::ptrdiff_t x) { return luma(mirror_index(y, h), mirror_index(x, w)); };
  auto grad_hist = f.values.segment(9, 16);
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x) {
      const double gx = 0.5 * (lum(y, x + 1) - lum(y, x - 1));
      const double gy = 0.5 * (lum(y + 1, x) - lum(y - 1, x));
      add_to_histogram(std::hypot(gx, gy), 0.0, 1.0 / 64.0, grad_hist);
    }
  grad_hist /= n;

  for (std::size_t k = 0; k < 3; ++k) {
    const std::size_t c = std::min(k, img.channels() - 1);
    auto hist = f.values.segment(static_cast<Eigen::Index>(25 + 8 * k), 8);
    for (std::ptrdiff_t y = 0; y < h; ++y)
      for (std::ptrdiff_t x = 0; x < w; ++x) {
        const double lap = channel_value(img, y - 1, x, c) + channel_value(img, y + 1, x, c) +
                           channel_value(img, y, x - 1, c) + channel_value(img, y, x + 1, c) -
                           4.0 * channel_value(img, y, x, c);
        add_to_histogram(lap, -0.2, 0.05, hist);
      }
    hist /= n;
  }
  return f;
}

FeatureVector extract_features(FeatureKind kind, const ImageTensor& img, std::size_t side) {
  return kind == FeatureKind::Frequency ? freq_features(img, side) : spatial_features(img);
}

void PassiveModel::validate() const {
  const auto d = weights.size();
  if (d == 0 || mean.size() != d || std.size() != d) throw ConfigError("passive model: inconsistent dimensions");
  if (kind == FeatureKind::Frequency && static_cast<std::size_t>(d) != feature_side * feature_side)
    throw ConfigError("passive model: weights do not match feature_side^2");
  if (kind == FeatureKind::Spatial && static_cast<std::size_t>(d) != kSpatialFeatureDim)
    throw ConfigError("passive model: spatial models have 49 weights");
  if ((std.array() <= 0.0).any()) throw ConfigError("passive model: standard deviations must be positive");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("passive model: threshold must lie in (0, 1)");
  if (!weights.allFinite() || !mean.allFinite() || !std::isfinite(bias)) throw ConfigError("passive model: non-finite values");
}

double PassiveModel::logit_of(const Eigen::VectorXd& features) const {
  if (features.size() != weights.size()) throw ShapeError("passive model: feature dimension mismatch");
  return weights.dot(((features - mean).array() / std.array()).matrix()) + bias;
}

double PassiveModel::logit(const ImageTensor& img) const {
  return logit_of(extract_features(kind, img, feature_side).values);
}

double PassiveModel::predict_proba(const ImageTensor& img) const { return sigmoid(logit(img)); }

int PassiveModel::predict(const ImageTensor& img) const { return predict_proba(img) > threshold ? 1 : 0; }

ImageTensor PassiveModel::logit_gradient(const ImageTensor& img) const {
  if (kind != FeatureKind::Frequency) throw CapabilityError("spatial passive models have no pixel gradient");
  const Plane luma = luma_plane(img);
  const Plane coeffs = dct2_full(center_crop(luma, feature_side));
  Plane dcoeffs(coeffs.rows(), coeffs.cols());
  for (Eigen::Index i = 0; i < coeffs.size(); ++i) {
    const double c = coeffs.data()[i];
    const double sign = c > 0.0 ? 1.0 : (c < 0.0 ? -1.0 : 0.0);
    dcoeffs.data()[i] = weights(i) / std(i) * sign / (1.0 + std::abs(c));
  }
  const Plane dcrop = idct2_full(dcoeffs);
  Plane dluma = Plane::Zero(luma.rows(), luma.cols());
  const auto h = static_cast<std::size_t>(luma.rows());
  const auto w = static_cast<std::size_t>(luma.cols());
  for (std::size_t y = 0; y < feature_side; ++y)
    for (std::size_t x = 0; x < feature_side; ++x)
      dluma(static_cast<Eigen::Index>(crop_source(y, h, feature_side)),
            static_cast<Eigen::Index>(crop_source(x, w, feature_side))) +=
          dcrop(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x));
  return luma_gradient_to_pixels(dluma, img.channels());
}

LogisticObjective::LogisticObjective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2_penalty)
    : x_(x), y_(y), l2_penalty_(l2_penalty) {
  if (x.rows() != y.size()) throw ShapeError("logistic objective: row/label mismatch");
  if (!(l2_penalty >= 0.0)) throw ParameterError("logistic objective: l2_penalty must be non-negative");
}

double LogisticObjective::value(const Eigen::VectorXd& theta, Eigen::VectorXd* gradient) const {
  const auto d = x_.cols();
  const auto w = theta.head(d);
  const double b = theta(d);
  const Eigen::VectorXd z = (x_ * w).array() + b;
  const double n = static_cast<double>(x_.rows());
  double loss = 0.0;
  Eigen::VectorXd r(z.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    loss += softplus(z(i)) - y_(i) * z(i);
    r(i) = sigmoid(z(i)) - y_(i);
  }
  loss = loss / n + 0.5 * l2_penalty_ * w.squaredNorm();
  if (gradient) {
    gradient->resize(d + 1);
    gradient->head(d).noalias() = x_.transpose() * r / n;
    gradient->head(d) += l2_penalty_ * w;
    (*gradient)(d) = r.sum() / n;
  }
  return loss;
}

Eigen::VectorXd minimize_lbfgs(const LogisticObjective& objective, Eigen::VectorXd theta, const TrainOptions& options,
                               TrainTrace* trace) {
  constexpr double kArmijo = 1e-4;
  constexpr int kMaxBacktracks = 60;
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> memory;  // (s, y)
  Eigen::VectorXd grad;
  double loss = objective.value(theta, &grad);
  if (trace) trace->losses.push_back(loss);

  std::size_t iter = 0;
  for (; iter < options.max_iters; ++iter) {
    if (grad.norm() <= options.tol) {
      if (trace) trace->converged = true;
      break;
    }
    Eigen::VectorXd q = grad;
    std::vector<double> alpha(memory.size());
    for (std::size_t k = memory.size(); k-- > 0;) {
      const auto& [s, y] = memory[k];
      alpha[k] = s.dot(q) / y.dot(s);
      q -= alpha[k] * y;
    }
    if (!memory.empty()) {
      const auto& [s, y] = memory.back();
      q *= s.dot(y) / y.squaredNorm();
    } else {
      q /= std::max(1.0, grad.norm());
    }
    for (std::size_t k = 0; k < memory.size(); ++k) {
      const auto& [s, y] = memory[k];
      const double beta = y.dot(q) / y.dot(s);
      q += s * (alpha[k] - beta);
    }
    Eigen::VectorXd direction = -q;

    bool accepted = false;
    Eigen::VectorXd next, next_grad;
    double next_loss = loss;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      if (attempt == 1 || direction.dot(grad) >= 0.0) {
        direction = -grad / std::max(1.0, grad.norm());
        memory.clear();
      }
      const double slope = direction.dot(grad);
      double step = 1.0;
      for (int bt = 0; bt < kMaxBacktracks; ++bt, step *= 0.5) {
        next = theta + step * direction;
        next_loss = objective.value(next, &next_grad);
        if (next_loss <= loss + kArmijo * step * slope && next_loss < loss) {
          accepted = true;
          break;
        }
      }
      if (memory.empty()) break;
    }
    if (!accepted) break;

    Eigen::VectorXd s = next - theta;
    Eigen::VectorXd y = next_grad - grad;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      memory.emplace_back(std::move(s), std::move(y));
      if (memory.size() > options.history) memory.pop_front();
    }
    theta = std::move(next);
    grad = std::move(next_grad);
    loss = next_loss;
    if (trace) trace->losses.push_back(loss);
  }
  if (trace) {
    trace->iterations += iter;
    if (grad.norm() <= options.tol) trace->converged = true;
  }
  return theta;
}

PassiveModel train_logistic(std::span<const FeatureVector> features, std::span<const int> labels,
                            const TrainOptions& options, TrainTrace* trace) {
  check_training_set(features.size(), labels);
  const auto d = features.front().values.size();
  for (const auto& f : features) {
    if (f.values.size() != d || f.kind != features.front().kind) throw TrainingError("inconsistent feature vectors");
    if (!f.values.allFinite()) throw TrainingError("non-finite feature values");
  }
  const Standardization s = fit_standardization(features);
  const Eigen::MatrixXd x = design_matrix(features, s);
  const Eigen::VectorXd y = label_vector(labels);
  const LogisticObjective objective(x, y, options.l2_penalty);
  const Eigen::VectorXd theta = minimize_lbfgs(objective, Eigen::VectorXd::Zero(d + 1), options, trace);
  std::size_t side = kDefaultFeatureSide;
  if (features.front().kind == FeatureKind::Frequency)
    side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(d))));
  return make_model(features.front().kind, side, s, theta);
}

PassiveModel train_with_perturbations(std::span<const ImageTensor> images, std::span<const int> labels,
                                      const PerturbationTraining& cfg, const RngStream& rng) {
  check_training_set(images.size(), labels);
  if (cfg.ranges.empty()) {
    std::vector<FeatureVector> features(images.size());
    parallel_for(images.size(), cfg.workers,
                 [&](std::size_t i) { features[i] = extract_features(cfg.kind, images[i], cfg.feature_side); });
    return train_logistic(features, labels, cfg.train);
  }
  cfg.ranges.validate();
  if (cfg.epochs == 0) throw ConfigError("perturbation training needs at least one epoch");

  const Eigen::VectorXd y = label_vector(labels);
  std::vector<FeatureVector> features(images.size());
  Standardization s;
  Eigen::VectorXd theta;
  TrainOptions per_epoch = cfg.train;
  per_epoch.max_iters = (cfg.train.max_iters + cfg.epochs - 1) / cfg.epochs;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    parallel_for(images.size(), cfg.workers, [&](std::size_t i) {
      RngStream stream = rng.child({"epoch", epoch, i});
      const PerturbationSpec spec = sample_seen_perturbation(stream, cfg.ranges);
      features[i] = extract_features(cfg.kind, apply_perturbation(spec, images[i], stream), cfg.feature_side);
    });
    if (epoch == 0) {
      s = fit_standardization(features);
      theta = Eigen::VectorXd::Zero(s.mean.size() + 1);
    }
    const Eigen::MatrixXd x = design_matrix(features, s);
    const LogisticObjective objective(x, y, cfg.train.l2_penalty);
    theta = minimize_lbfgs(objective, std::move(theta), per_epoch);
  }
  return make_model(cfg.kind, cfg.feature_side, s, theta);
}

}  // namespace detbench
