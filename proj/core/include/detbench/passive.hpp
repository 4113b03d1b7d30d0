#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "detbench/image.hpp"
#include "detbench/perturb.hpp"
#include "detbench/rng.hpp"

namespace detbench {

enum class FeatureKind { Frequency, Spatial };

std::string_view to_string(FeatureKind kind) noexcept;
FeatureKind feature_kind_from_string(std::string_view name);

struct FeatureVector {
  Eigen::VectorXd values;
  FeatureKind kind = FeatureKind::Frequency;
};

inline constexpr std::size_t kDefaultFeatureSide = 64;
inline constexpr std::size_t kSpatialFeatureDim = 49;

// Grayscale, center crop (or edge-replicated pad) to side x side, full
// orthonormal DCT, log(1 + |c|), flattened row-major.
FeatureVector freq_features(const ImageTensor& img, std::size_t side = kDefaultFeatureSide);

// Per-channel mean, variance and skewness; a 16-bin luma gradient-magnitude
// histogram (central differences); an 8-bin Laplacian histogram per channel.
// One-channel images repeat their statistics so the layout stays 49-dim.
FeatureVector spatial_features(const ImageTensor& img);

FeatureVector extract_features(FeatureKind kind, const ImageTensor& img, std::size_t side = kDefaultFeatureSide);

struct PassiveModel {
  FeatureKind kind = FeatureKind::Frequency;
  Eigen::VectorXd weights;
  double bias = 0.0;
  Eigen::VectorXd mean;
  Eigen::VectorXd std;
  std::vector<std::size_t> dropped;  // zero-variance features (weight 0, std 1)
  double threshold = 0.5;
  std::size_t feature_side = kDefaultFeatureSide;

  void validate() const;

  double logit_of(const Eigen::VectorXd& features) const;
  double logit(const ImageTensor& img) const;
  double predict_proba(const ImageTensor& img) const;
  int predict(const ImageTensor& img) const;

  // d logit / d pixels. Frequency models only; the histograms of the spatial
  // features are not differentiable (CapabilityError).
  ImageTensor logit_gradient(const ImageTensor& img) const;
};

double sigmoid(double z) noexcept;

struct TrainOptions {
  double l2_penalty = 1e-2;
  std::size_t max_iters = 1000;
  double tol = 1e-6;
  std::size_t history = 10;
};

struct TrainTrace {
  std::vector<double> losses;  // one entry per accepted step, starting at theta = 0
  std::size_t iterations = 0;
  bool converged = false;
};

// Mean cross-entropy plus l2_penalty ||w||^2 / 2 over standardized rows of X.
// theta = [w; b]. Exposed for gradient checks.
class LogisticObjective {
 public:
  LogisticObjective(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l2_penalty);
  double value(const Eigen::VectorXd& theta, Eigen::VectorXd* gradient) const;
  Eigen::Index dim() const noexcept { return x_.cols() + 1; }

 private:
  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  double l2_penalty_;
};

// L-BFGS with Armijo backtracking; gradient descent when the quasi-Newton
// direction is not a descent direction. Every accepted step lowers the loss.
Eigen::VectorXd minimize_lbfgs(const LogisticObjective& objective, Eigen::VectorXd theta, const TrainOptions& options,
                               TrainTrace* trace = nullptr);

PassiveModel train_logistic(std::span<const FeatureVector> features, std::span<const int> labels,
                            const TrainOptions& options = {}, TrainTrace* trace = nullptr);

struct PerturbationTraining {
  SeenPerturbationRanges ranges;  // empty: plain training
  std::size_t epochs = 4;
  TrainOptions train;
  FeatureKind kind = FeatureKind::Frequency;
  std::size_t feature_side = kDefaultFeatureSide;
  std::size_t workers = 1;
};

// Every epoch perturbs each image with a fresh seen perturbation, recomputes
// features and continues the optimizer from the previous epoch. With empty
// ranges this is train_logistic on the clean features.
PassiveModel train_with_perturbations(std::span<const ImageTensor> images, std::span<const int> labels,
                                      const PerturbationTraining& cfg, const RngStream& rng);

}  // namespace detbench
