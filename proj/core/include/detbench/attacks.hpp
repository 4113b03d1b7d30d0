#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>
#include <vector>

#include "detbench/image.hpp"
#include "detbench/passive.hpp"
#include "detbench/perturb.hpp"
#include "detbench/smoothing.hpp"
#include "detbench/wmcodec.hpp"

namespace detbench {

enum class AttackMode { Removal, Forgery };
enum class AttackKind { Pgd, HopSkipJump, Square };

std::string_view to_string(AttackMode mode) noexcept;
std::string_view to_string(AttackKind kind) noexcept;
AttackMode attack_mode_from_string(std::string_view name);
AttackKind attack_kind_from_string(std::string_view name);

struct AttackConfig {
  AttackMode mode = AttackMode::Removal;
  AttackKind kind = AttackKind::Pgd;
  double linf_budget = 0.01;
  std::size_t steps = 40;
  std::size_t restarts = 1;
  std::size_t query_budget = 10000;
  std::uint64_t seed = 0;
  std::size_t hsj_initial_probes = 32;
  double hsj_tolerance = 1e-3;
  double square_initial_fraction = 0.1;

  void validate() const;
  friend bool operator==(const AttackConfig&, const AttackConfig&) = default;
};

struct AttackResult {
  ImageTensor adversarial_image;
  double delta_linf = 0.0;
  double delta_l2 = 0.0;
  std::size_t queries_used = 0;
  bool success = false;
  int original_decision = 0;
  int final_decision = 0;
  std::vector<double> trace;
};

// One query: the verdict and the attacker's score (lower is closer to the
// attacker's goal).
struct QueryResult {
  int decision = 0;
  double score = 0.0;
};

// A score evaluator that keeps state for one image under rectangle edits.
class ScoreSession {
 public:
  virtual ~ScoreSession() = default;
  virtual QueryResult current() const = 0;
  // Evaluates the committed image with the rectangle taken from `candidate`.
  virtual QueryResult propose(const ImageTensor& candidate, std::size_t y0, std::size_t x0, std::size_t h,
                              std::size_t w) = 0;
  virtual void accept() = 0;
};

// The attacker's view of a detector. Implementations are stateless and safe
// for concurrent use; query counting happens in the attacks.
class TargetHandle {
 public:
  explicit TargetHandle(AttackMode mode) : mode_(mode) {}
  virtual ~TargetHandle() = default;

  AttackMode mode() const noexcept { return mode_; }
  // The verdict the attacker wants.
  int goal() const noexcept { return mode_ == AttackMode::Removal ? 0 : 1; }

  virtual QueryResult query(const ImageTensor& img) const = 0;
  int decision(const ImageTensor& img) const { return query(img).decision; }
  double score(const ImageTensor& img) const { return query(img).score; }

  virtual bool has_gradient() const noexcept { return false; }
  // White-box objective to maximize and its pixel gradient.
  virtual double objective(const ImageTensor& img, ImageTensor* gradient) const;

  // Rectangle-edit session starting from `img`; counts as one query.
  virtual std::unique_ptr<ScoreSession> open_session(const ImageTensor& img) const;

 private:
  AttackMode mode_;
};

// Removal: score is bitwise accuracy vs w_t and the objective is
// ||soft - w_t||. Forgery: 1 - accuracy and -||soft - w_t||.
class WatermarkTarget : public TargetHandle {
 public:
  WatermarkTarget(WatermarkDetectorConfig cfg, AttackMode mode);
  QueryResult query(const ImageTensor& img) const override;
  bool has_gradient() const noexcept override { return true; }
  double objective(const ImageTensor& img, ImageTensor* gradient) const override;
  std::unique_ptr<ScoreSession> open_session(const ImageTensor& img) const override;
  const WatermarkDetectorConfig& config() const noexcept { return cfg_; }

 private:
  WatermarkDetectorConfig cfg_;
  WatermarkCodec codec_;
};

// The true class is 1 for removal and 0 for forgery. Score is its
// probability; the objective is the cross-entropy against it.
class PassiveTarget : public TargetHandle {
 public:
  PassiveTarget(const PassiveModel& model, AttackMode mode);
  QueryResult query(const ImageTensor& img) const override;
  bool has_gradient() const noexcept override;
  double objective(const ImageTensor& img, ImageTensor* gradient) const override;

 private:
  const PassiveModel* model_;
  int reference_label_;
};

// Median mismatch count of the smoothed detector: removal minimizes its
// negation, forgery minimizes it. One smoothed evaluation is one query.
class SmoothedTarget : public TargetHandle {
 public:
  SmoothedTarget(WatermarkDetectorConfig cfg, SmoothingConfig sm, std::uint64_t image_index, AttackMode mode);
  QueryResult query(const ImageTensor& img) const override;

 private:
  WatermarkDetectorConfig cfg_;
  SmoothingConfig sm_;
  std::uint64_t image_index_;
};

AttackResult pgd_attack(const TargetHandle& target, const ImageTensor& x, const AttackConfig& cfg);
AttackResult hopskipjump_attack(const TargetHandle& target, const ImageTensor& x, const ImageTensor& x_init,
                                const AttackConfig& cfg);
AttackResult square_attack(const TargetHandle& target, const ImageTensor& x, const AttackConfig& cfg);

struct RemovalInitGrid {
  std::vector<double> jpeg_qualities = {90, 70, 50, 30, 20, 10, 5};
  std::vector<double> noise_sigmas = {0.05, 0.1, 0.2, 0.3, 0.5};
};

// Highest-PSNR grid point that the target no longer flags. Throws
// InfeasibleError when no grid point flips the detector.
ImageTensor make_removal_init(const TargetHandle& target, const ImageTensor& x_watermarked,
                              const RemovalInitGrid& grid, const RngStream& rng);
ImageTensor make_forgery_init(const ImageTensor& x_clean, const WatermarkDetectorConfig& cfg);

double linf_distance(const ImageTensor& a, const ImageTensor& b);
double l2_distance(const ImageTensor& a, const ImageTensor& b);

}  // namespace detbench
