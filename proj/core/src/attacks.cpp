#include "detbench/attacks.hpp"

#include <algorithm>
#include <cmath>

#include "detbench/errors.hpp"
#include "detbench/metrics.hpp"

namespace detbench {

namespace {

class FullSession : public ScoreSession {
 public:
  FullSession(const TargetHandle& target, const ImageTensor& img) : target_(target), current_(target.query(img)) {}
  QueryResult current() const override { return current_; }
  QueryResult propose(const ImageTensor& candidate, std::size_t, std::size_t, std::size_t, std::size_t) override {
    pending_ = target_.query(candidate);
    return pending_;
  }
  void accept() override { current_ = pending_; }

 private:
  const TargetHandle& target_;
  QueryResult current_;
  QueryResult pending_;
};

class WatermarkSession : public ScoreSession {
 public:
  WatermarkSession(const WatermarkCodec& codec, const WatermarkDetectorConfig& cfg, AttackMode mode,
                   const ImageTensor& img)
      : cfg_(cfg), mode_(mode), decoder_(codec, img) {
    current_ = evaluate(decoder_.correlations());
  }
  QueryResult current() const override { return current_; }
  QueryResult propose(const ImageTensor& candidate, std::size_t y0, std::size_t x0, std::size_t h,
                      std::size_t w) override {
    Plane patch(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w));
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        double v;
        if (candidate.channels() == 1) {
          v = candidate.at(y0 + y, x0 + x, 0);
        } else {
          v = kLumaR * candidate.at(y0 + y, x0 + x, 0) + kLumaG * candidate.at(y0 + y, x0 + x, 1) +
              kLumaB * candidate.at(y0 + y, x0 + x, 2);
        }
        patch(static_cast<Eigen::Index>(y), static_cast<Eigen::Index>(x)) = v;
      }
    pending_ = evaluate(decoder_.propose(static_cast<Eigen::Index>(y0), static_cast<Eigen::Index>(x0), patch));
    return pending_;
  }
  void accept() override {
    decoder_.accept();
    current_ = pending_;
  }

 private:
  QueryResult evaluate(const std::vector<double>& s) const {
    std::size_t matches = 0;
    for (std::size_t i = 0; i < s.size(); ++i) matches += (s[i] > 0.0 ? 1 : 0) == cfg_.w_t[i];
    const double acc = static_cast<double>(matches) / static_cast<double>(s.size());
    return {matches >= cfg_.tau_matches ? 1 : 0, mode_ == AttackMode::Removal ? acc : 1.0 - acc};
  }

  const WatermarkDetectorConfig& cfg_;
  AttackMode mode_;
  WatermarkCodec::IncrementalDecoder decoder_;
  QueryResult current_;
  QueryResult pending_;
};

// Counts every detector call against an optional budget.
class QueryCounter {
 public:
  QueryCounter(const TargetHandle& target, std::size_t budget) : target_(target), budget_(budget) {}
  bool exhausted() const noexcept { return used_ >= budget_; }
  std::size_t remaining() const noexcept { return budget_ - std::min(used_, budget_); }
  std::size_t used() const noexcept { return used_; }
  QueryResult query(const ImageTensor& img) {
    ++used_;
    return target_.query(img);
  }
  double objective(const ImageTensor& img, ImageTensor* gradient) {
    ++used_;
    return target_.objective(img, gradient);
  }
  void charge() { ++used_; }

 private:
  const TargetHandle& target_;
  std::size_t budget_;
  std::size_t used_ = 0;
};

ImageTensor blend(const ImageTensor& a, const ImageTensor& b, double alpha) {
  ImageTensor out = a;
  auto o = out.data();
  const auto bb = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = (1.0 - alpha) * o[i] + alpha * bb[i];
  return out;
}

AttackResult finish(const ImageTensor& x, ImageTensor adv, std::size_t queries, int original, int final_decision,
                    std::vector<double> trace) {
  AttackResult r;
  r.delta_linf = linf_distance(adv, x);
  r.delta_l2 = l2_distance(adv, x);
  r.adversarial_image = std::move(adv);
  r.queries_used = queries;
  r.original_decision = original;
  r.final_decision = final_decision;
  r.success = final_decision != original;
  r.trace = std::move(trace);
  return r;
}

}  // namespace

std::string_view to_string(AttackMode mode) noexcept { return mode == AttackMode::Removal ? "removal" : "forgery"; }

std::string_view to_string(AttackKind kind) noexcept {
  switch (kind) {
    case AttackKind::Pgd: return "pgd";
    case AttackKind::HopSkipJump: return "hopskipjump";
    case AttackKind::Square: return "square";
  }
  return "pgd";
}

AttackMode attack_mode_from_string(std::string_view name) {
  if (name == "removal") return AttackMode::Removal;
  if (name == "forgery") return AttackMode::Forgery;
  throw FormatError("unknown attack mode '" + std::string(name) + "'");
}

AttackKind attack_kind_from_string(std::string_view name) {
  if (name == "pgd") return AttackKind::Pgd;
  if (name == "hopskipjump" || name == "hsj") return AttackKind::HopSkipJump;
  if (name == "square") return AttackKind::Square;
  throw FormatError("unknown attack kind '" + std::string(name) + "'");
}

void AttackConfig::validate() const {
  if (!(linf_budget >= 0.0) || !std::isfinite(linf_budget)) throw ConfigError("attack: linf_budget must be >= 0");
  if (kind == AttackKind::Pgd && steps == 0) throw ConfigError("attack: pgd needs at least one step");
  if (restarts == 0) throw ConfigError("attack: restarts must be at least 1");
  if (hsj_initial_probes == 0) throw ConfigError("attack: hsj_initial_probes must be positive");
  if (!(hsj_tolerance > 0.0)) throw ConfigError("attack: hsj_tolerance must be positive");
  if (!(square_initial_fraction > 0.0 && square_initial_fraction <= 1.0))
    throw ConfigError("attack: square_initial_fraction must lie in (0, 1]");
}

double linf_distance(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "linf_distance");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

double l2_distance(const ImageTensor& a, const ImageTensor& b) {
  require_same_shape(a, b, "l2_distance");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return std::sqrt(s);
}

// ----------------------------------------------------------------- Targets

double TargetHandle::objective(const ImageTensor&, ImageTensor*) const {
  throw CapabilityError("target has no white-box gradient");
}

std::unique_ptr<ScoreSession> TargetHandle::open_session(const ImageTensor& img) const {
  return std::make_unique<FullSession>(*this, img);
}

WatermarkTarget::WatermarkTarget(WatermarkDetectorConfig cfg, AttackMode mode)
    : TargetHandle(mode), cfg_(std::move(cfg)), codec_(cfg_.params) {
  cfg_.validate();
}

QueryResult WatermarkTarget::query(const ImageTensor& img) const {
  const std::size_t matches = matching_bits(codec_.decode_bits(img), cfg_.w_t);
  const double acc = static_cast<double>(matches) / static_cast<double>(cfg_.params.n_bits);
  return {matches >= cfg_.tau_matches ? 1 : 0, mode() == AttackMode::Removal ? acc : 1.0 - acc};
}

double WatermarkTarget::objective(const ImageTensor& img, ImageTensor* gradient) const {
  BitDistance d = codec_.bit_distance(img, cfg_.w_t, gradient != nullptr);
  const double sign = mode() == AttackMode::Removal ? 1.0 : -1.0;
  if (gradient) {
    *gradient = std::move(d.gradient);
    for (auto& g : gradient->data()) g *= sign;
  }
  return sign * d.distance;
}

std::unique_ptr<ScoreSession> WatermarkTarget::open_session(const ImageTensor& img) const {
  return std::make_unique<WatermarkSession>(codec_, cfg_, mode(), img);
}

PassiveTarget::PassiveTarget(const PassiveModel& model, AttackMode mode)
    : TargetHandle(mode), model_(&model), reference_label_(mode == AttackMode::Removal ? 1 : 0) {
  model.validate();
}

QueryResult PassiveTarget::query(const ImageTensor& img) const {
  const double p = model_->predict_proba(img);
  return {p > model_->threshold ? 1 : 0, reference_label_ == 1 ? p : 1.0 - p};
}

bool PassiveTarget::has_gradient() const noexcept { return model_->kind == FeatureKind::Frequency; }

double PassiveTarget::objective(const ImageTensor& img, ImageTensor* gradient) const {
  const double z = model_->logit(img);
  const double p = sigmoid(z);
  // Cross-entropy against the reference label.
  const double value = reference_label_ == 1 ? std::log1p(std::exp(-std::abs(z))) + std::max(-z, 0.0)
                                             : std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0);
  if (gradient) {
    *gradient = model_->logit_gradient(img);
    const double dz = reference_label_ == 1 ? p - 1.0 : p;
    for (auto& g : gradient->data()) g *= dz;
  }
  return value;
}

SmoothedTarget::SmoothedTarget(WatermarkDetectorConfig cfg, SmoothingConfig sm, std::uint64_t image_index,
                               AttackMode mode)
    : TargetHandle(mode), cfg_(std::move(cfg)), sm_(sm), image_index_(image_index) {
  cfg_.validate();
  sm_.validate();
}

QueryResult SmoothedTarget::query(const ImageTensor& img) const {
  const SmoothedStatistic stat = smoothed_statistic(img, cfg_, sm_, image_index_);
  const DetectionVerdict v = smoothed_verdict(stat, cfg_);
  return {v.label, mode() == AttackMode::Removal ? -stat.median_mismatches : stat.median_mismatches};
}

// ---------------------------------------------------------------------- PGD

AttackResult pgd_attack(const TargetHandle& target, const ImageTensor& x, const AttackConfig& cfg) {
  cfg.validate();
  if (!target.has_gradient()) throw CapabilityError("pgd needs a target with a gradient");
  QueryCounter counter(target, static_cast<std::size_t>(-1));
  const int original = counter.query(x).decision;
  const double r = cfg.linf_budget;
  if (r == 0.0) return finish(x, x, counter.used(), original, original, {});

  const double step = 2.5 * r / static_cast<double>(cfg.steps);
  const RngStream rng = RngStream::derive(cfg.seed, {"pgd"});
  ImageTensor best;
  double best_value = -std::numeric_limits<double>::infinity();
  std::vector<double> trace;
  auto consider = [&](const ImageTensor& img, double value) {
    if (value > best_value) {
      best_value = value;
      best = img;
    }
    trace.push_back(best_value);
  };

  for (std::size_t restart = 0; restart < cfg.restarts; ++restart) {
    RngStream start = rng.child(restart);
    ImageTensor cur = x;
    for (auto& v : cur.data()) v += start.uniform(-r, r);
    cur.clamp();
    ImageTensor grad;
    for (std::size_t t = 0; t < cfg.steps; ++t) {
      consider(cur, counter.objective(cur, &grad));
      auto c = cur.data();
      const auto g = grad.data();
      const auto base = x.data();
      for (std::size_t i = 0; i < c.size(); ++i) {
        const double moved = c[i] + step * (g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0));
        c[i] = std::clamp(base[i] + std::clamp(moved - base[i], -r, r), 0.0, 1.0);
      }
    }
    consider(cur, counter.objective(cur, nullptr));
  }
  const int final_decision = counter.query(best).decision;
  return finish(x, std::move(best), counter.used(), original, final_decision, std::move(trace));
}

// ------------------------------------------------------------- HopSkipJump

AttackResult hopskipjump_attack(const TargetHandle& target, const ImageTensor& x, const ImageTensor& x_init,
                                const AttackConfig& cfg) {
  cfg.validate();
  require_same_shape(x, x_init, "hopskipjump");
  QueryCounter counter(target, cfg.query_budget);
  if (cfg.query_budget < 2) {
    const int original = 1 - target.goal();
    return finish(x, x_init, 0, original, target.goal(), {});
  }
  const int original = counter.query(x).decision;
  if (counter.query(x_init).decision == original)
    throw PreconditionError("hopskipjump: the initial image is not adversarial");
  auto adversarial = [&](const ImageTensor& img) { return counter.query(img).decision != original; };

  const double theta = cfg.hsj_tolerance;
  const double dim = static_cast<double>(x.size());
  std::vector<double> trace;

  // Boundary point on the segment [x, adv]; nullopt if the budget runs out
  // before the tolerance is met.
  auto boundary = [&](const ImageTensor& adv) -> std::optional<ImageTensor> {
    const double length = l2_distance(adv, x);
    double lo = 0.0, hi = 1.0;
    const auto needed = static_cast<std::size_t>(std::ceil(std::log2(std::max(length / theta, 1.0))));
    if (needed > counter.remaining()) return std::nullopt;
    while ((hi - lo) * length > theta) {
      const double mid = 0.5 * (lo + hi);
      if (adversarial(blend(x, adv, mid))) hi = mid;
      else lo = mid;
    }
    return blend(x, adv, hi);
  };

  auto first = boundary(x_init);
  if (!first) return finish(x, x_init, counter.used(), original, 1 - original, {});
  ImageTensor current = std::move(*first);
  double dist = l2_distance(current, x);
  trace.push_back(dist);
  const RngStream rng = RngStream::derive(cfg.seed, {"hopskipjump"});

  for (std::size_t t = 1;; ++t) {
    const auto probes = static_cast<std::size_t>(
        std::ceil(static_cast<double>(cfg.hsj_initial_probes) * std::sqrt(static_cast<double>(t))));
    if (counter.remaining() < probes + 1) break;
    RngStream stream = rng.child(t);
    const double radius = std::max(theta, dist / std::sqrt(dim));

    // sum_b (phi_b - mean) u_b = sum_b phi_b u_b - mean * sum_b u_b
    std::vector<double> weighted(x.size(), 0.0), plain(x.size(), 0.0), u(x.size());
    double phi_sum = 0.0;
    for (std::size_t b = 0; b < probes; ++b) {
      stream.fill_normal(u.data(), u.size());
      double norm = 0.0;
      for (double v : u) norm += v * v;
      norm = std::sqrt(norm);
      ImageTensor probe = current;
      auto p = probe.data();
      for (std::size_t i = 0; i < u.size(); ++i) {
        u[i] /= norm;
        p[i] += radius * u[i];
      }
      probe.clamp();
      const double phi = adversarial(probe) ? 1.0 : -1.0;
      phi_sum += phi;
      for (std::size_t i = 0; i < u.size(); ++i) {
        weighted[i] += phi * u[i];
        plain[i] += u[i];
      }
    }
    const double mean_phi = phi_sum / static_cast<double>(probes);
    const double baseline = std::abs(mean_phi) == 1.0 ? 0.0 : mean_phi;
    std::vector<double> direction(x.size());
    for (std::size_t i = 0; i < direction.size(); ++i) direction[i] = weighted[i] - baseline * plain[i];
    double norm = 0.0;
    for (double v : direction) norm += v * v;
    norm = std::sqrt(norm);
    if (norm == 0.0) continue;

    double step = dist / std::sqrt(static_cast<double>(t));
    std::optional<ImageTensor> stepped;
    while (!counter.exhausted() && step > theta) {
      ImageTensor cand = current;
      auto c = cand.data();
      for (std::size_t i = 0; i < c.size(); ++i) c[i] += step * direction[i] / norm;
      cand.clamp();
      if (adversarial(cand)) {
        stepped = std::move(cand);
        break;
      }
      step *= 0.5;
    }
    if (!stepped) continue;
    auto next = boundary(*stepped);
    if (!next) break;
    const double next_dist = l2_distance(*next, x);
    if (next_dist < dist) {
      current = std::move(*next);
      dist = next_dist;
    }
    trace.push_back(dist);
  }
  return finish(x, std::move(current), counter.used(), original, 1 - original, std::move(trace));
}

// ------------------------------------------------------------------ Square

AttackResult square_attack(const TargetHandle& target, const ImageTensor& x, const AttackConfig& cfg) {
  cfg.validate();
  const double r = cfg.linf_budget;
  if (cfg.query_budget < 2) return finish(x, x, 0, 1 - target.goal(), 1 - target.goal(), {});
  QueryCounter counter(target, cfg.query_budget);
  const int original = counter.query(x).decision;
  if (r == 0.0) return finish(x, x, counter.used(), original, original, {});

  const std::size_t h = x.height(), w = x.width(), ch = x.channels();
  RngStream rng = RngStream::derive(cfg.seed, {"square"});
  ImageTensor adv = x;
  for (std::size_t col = 0; col < w; ++col)
    for (std::size_t c = 0; c < ch; ++c) {
      const double s = rng.coin() ? r : -r;
      for (std::size_t y = 0; y < h; ++y) adv.at(y, col, c) = std::clamp(x.at(y, col, c) + s, 0.0, 1.0);
    }
  auto session = target.open_session(adv);
  counter.charge();
  QueryResult cur = session->current();
  std::vector<double> trace{cur.score};

  const std::size_t min_side = std::min(h, w);
  std::vector<double> saved;
  while (cur.decision == original && !counter.exhausted()) {
    const double progress = static_cast<double>(counter.used()) / static_cast<double>(cfg.query_budget);
    double p = cfg.square_initial_fraction;
    for (double mark : {0.05, 0.2, 0.5, 0.8})
      if (progress >= mark) p *= 0.5;
    const auto side = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::lround(p * static_cast<double>(min_side))), 1, min_side);
    const std::size_t y0 = rng.below(h - side + 1);
    const std::size_t x0 = rng.below(w - side + 1);

    std::vector<double> fill(ch);
    bool changed = false;
    for (int attempt = 0; attempt < 10 && !changed; ++attempt) {
      for (auto& f : fill) f = rng.coin() ? r : -r;
      for (std::size_t y = y0; y < y0 + side && !changed; ++y)
        for (std::size_t xx = x0; xx < x0 + side && !changed; ++xx)
          for (std::size_t c = 0; c < ch; ++c)
            if (adv.at(y, xx, c) != std::clamp(x.at(y, xx, c) + fill[c], 0.0, 1.0)) {
              changed = true;
              break;
            }
    }
    if (!changed) continue;

    saved.clear();
    for (std::size_t y = y0; y < y0 + side; ++y)
      for (std::size_t xx = x0; xx < x0 + side; ++xx)
        for (std::size_t c = 0; c < ch; ++c) {
          saved.push_back(adv.at(y, xx, c));
          adv.at(y, xx, c) = std::clamp(x.at(y, xx, c) + fill[c], 0.0, 1.0);
        }
    counter.charge();
    const QueryResult next = session->propose(adv, y0, x0, side, side);
    if (next.score < cur.score) {
      session->accept();
      cur = next;
      trace.push_back(cur.score);
    } else {
      std::size_t k = 0;
      for (std::size_t y = y0; y < y0 + side; ++y)
        for (std::size_t xx = x0; xx < x0 + side; ++xx)
          for (std::size_t c = 0; c < ch; ++c) adv.at(y, xx, c) = saved[k++];
    }
  }
  return finish(x, std::move(adv), counter.used(), original, cur.decision, std::move(trace));
}

// ----------------------------------------------------------- Initialization

ImageTensor make_removal_init(const TargetHandle& target, const ImageTensor& x_watermarked,
                              const RemovalInitGrid& grid, const RngStream& rng) {
  std::optional<ImageTensor> best;
  double best_psnr = -std::numeric_limits<double>::infinity();
  auto consider = [&](ImageTensor cand) {
    if (target.decision(cand) != 0) return;
    const double q = psnr(cand, x_watermarked);
    if (q > best_psnr) {
      best_psnr = q;
      best = std::move(cand);
    }
  };
  for (double q : grid.jpeg_qualities) consider(jpeg_compress(x_watermarked, q));
  for (std::size_t j = 0; j < grid.noise_sigmas.size(); ++j) {
    RngStream noise = rng.child({"removal-init", j});
    consider(gaussian_noise(x_watermarked, grid.noise_sigmas[j], noise));
  }
  if (!best) throw InfeasibleError("removal init: no JPEG or noise grid point flips the detector");
  return std::move(*best);
}

ImageTensor make_forgery_init(const ImageTensor& x_clean, const WatermarkDetectorConfig& cfg) {
  return WatermarkCodec(cfg.params).embed(x_clean, cfg.w_t);
}

}  // namespace detbench
