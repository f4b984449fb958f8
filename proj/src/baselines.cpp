#include "sgdetect/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sgdetect {

std::string_view to_string(ThresholdKind k) noexcept { return k == ThresholdKind::euclidean ? "euclidean" : "cosine"; }

ThresholdKind parse_threshold_kind(std::string_view name) {
  if (name == "euclidean") return ThresholdKind::euclidean;
  if (name == "cosine") return ThresholdKind::cosine;
  throw std::invalid_argument("unknown threshold detector '" + std::string(name) + "'");
}

std::string_view to_string(PredictionSource p) noexcept { return p == PredictionSource::posterior ? "posterior" : "prior"; }

PredictionSource parse_prediction_source(std::string_view name) {
  if (name == "posterior") return PredictionSource::posterior;
  if (name == "prior") return PredictionSource::prior;
  throw std::invalid_argument("unknown prediction source '" + std::string(name) + "'");
}

void ThresholdDetectorConfig::validate() const {
  if (kind == ThresholdKind::euclidean && !(threshold > 0.0))
    throw std::invalid_argument("euclidean threshold must be > 0");
  if (kind == ThresholdKind::cosine && !(threshold >= -1.0 && threshold <= 1.0))
    throw std::invalid_argument("cosine threshold must lie in [-1, 1]");
}

double euclidean_statistic(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) { return (y - y_hat).norm(); }

double cosine_similarity(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
  const double ny = y.norm(), nh = y_hat.norm();
  if (ny < kZeroNormGuard || nh < kZeroNormGuard) return 0.0;
  return std::clamp(y.dot(y_hat) / (ny * nh), -1.0, 1.0);
}

bool threshold_alarm(const ThresholdDetectorConfig& cfg, const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
  if (cfg.kind == ThresholdKind::euclidean) return euclidean_statistic(y, y_hat) > cfg.threshold;
  return cosine_similarity(y, y_hat) < cfg.threshold;
}

FilteredPredictions::FilteredPredictions(MeasurementStream& stream, KalmanFilter& filter, PredictionSource source)
    : stream_(&stream), filter_(&filter), source_(source), available_(filter.model().K()) {}

bool FilteredPredictions::next(Eigen::VectorXd& y, Eigen::VectorXd& y_hat) {
  if (!stream_->next(y, available_)) return false;
  filter_->step(y, &available_);
  const auto& H = filter_->model().H;
  y_hat.noalias() = H * (source_ == PredictionSource::posterior ? filter_->estimate() : filter_->prior_estimate());
  if (filter_->options().dos == DosHandling::skip && !available_.all()) {
    for (Eigen::Index k = 0; k < y.size(); ++k)
      if (!available_[k]) y[k] = y_hat[k] = 0.0;
  }
  return true;
}

ScriptedPredictions::ScriptedPredictions(std::vector<Eigen::VectorXd> y, std::vector<Eigen::VectorXd> y_hat)
    : y_(std::move(y)), y_hat_(std::move(y_hat)) {
  if (y_.size() != y_hat_.size()) throw std::invalid_argument("scripted predictions need equal-length sequences");
}

bool ScriptedPredictions::next(Eigen::VectorXd& y, Eigen::VectorXd& y_hat) {
  if (pos_ >= y_.size()) return false;
  y = y_[pos_];
  y_hat = y_hat_[pos_];
  ++pos_;
  return true;
}

namespace {

double statistic(ThresholdKind kind, const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat) {
  return kind == ThresholdKind::euclidean ? euclidean_statistic(y, y_hat) : cosine_similarity(y, y_hat);
}

bool skip_warmup(PredictionStream& p, int warmup, Eigen::VectorXd& y, Eigen::VectorXd& y_hat) {
  for (int i = 0; i < warmup; ++i)
    if (!p.next(y, y_hat)) return false;
  return true;
}

}  // namespace

StopResult threshold_detect(const ThresholdDetectorConfig& cfg, PredictionStream& predictions, int warmup,
                            std::int64_t max_horizon) {
  cfg.validate();
  if (max_horizon < 1) throw std::invalid_argument("max_horizon must be >= 1");
  Eigen::VectorXd y, y_hat;
  if (!skip_warmup(predictions, warmup, y, y_hat)) throw std::runtime_error("prediction stream ended during warm-up");
  for (std::int64_t t = 1; t <= max_horizon; ++t) {
    if (!predictions.next(y, y_hat)) return {t - 1, false};
    if (threshold_alarm(cfg, y, y_hat)) return {t, true};
  }
  return {max_horizon, false};
}

namespace {

StopResult run_threshold(MeasurementStream& stream, const FilterContext& ctx, const ThresholdDetectorConfig& cfg,
                         std::int64_t max_horizon) {
  KalmanFilter filter = ctx.make_filter();
  filter.reset(ctx.x0);
  FilteredPredictions p(stream, filter, cfg.source);
  return threshold_detect(cfg, p, stream.warmup(), max_horizon);
}

}  // namespace

StopResult euclidean_detect(MeasurementStream& stream, const FilterContext& ctx, const ThresholdDetectorConfig& cfg,
                            std::int64_t max_horizon) {
  if (cfg.kind != ThresholdKind::euclidean) throw std::invalid_argument("euclidean_detect needs a euclidean config");
  return run_threshold(stream, ctx, cfg, max_horizon);
}

StopResult cosine_detect(MeasurementStream& stream, const FilterContext& ctx, const ThresholdDetectorConfig& cfg,
                         std::int64_t max_horizon) {
  if (cfg.kind != ThresholdKind::cosine) throw std::invalid_argument("cosine_detect needs a cosine config");
  return run_threshold(stream, ctx, cfg, max_horizon);
}

CrossingTracker::CrossingTracker(ThresholdKind kind, std::span<const double> thresholds)
    : kind_(kind), thresholds_(thresholds.begin(), thresholds.end()), order_(thresholds.size()),
      gamma_(thresholds.size(), 0) {
  for (double thr : thresholds_) ThresholdDetectorConfig{kind, thr, PredictionSource::posterior}.validate();
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  // Euclidean: smallest threshold crosses first. Cosine: largest.
  std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
    return kind_ == ThresholdKind::euclidean ? thresholds_[a] < thresholds_[b] : thresholds_[a] > thresholds_[b];
  });
}

void CrossingTracker::observe(std::int64_t t, double stat) {
  while (next_ < order_.size()) {
    const double thr = thresholds_[order_[next_]];
    const bool alarm = kind_ == ThresholdKind::euclidean ? stat > thr : stat < thr;
    if (!alarm) break;
    gamma_[order_[next_++]] = t;
  }
}

std::vector<StopResult> CrossingTracker::results(std::int64_t horizon) const {
  std::vector<StopResult> out(thresholds_.size(), StopResult{horizon, false});
  for (std::size_t i = 0; i < next_; ++i) out[order_[i]] = {gamma_[order_[i]], true};
  return out;
}

std::vector<StopResult> first_crossings(ThresholdKind kind, std::span<const double> thresholds,
                                        PredictionStream& predictions, int warmup, std::int64_t max_horizon) {
  if (max_horizon < 1) throw std::invalid_argument("max_horizon must be >= 1");
  CrossingTracker tracker(kind, thresholds);
  Eigen::VectorXd y, y_hat;
  if (!skip_warmup(predictions, warmup, y, y_hat)) throw std::runtime_error("prediction stream ended during warm-up");
  std::int64_t t = 0;
  while (t < max_horizon && !tracker.done()) {
    if (!predictions.next(y, y_hat)) return tracker.results(t);
    ++t;
    tracker.observe(t, statistic(kind, y, y_hat));
  }
  return tracker.results(max_horizon);
}

}  // namespace sgdetect
