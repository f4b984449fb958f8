#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "sgdetect/rl_detector.hpp"
#include "sgdetect/simulation.hpp"

namespace sgdetect {

enum class ThresholdKind { euclidean, cosine };
enum class PredictionSource { posterior, prior };

std::string_view to_string(ThresholdKind k) noexcept;
ThresholdKind parse_threshold_kind(std::string_view name);
std::string_view to_string(PredictionSource p) noexcept;
PredictionSource parse_prediction_source(std::string_view name);

struct ThresholdDetectorConfig {
  ThresholdKind kind = ThresholdKind::euclidean;
  double threshold = 0.0;
  PredictionSource source = PredictionSource::posterior;

  /// Throws std::invalid_argument: euclidean needs threshold > 0, cosine [-1, 1].
  void validate() const;
};

inline constexpr double kZeroNormGuard = 1e-12;

/// |y - y_hat|.
double euclidean_statistic(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat);
/// y.y_hat / (|y| |y_hat|), or 0 when either norm is below kZeroNormGuard.
double cosine_similarity(const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat);

/// Whether a single sample raises an alarm.
bool threshold_alarm(const ThresholdDetectorConfig& cfg, const Eigen::VectorXd& y, const Eigen::VectorXd& y_hat);

/// Pairs (y_t, y_hat_t) for consecutive times.
class PredictionStream {
 public:
  virtual ~PredictionStream() = default;
  virtual bool next(Eigen::VectorXd& y, Eigen::VectorXd& y_hat) = 0;
};

/// Runs the nominal-model filter over a measurement stream and predicts y_t
/// from the prior or posterior estimate. In DoS skip mode the unavailable
/// meters are zeroed in both vectors.
class FilteredPredictions final : public PredictionStream {
 public:
  FilteredPredictions(MeasurementStream& stream, KalmanFilter& filter, PredictionSource source);
  bool next(Eigen::VectorXd& y, Eigen::VectorXd& y_hat) override;

 private:
  MeasurementStream* stream_;
  KalmanFilter* filter_;
  PredictionSource source_;
  MeasurementStream::Mask available_;
};

class ScriptedPredictions final : public PredictionStream {
 public:
  ScriptedPredictions(std::vector<Eigen::VectorXd> y, std::vector<Eigen::VectorXd> y_hat);
  bool next(Eigen::VectorXd& y, Eigen::VectorXd& y_hat) override;

 private:
  std::vector<Eigen::VectorXd> y_, y_hat_;
  std::size_t pos_ = 0;
};

/// Discards `warmup` pairs, then alarms at the first t = 1.. that crosses.
StopResult threshold_detect(const ThresholdDetectorConfig& cfg, PredictionStream& predictions, int warmup,
                            std::int64_t max_horizon);

StopResult euclidean_detect(MeasurementStream& stream, const FilterContext& ctx, const ThresholdDetectorConfig& cfg,
                            std::int64_t max_horizon);
StopResult cosine_detect(MeasurementStream& stream, const FilterContext& ctx, const ThresholdDetectorConfig& cfg,
                         std::int64_t max_horizon);

/// One pass over a stream for many thresholds of one kind. Element i is the
/// result for thresholds[i].
std::vector<StopResult> first_crossings(ThresholdKind kind, std::span<const double> thresholds,
                                        PredictionStream& predictions, int warmup, std::int64_t max_horizon);

/// Tracks first crossings for a set of thresholds, one sample at a time.
class CrossingTracker {
 public:
  CrossingTracker(ThresholdKind kind, std::span<const double> thresholds);

  /// Feeds the statistic of time t (distance for euclidean, similarity for cosine).
  void observe(std::int64_t t, double statistic);
  bool done() const noexcept { return next_ == order_.size(); }
  /// Results; undecided thresholds report {horizon, false}.
  std::vector<StopResult> results(std::int64_t horizon) const;

 private:
  ThresholdKind kind_;
  std::vector<double> thresholds_;
  std::vector<std::size_t> order_;  // most easily crossed first
  std::vector<std::int64_t> gamma_;
  std::size_t next_ = 0;
};

}  // namespace sgdetect
