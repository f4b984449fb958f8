#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <vector>

#include "sgdetect/attack.hpp"
#include "sgdetect/grid_model.hpp"
#include "sgdetect/kalman.hpp"
#include "sgdetect/rng.hpp"

namespace sgdetect {

/// Consecutive measurement vectors y_t. Streams begin with `warmup()` samples
/// at times 1-warmup..0 (pre-attack history used to fill detector state);
/// decisions start at t = 1.
class MeasurementStream {
 public:
  using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;
  virtual ~MeasurementStream() = default;

  /// Writes the next sample; returns false when the stream is exhausted.
  virtual bool next(Eigen::VectorXd& y, Mask& available) = 0;
  /// Time index of the most recent sample.
  virtual std::int64_t time() const noexcept = 0;
  virtual int warmup() const noexcept = 0;
};

/// Simulates the plant under an attack scenario, with one rng for all draws.
class SimulatedStream final : public MeasurementStream {
 public:
  SimulatedStream(const SystemModel& model, AttackScenario scenario, const Eigen::VectorXd& x0, Rng rng,
                  int warmup);

  bool next(Eigen::VectorXd& y, Mask& available) override;
  std::int64_t time() const noexcept override { return t_; }
  int warmup() const noexcept override { return warmup_; }
  const Eigen::VectorXd& state() const noexcept { return x_; }
  const AttackScenario& scenario() const noexcept { return scenario_; }

 private:
  const SystemModel* model_;
  AttackScenario scenario_;
  Eigen::VectorXd x_, scratch_;
  Rng rng_;
  int warmup_;
  std::int64_t t_;
};

/// Measurements read from a file: one row of K values per time step.
class RecordedStream final : public MeasurementStream {
 public:
  RecordedStream(std::vector<Eigen::VectorXd> rows, int warmup);

  bool next(Eigen::VectorXd& y, Mask& available) override;
  std::int64_t time() const noexcept override { return static_cast<std::int64_t>(pos_) - warmup_; }
  int warmup() const noexcept override { return warmup_; }

 private:
  std::vector<Eigen::VectorXd> rows_;
  std::size_t pos_ = 0;
  int warmup_;
};

/// Reads whitespace- or comma-separated rows of K numbers; `#` starts a comment.
std::vector<Eigen::VectorXd> read_measurement_rows(const std::filesystem::path& path, Eigen::Index K);

/// Shared read-only pieces needed to run a filter against a stream.
struct FilterContext {
  const SystemModel* model = nullptr;
  Eigen::VectorXd x0;
  FilterOptions options;
  std::shared_ptr<const GainSchedule> schedule;  // set when options.steady_state

  static FilterContext make(const SystemModel& model, const Eigen::VectorXd& x0, FilterOptions options = {});
  KalmanFilter make_filter() const { return KalmanFilter(*model, options, schedule); }
};

}  // namespace sgdetect
