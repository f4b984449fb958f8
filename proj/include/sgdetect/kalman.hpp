#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "sgdetect/attack.hpp"
#include "sgdetect/grid_model.hpp"
#include "sgdetect/rng.hpp"

namespace sgdetect {

enum class FilterPhase { predicted, updated };

/// One filter instant. After `update`, x_hat is x_{t|t}, F is F_{t|t} and G
/// (N x K) is the gain used; after `predict`, x_hat/F hold the one-step prediction.
struct KalmanState {
  Eigen::VectorXd x_hat;
  Eigen::MatrixXd F;
  Eigen::MatrixXd G;
  FilterPhase phase = FilterPhase::updated;
};

/// Default F_{0|0} = kInitialCovariance * I.
inline constexpr double kInitialCovariance = 1e-2;

KalmanState initial_filter_state(const SystemModel& model, const Eigen::VectorXd& x0,
                                 double initial_covariance = kInitialCovariance);

/// x <- A x, F <- A F A^T + sigma_v2 I. Requires phase == updated.
KalmanState predict(const SystemModel& model, const KalmanState& ks);
/// Measurement update with a Cholesky solve of the innovation covariance.
/// Requires phase == predicted.
KalmanState update(const SystemModel& model, const KalmanState& ks, const Eigen::VectorXd& y);

/// eta = |y - H x_hat|^2 with x_hat the updated estimate.
double residual_stat(const SystemModel& model, const Eigen::VectorXd& x_hat_updated, const Eigen::VectorXd& y);
/// Contribution of the meters in `meters` (0-based) to residual_stat.
double partial_residual(const SystemModel& model, const Eigen::VectorXd& x_hat_updated, const Eigen::VectorXd& y,
                        std::span<const Eigen::Index> meters);

/// Gains and posterior covariances of the Riccati recursion from F_{0|0},
/// recorded until the covariance stops changing. Data-independent, so one
/// schedule serves every episode of a model.
struct GainSchedule {
  std::vector<Eigen::MatrixXd> gains;      // gains[i] is G at update i+1
  std::vector<Eigen::MatrixXd> posterior;  // F_{t|t} after update i+1
  bool converged = false;

  const Eigen::MatrixXd& gain_at(std::size_t update_index) const {
    return gains[std::min(update_index, gains.size() - 1)];
  }
  const Eigen::MatrixXd& steady_covariance() const { return posterior.back(); }
};

GainSchedule compute_gain_schedule(const SystemModel& model, double initial_covariance = kInitialCovariance,
                                   double tolerance = 1e-14, int max_steps = 20000);

/// How the estimator treats meters dropped by a DoS attack.
///  - zeros: the zeroed readings are used as measurements.
///  - skip:  unavailable meters are left out of the update and of eta.
enum class DosHandling { zeros, skip };

struct FilterOptions {
  bool steady_state = false;  // use a frozen gain schedule instead of the Riccati update
  DosHandling dos = DosHandling::zeros;
  double initial_covariance = kInitialCovariance;
};

/// Preallocated filter for simulation loops. Produces the same numbers as
/// predict/update; in steady-state mode the gain comes from a shared schedule.
class KalmanFilter {
 public:
  using Mask = Eigen::Array<bool, Eigen::Dynamic, 1>;

  KalmanFilter(const SystemModel& model, FilterOptions options = {},
               std::shared_ptr<const GainSchedule> schedule = nullptr);

  void reset(const Eigen::VectorXd& x0);
  /// Prediction followed by the measurement update with y_t.
  void step(const Eigen::VectorXd& y, const Mask* available = nullptr);

  /// eta_t for the last step (over available meters in skip mode).
  double eta() const noexcept { return eta_; }
  const Eigen::VectorXd& prior_estimate() const noexcept { return x_prior_; }
  const Eigen::VectorXd& estimate() const noexcept { return x_; }
  /// Posterior covariance; meaningful in full mode only.
  const Eigen::MatrixXd& covariance() const noexcept { return F_; }
  const SystemModel& model() const noexcept { return *model_; }
  bool steady_state() const noexcept { return schedule_ != nullptr; }
  const FilterOptions& options() const noexcept { return options_; }

 private:
  void full_update(const Eigen::VectorXd& y);
  void masked_update(const Eigen::VectorXd& y, const Mask& available);

  const SystemModel* model_;
  FilterOptions options_;
  std::shared_ptr<const GainSchedule> schedule_;
  std::size_t updates_ = 0;
  Eigen::VectorXd x_, x_prior_, innov_, resid_;
  Eigen::MatrixXd F_, F_prior_, G_, HF_, S_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
  double eta_ = 0.0;
};

/// Mean over runs of |x_t - x_{t|t}|^2 / N for t = 1..horizon; element t-1 is time t.
/// The filter always runs with the nominal model. Run r uses derive_seed(seed, r).
std::vector<double> mse_curve(const SystemModel& model, const Eigen::VectorXd& x0, const AttackScenario& scenario,
                              int horizon, int n_runs, std::uint64_t seed, FilterOptions options = {});

}  // namespace sgdetect
