#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sgdetect/attack.hpp"
#include "sgdetect/kalman.hpp"
#include "sgdetect/observation.hpp"
#include "sgdetect/rng.hpp"
#include "sgdetect/simulation.hpp"

namespace sgdetect {

enum class Action : std::uint8_t { continue_ = 0, stop = 1 };

/// Hidden state of the detection POMDP: pre_attack -> post_attack at tau,
/// either -> terminal on stop.
enum class HiddenState { pre_attack, post_attack, terminal };

struct QTableMeta {
  int levels = 0;
  int window = 0;
  std::vector<double> thresholds;
  double cost = 0.0;
  double alpha = 0.0;
  double epsilon = 0.0;
  int horizon = 0;
  std::int64_t episodes = 0;
  std::uint64_t seed = 0;

  QuantizerConfig quantizer() const { return QuantizerConfig::make(levels, thresholds); }
  bool operator==(const QTableMeta&) const = default;
};

/// Expected-cost table Q(o, a) over levels^window observation windows.
class QTable {
 public:
  QTable() = default;
  /// All-zero table.
  QTable(int levels, int window);

  std::uint64_t rows() const noexcept { return rows_; }
  double operator()(std::uint64_t o, Action a) const { return q_[slot(o, a)]; }
  double& at(std::uint64_t o, Action a) { return q_[slot(o, a)]; }

  QTableMeta meta;

  bool operator==(const QTable& other) const = default;

 private:
  std::size_t slot(std::uint64_t o, Action a) const;

  std::uint64_t rows_ = 0;
  std::vector<double> q_;
};

/// Q(o,a) += alpha (r + Q(o',a') - Q(o,a)); undiscounted.
void sarsa_update(QTable& q, std::uint64_t o, Action a, double r, std::uint64_t o_next, Action a_next, double alpha);
/// Q(o,a) += alpha (r - Q(o,a)).
void sarsa_terminal_update(QTable& q, std::uint64_t o, Action a, double r, double alpha);

/// argmin_a Q(o,a); ties go to continue.
Action greedy_action(const QTable& q, std::uint64_t o);
/// Greedy action with probability 1 - epsilon, the other one otherwise.
Action select_action(const QTable& q, std::uint64_t o, double epsilon, Rng& rng);

/// One block of training episodes sharing a launch time and attack family.
struct TrainingStage {
  std::int64_t tau = 1;
  std::int64_t episodes = 0;
  TrainingPhase attack = TrainingPhase::fdi_phase;
};

struct TrainConfig {
  double alpha = 0.1;
  double epsilon = 0.1;
  double cost = 0.2;  // c, delay cost relative to a false alarm
  int horizon = 200;  // T
  int window = 4;     // M
  std::vector<TrainingStage> schedule;
  SignMode sign_mode = SignMode::uniform;  // b_{k,t} ~ U[0.02, 0.06], positive
  FilterOptions filter;
  int log_interval = 1000;

  std::int64_t total_episodes() const;
  /// Throws std::invalid_argument when a parameter is out of range.
  void validate() const;
};

/// The paper-parity schedule: `episodes` FDI episodes with tau = 100, then
/// `episodes` hybrid episodes with tau = 1.
std::vector<TrainingStage> standard_schedule(std::int64_t episodes_per_phase);

/// Produces eta for consecutive times; false when exhausted.
class ResidualSource {
 public:
  virtual ~ResidualSource() = default;
  virtual bool next(double& eta) = 0;
};

/// Kalman filter run over a measurement stream.
class FilteredResiduals final : public ResidualSource {
 public:
  FilteredResiduals(MeasurementStream& stream, KalmanFilter& filter);
  bool next(double& eta) override;

 private:
  MeasurementStream* stream_;
  KalmanFilter* filter_;
  Eigen::VectorXd y_;
  MeasurementStream::Mask available_;
};

/// Fixed sequence of eta values.
class ScriptedResiduals final : public ResidualSource {
 public:
  explicit ScriptedResiduals(std::vector<double> etas) : etas_(std::move(etas)) {}
  bool next(double& eta) override;

 private:
  std::vector<double> etas_;
  std::size_t pos_ = 0;
};

struct EpisodeOutcome {
  bool stopped = false;
  std::int64_t stop_time = 0;  // iteration at which stop was executed
  int steps = 0;
  double total_cost = 0.0;
  HiddenState final_state = HiddenState::pre_attack;
};

/// One SARSA learning episode. The first `cfg.window` values of `source` fill
/// the initial window; each later value is the residual of time t = 1, 2, ...
EpisodeOutcome run_episode(QTable& q, ResidualSource& source, const QuantizerConfig& quantizer, std::int64_t tau,
                           const TrainConfig& cfg, Rng& rng);

struct TrainLogRecord {
  std::int64_t episode = 0;
  std::string stage;
  double block_mean_cost = 0.0;
  double running_mean_cost = 0.0;
};

/// Runs every stage of cfg.schedule in order. Episode e draws all of its
/// randomness from derive_seed(seed, e).
QTable train(const SystemModel& model, const Eigen::VectorXd& x0, const TrainConfig& cfg,
             const QuantizerConfig& quantizer, std::uint64_t seed, std::vector<TrainLogRecord>* log = nullptr);

/// Result of an online detection run.
struct StopResult {
  std::int64_t gamma = 0;  // stopping time, or the last time examined
  bool stopped = false;    // false: horizon (or stream) exhausted without an alarm
};

/// Greedy detection on a residual stream: `warmup` values fill the window, then
/// t = 1.. until the table prefers stop or max_horizon is reached.
StopResult detect_residuals(const QTable& q, const QuantizerConfig& quantizer, ResidualSource& source, int warmup,
                            std::int64_t max_horizon);

/// Greedy detection on measurements, filtering with the nominal model.
StopResult detect(const QTable& q, MeasurementStream& stream, const FilterContext& ctx,
                  const QuantizerConfig& quantizer, std::int64_t max_horizon);

/// Windows whose two Q entries were never moved off zero.
std::uint64_t unvisited_windows(const QTable& q);

void save_qtable(const std::filesystem::path& path, const QTable& q, const std::vector<std::string>& comments = {});
QTable load_qtable(const std::filesystem::path& path);

}  // namespace sgdetect
