#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sgdetect/attack.hpp"
#include "sgdetect/baselines.hpp"
#include "sgdetect/rl_detector.hpp"
#include "sgdetect/simulation.hpp"

namespace sgdetect {

enum class DetectorKind { rl, euclidean, cosine };

std::string_view to_string(DetectorKind k) noexcept;
DetectorKind parse_detector_kind(std::string_view name);

/// A detector the harness can run: a trained table or a threshold test.
struct Detector {
  DetectorKind kind = DetectorKind::rl;
  std::string id;
  std::shared_ptr<const QTable> table;  // rl
  QuantizerConfig quantizer;            // rl
  ThresholdDetectorConfig threshold;    // euclidean / cosine

  static Detector rl(std::shared_ptr<const QTable> table, std::string id = "rl");
  static Detector euclidean(double threshold, PredictionSource source = PredictionSource::posterior);
  static Detector cosine(double threshold, PredictionSource source = PredictionSource::posterior);

  /// c for rl, the threshold otherwise.
  double parameter() const;
};

/// Draws rho ~ U[1e-4, 1e-3] (or uses forced_rho) and then tau ~ Geometric(rho)
/// on {1, 2, ...}.
std::int64_t sample_changepoint(Rng& rng, std::optional<double> forced_rho = std::nullopt);

inline constexpr double kRhoLo = 1e-4;
inline constexpr double kRhoHi = 1e-3;

enum class Outcome { false_alarm, detected_in_bound, late, no_stop };

std::string_view to_string(Outcome o) noexcept;

/// Total classification of one trial with delay bound B.
Outcome classify(std::int64_t tau, std::int64_t gamma, bool stopped, std::int64_t bound);

struct TrialResult {
  std::int64_t tau = 0;
  std::int64_t gamma = 0;
  bool stopped = false;
  Outcome outcome = Outcome::no_stop;
};

struct EvalConfig {
  std::int64_t n_trials = 2000;
  std::int64_t bound = 10;
  std::int64_t max_horizon = 40000;
  int warmup = 4;
  unsigned jobs = 1;
  std::optional<double> forced_rho;

  void validate() const;
};

struct Scores {
  double precision = 0.0;
  double recall = 0.0;
  double fscore = 0.0;
};

/// Precision = in/(in + fa), recall = in/(in + missed), F = harmonic mean;
/// a ratio with an empty denominator is 0.
Scores scores_from_counts(std::int64_t in_bound, std::int64_t false_alarms, std::int64_t missed);

struct EvalReport {
  std::string detector;
  std::string scenario;
  double parameter = 0.0;
  std::int64_t n = 0;
  std::int64_t false_alarms = 0;
  std::int64_t in_bound = 0;
  std::int64_t late = 0;
  std::int64_t no_stop = 0;  // censored at max_horizon; counted as missed
  double pfa = 0.0;
  double add = 0.0;              // mean (Gamma - tau)^+ over all trials
  double add_conditional = 0.0;  // mean (Gamma - tau) over trials with Gamma >= tau
  Scores scores;
};

EvalReport summarize(const std::vector<TrialResult>& trials, std::string detector, std::string scenario,
                     double parameter);

/// Runs every detector on the same simulated trial (common random numbers):
/// trial i of master seed s always sees the same tau and the same stream.
std::vector<TrialResult> run_trial(const std::vector<Detector>& detectors, const AttackScenario& scenario,
                                   const FilterContext& ctx, const EvalConfig& cfg, std::uint64_t seed,
                                   std::uint64_t trial_index);

/// One report per detector, in input order.
std::vector<EvalReport> evaluate(const std::vector<Detector>& detectors, const AttackScenario& scenario,
                                 std::string_view scenario_name, const FilterContext& ctx, const EvalConfig& cfg,
                                 std::uint64_t seed);

struct FalseAlarmPeriod {
  double mean = 0.0;  // no-stop trials contribute max_horizon
  double censored_fraction = 0.0;
  std::int64_t n = 0;
};

/// Mean stopping time with no attack. Uses cfg.n_trials, max_horizon, warmup, jobs.
FalseAlarmPeriod false_alarm_period(const Detector& detector, const FilterContext& ctx, const EvalConfig& cfg,
                                    std::uint64_t seed);

struct CurvePoint {
  double pfa = 0.0;
  double add = 0.0;
  double add_monotone = 0.0;  // running minimum of add in pfa order
  double parameter = 0.0;
  std::string detector;
};

/// Points sorted by pfa (ties by add).
std::vector<CurvePoint> tradeoff_curve(const std::vector<EvalReport>& reports);

/// eta_1..eta_n of one attack-free run.
std::vector<double> nominal_residuals(const FilterContext& ctx, std::int64_t n_steps, std::uint64_t seed);

/// Log-spaced thresholds spanning the nominal range of the detector statistic:
/// from its median to twice its maximum over `n_steps` attack-free steps. For
/// cosine the grid is built on 1 - similarity and mapped back.
std::vector<double> nominal_threshold_grid(ThresholdKind kind, PredictionSource source, const FilterContext& ctx,
                                           int n_points, std::int64_t n_steps, std::uint64_t seed);

}  // namespace sgdetect
