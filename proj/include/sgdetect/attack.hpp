#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "sgdetect/grid_model.hpp"
#include "sgdetect/rng.hpp"

namespace sgdetect {

enum class AttackKind {
  none,
  fdi,
  stealth_fdi,
  jamming_awgn,
  jamming_correlated,
  hybrid,
  dos,
  topology,
  mixed,
};

std::string_view to_string(AttackKind k) noexcept;
/// Throws std::invalid_argument for an unknown name.
AttackKind parse_attack_kind(std::string_view name);

/// How the sign of an injected FDI value is chosen.
///  - uniform:     b ~ U[lo, hi] as given (lo may be negative).
///  - per_episode: b = s_k * U[lo, hi], s_k fixed per meter for the scenario.
///  - per_step:    b = s * U[lo, hi], fresh random sign every draw.
enum class SignMode { uniform, per_episode, per_step };

std::string_view to_string(SignMode m) noexcept;
SignMode parse_sign_mode(std::string_view name);

inline constexpr std::int64_t kNever = std::numeric_limits<std::int64_t>::max();

struct AttackParams {
  double fdi_lo = 0.0;
  double fdi_hi = 0.0;
  SignMode sign_mode = SignMode::uniform;
  std::vector<std::int8_t> signs;  // per_episode only, one per meter

  double stealth_lo = 0.0;  // g_{n,t} ~ U[stealth_lo, stealth_hi]
  double stealth_hi = 0.0;

  // Jamming noise u_{k,t} ~ N(0, s_{k,t}) where s_{k,t} ~ U[lo, hi] is a variance.
  double jam_var_lo = 0.0;
  double jam_var_hi = 0.0;

  double corr_entry_var = 0.0;  // entries of the K x K mixing matrix, N(0, corr_entry_var)

  double availability = 1.0;  // probability that a meter reports under DoS

  std::vector<std::pair<int, int>> removed_lines;  // bus pairs
};

/// One attack family with its launch time. Immutable once built; topology
/// variants carry their altered measurement matrix.
struct AttackScenario {
  AttackKind kind = AttackKind::none;
  std::int64_t tau = kNever;  // launch time, >= 1, or kNever
  AttackParams params;
  std::optional<Eigen::MatrixXd> h_bar;  // topology / mixed

  bool active_at(std::int64_t t) const noexcept { return kind != AttackKind::none && tau != kNever && t >= tau; }
  AttackScenario with_tau(std::int64_t new_tau) const {
    AttackScenario s = *this;
    s.tau = new_tau;
    return s;
  }
};

/// Checks parameter ranges and, for topology kinds, builds h_bar from the
/// model's network description. Throws std::invalid_argument.
AttackScenario prepare_scenario(const SystemModel& model, AttackScenario scenario);

/// Nominal measurement for t < tau, the attacked one after. Measurement noise is
/// drawn first so that seed-matched nominal and attacked outputs share it.
Eigen::VectorXd attacked_measurement(const SystemModel& model, const AttackScenario& scenario, std::int64_t t,
                                     const Eigen::VectorXd& x, Rng& rng);

/// In-place variant. `available`, when given, receives the DoS availability
/// mask (all ones when no meter is dropped).
void attacked_measurement_into(const SystemModel& model, const AttackScenario& scenario, std::int64_t t,
                               const Eigen::VectorXd& x, Rng& rng, Eigen::VectorXd& y,
                               Eigen::Array<bool, Eigen::Dynamic, 1>* available = nullptr);

enum class TrainingPhase { fdi_phase, hybrid_phase };

std::string_view to_string(TrainingPhase p) noexcept;
TrainingPhase parse_training_phase(std::string_view name);

/// Low-magnitude training attacks: b_{k,t} ~ U[0.02, 0.06] (signed according to
/// sign_mode), and for the hybrid phase additionally jamming variance ~ U[2e-4, 4e-4].
AttackScenario sample_training_scenario(TrainingPhase phase, std::int64_t tau, Eigen::Index K, Rng& rng,
                                        SignMode sign_mode = SignMode::uniform);

/// Fresh per-meter signs for a per_episode scenario.
void draw_episode_signs(AttackParams& params, Eigen::Index K, Rng& rng);

}  // namespace sgdetect
