#pragma once

#include <Eigen/Dense>

#include <filesystem>
#include <optional>
#include <vector>

#include "sgdetect/rng.hpp"

namespace sgdetect {

/// A transmission line of the DC network; buses are numbered from 1.
struct Branch {
  int from = 0;
  int to = 0;
  double susceptance = 0.0;
};

/// What one row of H measures.
struct MeterInfo {
  enum class Kind { injection, flow };
  Kind kind = Kind::injection;
  int bus = 0;            // injection meters
  std::size_t branch = 0; // flow meters, index into NetworkTopology::branches
};

/// Network description carried by `#@` directives in a model file. Only needed
/// for attacks that alter the topology.
struct NetworkTopology {
  int reference_bus = 1;
  std::vector<Branch> branches;
  std::vector<MeterInfo> meters;

  /// State column of `bus`, or -1 for the reference bus.
  int state_column(int bus) const noexcept {
    if (bus == reference_bus) return -1;
    return bus < reference_bus ? bus - 1 : bus - 2;
  }
  std::optional<std::size_t> find_branch(int a, int b) const noexcept;
};

/// Measurement Jacobian of the DC model for `topology`, skipping the branches
/// flagged in `removed` (same length as topology.branches, or empty). Flow rows
/// of removed branches are zero.
Eigen::MatrixXd dc_measurement_matrix(const NetworkTopology& topology, Eigen::Index n_states,
                                      const std::vector<bool>& removed = {});

/// Nominal linear plant: x_t = A x_{t-1} + v_t, y_t = H x_t + w_t.
struct SystemModel {
  Eigen::MatrixXd A;
  Eigen::MatrixXd H;
  double sigma_v2 = 0.0;  // process noise variance (rad^2)
  double sigma_w2 = 0.0;  // measurement noise variance
  std::optional<NetworkTopology> topology;

  Eigen::Index N() const noexcept { return A.rows(); }
  Eigen::Index K() const noexcept { return H.rows(); }
};

struct LoadedSystem {
  SystemModel model;
  Eigen::VectorXd x0;
};

struct Observability {
  int rank = 0;
  bool observable = false;
};

/// Relative singular-value cutoff used for numerical rank.
inline constexpr double kRankTolerance = 1e-8;

/// Rank of [H; HA; ...; HA^{N-1}]. Total: never throws on dimension-valid input.
Observability check_observability(const SystemModel& model);

/// Throws ModelError unless dimensions agree, K >= N, sigma_v2 >= 0, sigma_w2 > 0
/// and the model is observable.
void validate_model(const SystemModel& model);

/// Reads the plain-text model format (see README). Does not validate.
SystemModel read_model_file(const std::filesystem::path& path);
Eigen::VectorXd read_state_file(const std::filesystem::path& path);
void write_model_file(const std::filesystem::path& path, const SystemModel& model);

/// Loads and validates a model and its initial state.
LoadedSystem load_system(const std::filesystem::path& model_file, const std::filesystem::path& x0_file);

/// A x + v, v ~ N(0, sigma_v2 I).
Eigen::VectorXd step_state(const SystemModel& model, const Eigen::VectorXd& x, Rng& rng);
/// H x + w, w ~ N(0, sigma_w2 I).
Eigen::VectorXd measure_nominal(const SystemModel& model, const Eigen::VectorXd& x, Rng& rng);

// Allocation-free forms used in simulation loops; same draws as above.
void step_state_into(const SystemModel& model, Eigen::VectorXd& x, Rng& rng, Eigen::VectorXd& scratch);
void measure_nominal_into(const SystemModel& model, const Eigen::VectorXd& x, Rng& rng, Eigen::VectorXd& y);

/// Attack-free state path x_1..x_horizon from x0.
struct GridTrajectory {
  std::vector<Eigen::VectorXd> states;
  int horizon() const noexcept { return static_cast<int>(states.size()); }
};
GridTrajectory simulate_states(const SystemModel& model, const Eigen::VectorXd& x0, int horizon, Rng& rng);

}  // namespace sgdetect
