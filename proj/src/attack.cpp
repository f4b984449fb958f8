#include "sgdetect/attack.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace sgdetect {

namespace {

constexpr std::array<std::pair<AttackKind, std::string_view>, 9> kKindNames{{
    {AttackKind::none, "none"},
    {AttackKind::fdi, "fdi"},
    {AttackKind::stealth_fdi, "stealth_fdi"},
    {AttackKind::jamming_awgn, "jamming_awgn"},
    {AttackKind::jamming_correlated, "jamming_correlated"},
    {AttackKind::hybrid, "hybrid"},
    {AttackKind::dos, "dos"},
    {AttackKind::topology, "topology"},
    {AttackKind::mixed, "mixed"},
}};

bool uses_fdi(AttackKind k) { return k == AttackKind::fdi || k == AttackKind::hybrid || k == AttackKind::mixed; }
bool uses_jamming(AttackKind k) {
  return k == AttackKind::jamming_awgn || k == AttackKind::hybrid || k == AttackKind::mixed;
}
bool uses_topology(AttackKind k) { return k == AttackKind::topology || k == AttackKind::mixed; }

void require(bool ok, const std::string& msg) {
  if (!ok) throw std::invalid_argument(msg);
}

double uniform(Rng& rng, double lo, double hi) {
  if (lo == hi) return lo;
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void add_fdi(const AttackParams& p, Rng& rng, Eigen::VectorXd& y) {
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    double b = uniform(rng, p.fdi_lo, p.fdi_hi);
    switch (p.sign_mode) {
      case SignMode::uniform:
        break;
      case SignMode::per_episode:
        b *= p.signs[static_cast<std::size_t>(k)];
        break;
      case SignMode::per_step:
        if (std::bernoulli_distribution(0.5)(rng)) b = -b;
        break;
    }
    y(k) += b;
  }
}

void add_jamming(const AttackParams& p, Rng& rng, Eigen::VectorXd& y) {
  for (Eigen::Index k = 0; k < y.size(); ++k) {
    const double var = uniform(rng, p.jam_var_lo, p.jam_var_hi);
    if (var > 0.0) y(k) += std::normal_distribution<double>(0.0, std::sqrt(var))(rng);
  }
}

}  // namespace

std::string_view to_string(AttackKind k) noexcept {
  for (const auto& [kind, name] : kKindNames)
    if (kind == k) return name;
  return "?";
}

AttackKind parse_attack_kind(std::string_view name) {
  for (const auto& [kind, n] : kKindNames)
    if (n == name) return kind;
  throw std::invalid_argument("unknown attack kind '" + std::string(name) + "'");
}

std::string_view to_string(SignMode m) noexcept {
  switch (m) {
    case SignMode::uniform: return "uniform";
    case SignMode::per_episode: return "per_episode";
    case SignMode::per_step: return "per_step";
  }
  return "?";
}

SignMode parse_sign_mode(std::string_view name) {
  if (name == "uniform") return SignMode::uniform;
  if (name == "per_episode") return SignMode::per_episode;
  if (name == "per_step") return SignMode::per_step;
  throw std::invalid_argument("unknown sign mode '" + std::string(name) + "'");
}

std::string_view to_string(TrainingPhase p) noexcept {
  return p == TrainingPhase::fdi_phase ? "fdi" : "hybrid";
}

TrainingPhase parse_training_phase(std::string_view name) {
  if (name == "fdi" || name == "fdi_phase") return TrainingPhase::fdi_phase;
  if (name == "hybrid" || name == "hybrid_phase") return TrainingPhase::hybrid_phase;
  throw std::invalid_argument("unknown training phase '" + std::string(name) + "'");
}

AttackScenario prepare_scenario(const SystemModel& model, AttackScenario s) {
  const AttackParams& p = s.params;
  require(s.tau >= 1, "attack launch time tau must be >= 1");
  if (uses_fdi(s.kind)) {
    require(p.fdi_lo <= p.fdi_hi, "fdi bounds must satisfy lo <= hi");
    if (p.sign_mode != SignMode::uniform) require(p.fdi_lo >= 0.0, "signed fdi magnitudes need lo >= 0");
    if (p.sign_mode == SignMode::per_episode)
      require(p.signs.size() == static_cast<std::size_t>(model.K()), "per-episode fdi needs one sign per meter");
  }
  if (s.kind == AttackKind::stealth_fdi) require(p.stealth_lo <= p.stealth_hi, "stealth bounds must satisfy lo <= hi");
  if (uses_jamming(s.kind))
    require(p.jam_var_lo >= 0.0 && p.jam_var_lo <= p.jam_var_hi, "jamming variances must satisfy 0 <= lo <= hi");
  if (s.kind == AttackKind::jamming_correlated) require(p.corr_entry_var >= 0.0, "correlated jamming variance must be >= 0");
  if (s.kind == AttackKind::dos)
    require(p.availability >= 0.0 && p.availability <= 1.0, "dos availability must lie in [0, 1]");
  if (uses_topology(s.kind)) {
    require(model.topology.has_value(), "topology attacks need a model file with network directives");
    const NetworkTopology& topo = *model.topology;
    std::vector<bool> removed(topo.branches.size(), false);
    for (const auto& [a, b] : p.removed_lines) {
      const auto br = topo.find_branch(a, b);
      require(br.has_value(), "topology attack references nonexistent line " + std::to_string(a) + "-" + std::to_string(b));
      removed[*br] = true;
    }
    s.h_bar = dc_measurement_matrix(topo, model.N(), removed);
  }
  return s;
}

void attacked_measurement_into(const SystemModel& model, const AttackScenario& s, std::int64_t t,
                               const Eigen::VectorXd& x, Rng& rng, Eigen::VectorXd& y,
                               Eigen::Array<bool, Eigen::Dynamic, 1>* available) {
  if (available) available->setConstant(model.K(), true);
  if (!s.active_at(t)) {
    measure_nominal_into(model, x, rng, y);
    return;
  }
  if (uses_topology(s.kind)) {
    if (!s.h_bar) throw std::invalid_argument("topology scenario used before prepare_scenario");
    if (x.size() != model.N()) throw std::invalid_argument("state has wrong length");
    y.noalias() = *s.h_bar * x;
    if (model.sigma_w2 > 0.0) {
      std::normal_distribution<double> nd(0.0, std::sqrt(model.sigma_w2));
      for (Eigen::Index k = 0; k < y.size(); ++k) y(k) += nd(rng);
    }
  } else {
    measure_nominal_into(model, x, rng, y);
  }

  const AttackParams& p = s.params;
  switch (s.kind) {
    case AttackKind::none:
    case AttackKind::topology:
      break;
    case AttackKind::fdi:
      add_fdi(p, rng, y);
      break;
    case AttackKind::stealth_fdi: {
      Eigen::VectorXd g(model.N());
      for (Eigen::Index n = 0; n < g.size(); ++n) g(n) = uniform(rng, p.stealth_lo, p.stealth_hi);
      y.noalias() += model.H * g;
      break;
    }
    case AttackKind::jamming_awgn:
      add_jamming(p, rng, y);
      break;
    case AttackKind::jamming_correlated: {
      const Eigen::Index K = model.K();
      if (p.corr_entry_var <= 0.0) break;
      std::normal_distribution<double> nd(0.0, std::sqrt(p.corr_entry_var));
      Eigen::MatrixXd sigma(K, K);
      for (Eigen::Index j = 0; j < K; ++j)
        for (Eigen::Index i = 0; i < K; ++i) sigma(i, j) = nd(rng);
      std::normal_distribution<double> std_normal;
      Eigen::VectorXd z(K);
      for (Eigen::Index i = 0; i < K; ++i) z(i) = std_normal(rng);
      y.noalias() += sigma * z;  // cov(sigma z) = sigma sigma^T
      break;
    }
    case AttackKind::hybrid:
    case AttackKind::mixed:
      add_fdi(p, rng, y);
      add_jamming(p, rng, y);
      break;
    case AttackKind::dos: {
      std::bernoulli_distribution up(p.availability);
      for (Eigen::Index k = 0; k < y.size(); ++k) {
        if (!up(rng)) {
          y(k) = 0.0;
          if (available) (*available)(k) = false;
        }
      }
      break;
    }
  }
}

Eigen::VectorXd attacked_measurement(const SystemModel& model, const AttackScenario& s, std::int64_t t,
                                     const Eigen::VectorXd& x, Rng& rng) {
  if (t < 1) throw std::invalid_argument("time index must be >= 1");
  Eigen::VectorXd y(model.K());
  attacked_measurement_into(model, s, t, x, rng, y);
  return y;
}

void draw_episode_signs(AttackParams& params, Eigen::Index K, Rng& rng) {
  params.signs.resize(static_cast<std::size_t>(K));
  std::bernoulli_distribution coin(0.5);
  for (auto& sg : params.signs) sg = coin(rng) ? 1 : -1;
}

AttackScenario sample_training_scenario(TrainingPhase phase, std::int64_t tau, Eigen::Index K, Rng& rng,
                                        SignMode sign_mode) {
  if (tau < 1) throw std::invalid_argument("training tau must be >= 1");
  AttackScenario s;
  s.kind = phase == TrainingPhase::fdi_phase ? AttackKind::fdi : AttackKind::hybrid;
  s.tau = tau;
  s.params.fdi_lo = 0.02;
  s.params.fdi_hi = 0.06;
  s.params.sign_mode = sign_mode;
  if (sign_mode == SignMode::per_episode) draw_episode_signs(s.params, K, rng);
  if (phase == TrainingPhase::hybrid_phase) {
    s.params.jam_var_lo = 2e-4;
    s.params.jam_var_hi = 4e-4;
  }
  return s;
}

}  // namespace sgdetect
