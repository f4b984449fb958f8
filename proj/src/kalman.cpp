#include "sgdetect/kalman.hpp"

#include <stdexcept>
#include <string>

namespace sgdetect {

namespace {

void symmetrize(Eigen::MatrixXd& F) {
  F = 0.5 * (F + F.transpose()).eval();
}

// F_prior = A F A^T + sigma_v2 I
void riccati_predict(const SystemModel& m, const Eigen::MatrixXd& F, Eigen::MatrixXd& F_prior) {
  F_prior.noalias() = m.A * F * m.A.transpose();
  F_prior.diagonal().array() += m.sigma_v2;
}

// G = F_prior H^T S^{-1}, F_post = F_prior - G H F_prior, S = H F_prior H^T + sigma_w2 I.
// HF and S are scratch.
void riccati_update(const Eigen::MatrixXd& H, double sigma_w2, const Eigen::MatrixXd& F_prior,
                    Eigen::LLT<Eigen::MatrixXd>& llt, Eigen::MatrixXd& HF, Eigen::MatrixXd& S, Eigen::MatrixXd& G,
                    Eigen::MatrixXd& F_post) {
  HF.noalias() = H * F_prior;
  S.noalias() = HF * H.transpose();
  S.diagonal().array() += sigma_w2;
  llt.compute(S);
  if (llt.info() != Eigen::Success) throw std::runtime_error("innovation covariance is not positive definite");
  G = llt.solve(HF).transpose();  // S symmetric, so S^{-1} H F = G^T
  F_post = F_prior;
  F_post.noalias() -= G * HF;
  symmetrize(F_post);
}

}  // namespace

KalmanState initial_filter_state(const SystemModel& model, const Eigen::VectorXd& x0, double initial_covariance) {
  if (x0.size() != model.N()) throw std::invalid_argument("initial state has wrong length");
  KalmanState ks;
  ks.x_hat = x0;
  ks.F = initial_covariance * Eigen::MatrixXd::Identity(model.N(), model.N());
  ks.phase = FilterPhase::updated;
  return ks;
}

KalmanState predict(const SystemModel& model, const KalmanState& ks) {
  if (ks.phase != FilterPhase::updated) throw std::logic_error("predict called on a predicted state");
  KalmanState out;
  out.x_hat = model.A * ks.x_hat;
  riccati_predict(model, ks.F, out.F);
  symmetrize(out.F);
  out.G = ks.G;
  out.phase = FilterPhase::predicted;
  return out;
}

KalmanState update(const SystemModel& model, const KalmanState& ks, const Eigen::VectorXd& y) {
  if (ks.phase != FilterPhase::predicted) throw std::logic_error("update called on an updated state");
  if (y.size() != model.K()) throw std::invalid_argument("measurement has wrong length");
  KalmanState out;
  Eigen::LLT<Eigen::MatrixXd> llt;
  Eigen::MatrixXd HF, S;
  riccati_update(model.H, model.sigma_w2, ks.F, llt, HF, S, out.G, out.F);
  out.x_hat = ks.x_hat + out.G * (y - model.H * ks.x_hat);
  out.phase = FilterPhase::updated;
  return out;
}

double residual_stat(const SystemModel& model, const Eigen::VectorXd& x_hat, const Eigen::VectorXd& y) {
  if (y.size() != model.K() || x_hat.size() != model.N()) throw std::invalid_argument("dimension mismatch");
  return (y - model.H * x_hat).squaredNorm();
}

double partial_residual(const SystemModel& model, const Eigen::VectorXd& x_hat, const Eigen::VectorXd& y,
                        std::span<const Eigen::Index> meters) {
  if (y.size() != model.K() || x_hat.size() != model.N()) throw std::invalid_argument("dimension mismatch");
  double sum = 0.0;
  for (const Eigen::Index k : meters) {
    if (k < 0 || k >= model.K()) throw std::out_of_range("meter index " + std::to_string(k) + " out of range");
    const double r = y(k) - model.H.row(k).dot(x_hat);
    sum += r * r;
  }
  return sum;
}

GainSchedule compute_gain_schedule(const SystemModel& model, double initial_covariance, double tolerance,
                                   int max_steps) {
  const Eigen::Index n = model.N();
  GainSchedule sched;
  Eigen::MatrixXd F = initial_covariance * Eigen::MatrixXd::Identity(n, n);
  Eigen::MatrixXd F_prior(n, n), F_post(n, n), G, HF, S;
  Eigen::LLT<Eigen::MatrixXd> llt;
  for (int i = 0; i < max_steps; ++i) {
    riccati_predict(model, F, F_prior);
    symmetrize(F_prior);
    riccati_update(model.H, model.sigma_w2, F_prior, llt, HF, S, G, F_post);
    const double change = (F_post - F).cwiseAbs().maxCoeff();
    const double scale = F_post.cwiseAbs().maxCoeff();
    sched.gains.push_back(G);
    sched.posterior.push_back(F_post);
    F = F_post;
    if (change <= tolerance * scale) {
      sched.converged = true;
      break;
    }
  }
  return sched;
}

KalmanFilter::KalmanFilter(const SystemModel& model, FilterOptions options,
                           std::shared_ptr<const GainSchedule> schedule)
    : model_(&model), options_(options) {
  if (options_.steady_state && options_.dos != DosHandling::skip) {
    schedule_ = schedule ? std::move(schedule)
                         : std::make_shared<const GainSchedule>(compute_gain_schedule(model, options.initial_covariance));
  }
  const Eigen::Index n = model.N(), k = model.K();
  x_.resize(n);
  x_prior_.resize(n);
  innov_.resize(k);
  resid_.resize(k);
  F_.resize(n, n);
  F_prior_.resize(n, n);
}

void KalmanFilter::reset(const Eigen::VectorXd& x0) {
  if (x0.size() != model_->N()) throw std::invalid_argument("initial state has wrong length");
  x_ = x0;
  x_prior_ = x0;
  F_ = options_.initial_covariance * Eigen::MatrixXd::Identity(model_->N(), model_->N());
  updates_ = 0;
  eta_ = 0.0;
}

void KalmanFilter::full_update(const Eigen::VectorXd& y) {
  riccati_predict(*model_, F_, F_prior_);
  symmetrize(F_prior_);
  riccati_update(model_->H, model_->sigma_w2, F_prior_, llt_, HF_, S_, G_, F_);
  innov_ = y;
  innov_.noalias() -= model_->H * x_prior_;
  x_ = x_prior_;
  x_.noalias() += G_ * innov_;
}

void KalmanFilter::masked_update(const Eigen::VectorXd& y, const Mask& available) {
  const Eigen::Index count = available.count();
  riccati_predict(*model_, F_, F_prior_);
  symmetrize(F_prior_);
  if (count == 0) {
    F_ = F_prior_;
    x_ = x_prior_;
    return;
  }
  Eigen::MatrixXd Hs(count, model_->N());
  Eigen::VectorXd ys(count);
  for (Eigen::Index k = 0, r = 0; k < model_->K(); ++k) {
    if (!available(k)) continue;
    Hs.row(r) = model_->H.row(k);
    ys(r++) = y(k);
  }
  riccati_update(Hs, model_->sigma_w2, F_prior_, llt_, HF_, S_, G_, F_);
  x_ = x_prior_ + G_ * (ys - Hs * x_prior_);
}

void KalmanFilter::step(const Eigen::VectorXd& y, const Mask* available) {
  if (y.size() != model_->K()) throw std::invalid_argument("measurement has wrong length");
  x_prior_.noalias() = model_->A * x_;
  const bool masked = options_.dos == DosHandling::skip && available && !available->all();
  if (masked) {
    masked_update(y, *available);
  } else if (schedule_) {
    const Eigen::MatrixXd& G = schedule_->gain_at(updates_);
    innov_ = y;
    innov_.noalias() -= model_->H * x_prior_;
    x_ = x_prior_;
    x_.noalias() += G * innov_;
  } else {
    full_update(y);
  }
  ++updates_;

  resid_ = y;
  resid_.noalias() -= model_->H * x_;
  if (masked) {
    eta_ = 0.0;
    for (Eigen::Index k = 0; k < resid_.size(); ++k)
      if ((*available)(k)) eta_ += resid_(k) * resid_(k);
  } else {
    eta_ = resid_.squaredNorm();
  }
}

std::vector<double> mse_curve(const SystemModel& model, const Eigen::VectorXd& x0, const AttackScenario& scenario,
                              int horizon, int n_runs, std::uint64_t seed, FilterOptions options) {
  if (scenario.tau != kNever && scenario.kind != AttackKind::none && horizon < scenario.tau)
    throw std::invalid_argument("mse horizon must reach the attack launch time");
  std::vector<double> sum(static_cast<std::size_t>(std::max(horizon, 0)), 0.0);
  if (n_runs <= 0) return sum;
  auto schedule = options.steady_state ? std::make_shared<const GainSchedule>(
                                             compute_gain_schedule(model, options.initial_covariance))
                                       : nullptr;
  KalmanFilter filter(model, options, schedule);
  Eigen::VectorXd x(model.N()), scratch(model.N()), y(model.K());
  KalmanFilter::Mask avail(model.K());
  const double inv_n = 1.0 / static_cast<double>(model.N());
  for (int r = 0; r < n_runs; ++r) {
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(r));
    x = x0;
    filter.reset(x0);
    for (int t = 1; t <= horizon; ++t) {
      step_state_into(model, x, rng, scratch);
      attacked_measurement_into(model, scenario, t, x, rng, y, &avail);
      filter.step(y, &avail);
      sum[static_cast<std::size_t>(t - 1)] += (x - filter.estimate()).squaredNorm() * inv_n;
    }
  }
  for (double& v : sum) v /= n_runs;
  return sum;
}

}  // namespace sgdetect
