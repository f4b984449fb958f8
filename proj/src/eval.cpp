#include "sgdetect/eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace sgdetect {

std::string_view to_string(DetectorKind k) noexcept {
  switch (k) {
    case DetectorKind::rl: return "rl";
    case DetectorKind::euclidean: return "euclidean";
    case DetectorKind::cosine: return "cosine";
  }
  return "?";
}

DetectorKind parse_detector_kind(std::string_view name) {
  if (name == "rl") return DetectorKind::rl;
  if (name == "euclidean") return DetectorKind::euclidean;
  if (name == "cosine") return DetectorKind::cosine;
  throw std::invalid_argument("unknown detector '" + std::string(name) + "'");
}

Detector Detector::rl(std::shared_ptr<const QTable> table, std::string id) {
  if (!table) throw std::invalid_argument("rl detector needs a Q-table");
  Detector d;
  d.kind = DetectorKind::rl;
  d.id = std::move(id);
  d.quantizer = table->meta.quantizer();
  d.table = std::move(table);
  return d;
}

namespace {

Detector threshold_detector(ThresholdKind kind, double thr, PredictionSource source) {
  Detector d;
  d.kind = kind == ThresholdKind::euclidean ? DetectorKind::euclidean : DetectorKind::cosine;
  d.threshold = {kind, thr, source};
  d.threshold.validate();
  d.id = std::string(to_string(kind));
  return d;
}

}  // namespace

Detector Detector::euclidean(double thr, PredictionSource source) {
  return threshold_detector(ThresholdKind::euclidean, thr, source);
}

Detector Detector::cosine(double thr, PredictionSource source) {
  return threshold_detector(ThresholdKind::cosine, thr, source);
}

double Detector::parameter() const { return kind == DetectorKind::rl ? table->meta.cost : threshold.threshold; }

std::int64_t sample_changepoint(Rng& rng, std::optional<double> forced_rho) {
  double rho = 0.0;
  if (forced_rho) {
    rho = *forced_rho;
    if (!(rho > 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in (0, 1]");
  } else {
    rho = std::uniform_real_distribution<double>(kRhoLo, kRhoHi)(rng);
  }
  return std::geometric_distribution<std::int64_t>(rho)(rng) + 1;
}

std::string_view to_string(Outcome o) noexcept {
  switch (o) {
    case Outcome::false_alarm: return "false_alarm";
    case Outcome::detected_in_bound: return "detected_in_bound";
    case Outcome::late: return "late";
    case Outcome::no_stop: return "no_stop";
  }
  return "?";
}

Outcome classify(std::int64_t tau, std::int64_t gamma, bool stopped, std::int64_t bound) {
  if (!stopped) return Outcome::no_stop;
  if (gamma < tau) return Outcome::false_alarm;
  if (gamma - tau <= bound) return Outcome::detected_in_bound;
  return Outcome::late;
}

void EvalConfig::validate() const {
  if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
  if (bound < 0) throw std::invalid_argument("bound must be >= 0");
  if (max_horizon < 1) throw std::invalid_argument("max_horizon must be >= 1");
  if (warmup < 0) throw std::invalid_argument("warmup must be >= 0");
  if (jobs < 1) throw std::invalid_argument("jobs must be >= 1");
}

Scores scores_from_counts(std::int64_t in_bound, std::int64_t false_alarms, std::int64_t missed) {
  auto ratio = [](std::int64_t a, std::int64_t b) { return b > 0 ? static_cast<double>(a) / static_cast<double>(b) : 0.0; };
  Scores s;
  s.precision = ratio(in_bound, in_bound + false_alarms);
  s.recall = ratio(in_bound, in_bound + missed);
  s.fscore = s.precision + s.recall > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
  return s;
}

namespace {

// Neumaier compensated sum.
class Accumulator {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0, comp_ = 0.0;
};

}  // namespace

EvalReport summarize(const std::vector<TrialResult>& trials, std::string detector, std::string scenario,
                     double parameter) {
  EvalReport r;
  r.detector = std::move(detector);
  r.scenario = std::move(scenario);
  r.parameter = parameter;
  r.n = static_cast<std::int64_t>(trials.size());
  Accumulator delay, delay_cond;
  std::int64_t n_cond = 0;
  for (const TrialResult& t : trials) {
    switch (t.outcome) {
      case Outcome::false_alarm: ++r.false_alarms; break;
      case Outcome::detected_in_bound: ++r.in_bound; break;
      case Outcome::late: ++r.late; break;
      case Outcome::no_stop: ++r.no_stop; break;
    }
    const double d = static_cast<double>(std::max<std::int64_t>(t.gamma - t.tau, 0));
    delay.add(d);
    if (t.outcome != Outcome::false_alarm) {
      delay_cond.add(d);
      ++n_cond;
    }
  }
  if (r.n > 0) {
    r.pfa = static_cast<double>(r.false_alarms) / static_cast<double>(r.n);
    r.add = delay.value() / static_cast<double>(r.n);
  }
  if (n_cond > 0) r.add_conditional = delay_cond.value() / static_cast<double>(n_cond);
  r.scores = scores_from_counts(r.in_bound, r.false_alarms, r.late + r.no_stop);
  return r;
}

namespace {

struct RlRunner {
  std::size_t index;
  const Detector* det;
  ObservationWindow window;
  bool decided = false;
};

// Threshold detectors sharing a statistic, tracked together.
struct ThresholdGroup {
  ThresholdKind kind;
  PredictionSource source;
  std::vector<std::size_t> indices;
  std::vector<double> thresholds;
  std::optional<CrossingTracker> tracker;
};

// Runs all detectors on one trial with an already constructed filter.
std::vector<TrialResult> run_trial_with(const std::vector<Detector>& detectors, const AttackScenario& scenario,
                                        const FilterContext& ctx, const EvalConfig& cfg, std::uint64_t seed,
                                        std::uint64_t trial_index, KalmanFilter& filter) {
  Rng rng = make_rng(seed, trial_index);
  const std::int64_t tau = sample_changepoint(rng, cfg.forced_rho);
  AttackScenario s = scenario.kind == AttackKind::none ? scenario : scenario.with_tau(tau);
  if (s.params.sign_mode == SignMode::per_episode && s.kind != AttackKind::none)
    draw_episode_signs(s.params, ctx.model->K(), rng);
  SimulatedStream stream(*ctx.model, std::move(s), ctx.x0, Rng(rng()), cfg.warmup);
  filter.reset(ctx.x0);

  std::vector<StopResult> results(detectors.size(), StopResult{cfg.max_horizon, false});
  std::vector<RlRunner> rl;
  std::vector<ThresholdGroup> groups;
  for (std::size_t i = 0; i < detectors.size(); ++i) {
    const Detector& d = detectors[i];
    if (d.kind == DetectorKind::rl) {
      rl.push_back({i, &d, ObservationWindow(d.table->meta.window, d.quantizer.levels, 1)});
      continue;
    }
    auto g = std::find_if(groups.begin(), groups.end(), [&](const ThresholdGroup& x) {
      return x.kind == d.threshold.kind && x.source == d.threshold.source;
    });
    if (g == groups.end()) g = groups.insert(groups.end(), ThresholdGroup{d.threshold.kind, d.threshold.source, {}, {}, {}});
    g->indices.push_back(i);
    g->thresholds.push_back(d.threshold.threshold);
  }
  for (auto& g : groups) g.tracker.emplace(g.kind, g.thresholds);

  const auto& H = ctx.model->H;
  const Eigen::Index K = ctx.model->K();
  Eigen::VectorXd y(K), y_hat(K), ym(K);
  MeasurementStream::Mask available(K);
  const bool skip = filter.options().dos == DosHandling::skip;
  auto next = [&] {
    if (!stream.next(y, available)) throw std::logic_error("simulated stream ended");
    filter.step(y, &available);
  };
  for (int i = 0; i < cfg.warmup; ++i) {
    next();
    for (auto& r : rl) r.window.push(quantize(r.det->quantizer, filter.eta()));
  }
  std::size_t rl_open = rl.size();
  auto open = [&] {
    if (rl_open > 0) return true;
    for (const auto& g : groups)
      if (!g.tracker->done()) return true;
    return false;
  };
  for (std::int64_t t = 1; t <= cfg.max_horizon && open(); ++t) {
    next();
    for (auto& r : rl) {
      if (r.decided) continue;
      r.window.push(quantize(r.det->quantizer, filter.eta()));
      if (greedy_action(*r.det->table, r.window.index()) == Action::stop) {
        r.decided = true;
        results[r.index] = {t, true};
        --rl_open;
      }
    }
    for (auto& g : groups) {
      if (g.tracker->done()) continue;
      y_hat.noalias() = H * (g.source == PredictionSource::posterior ? filter.estimate() : filter.prior_estimate());
      ym = y;
      if (skip && !available.all()) {
        for (Eigen::Index k = 0; k < K; ++k)
          if (!available[k]) ym[k] = y_hat[k] = 0.0;
      }
      g.tracker->observe(t, g.kind == ThresholdKind::euclidean ? euclidean_statistic(ym, y_hat)
                                                               : cosine_similarity(ym, y_hat));
    }
  }
  for (const auto& g : groups) {
    const auto rs = g.tracker->results(cfg.max_horizon);
    for (std::size_t j = 0; j < g.indices.size(); ++j) results[g.indices[j]] = rs[j];
  }

  std::vector<TrialResult> out;
  out.reserve(detectors.size());
  for (const auto& r : results) out.push_back({tau, r.gamma, r.stopped, classify(tau, r.gamma, r.stopped, cfg.bound)});
  return out;
}

void check_detectors(const std::vector<Detector>& detectors, const FilterContext& ctx) {
  if (detectors.empty()) throw std::invalid_argument("no detectors to evaluate");
  if (!ctx.model) throw std::invalid_argument("filter context has no model");
  for (const Detector& d : detectors) {
    if (d.kind == DetectorKind::rl && !d.table) throw std::invalid_argument("rl detector without a Q-table");
    if (d.kind != DetectorKind::rl) d.threshold.validate();
  }
}

// results[i] holds the per-detector outcomes of trial i.
std::vector<std::vector<TrialResult>> run_trials(const std::vector<Detector>& detectors,
                                                 const AttackScenario& scenario, const FilterContext& ctx,
                                                 const EvalConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  check_detectors(detectors, ctx);
  const auto n = static_cast<std::size_t>(cfg.n_trials);
  std::vector<std::vector<TrialResult>> results(n);
  const unsigned jobs = std::min<unsigned>(cfg.jobs, static_cast<unsigned>(std::min<std::size_t>(n, 1024)));
  auto work = [&](unsigned worker) {
    KalmanFilter filter = ctx.make_filter();
    for (std::size_t i = worker; i < n; i += jobs)
      results[i] = run_trial_with(detectors, scenario, ctx, cfg, seed, i, filter);
  };
  if (jobs <= 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(jobs);
    for (unsigned w = 0; w < jobs; ++w)
      pool.emplace_back([&, w] {
        try {
          work(w);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    pool.clear();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }
  return results;
}

}  // namespace

std::vector<TrialResult> run_trial(const std::vector<Detector>& detectors, const AttackScenario& scenario,
                                   const FilterContext& ctx, const EvalConfig& cfg, std::uint64_t seed,
                                   std::uint64_t trial_index) {
  cfg.validate();
  check_detectors(detectors, ctx);
  KalmanFilter filter = ctx.make_filter();
  return run_trial_with(detectors, scenario, ctx, cfg, seed, trial_index, filter);
}

std::vector<EvalReport> evaluate(const std::vector<Detector>& detectors, const AttackScenario& scenario,
                                 std::string_view scenario_name, const FilterContext& ctx, const EvalConfig& cfg,
                                 std::uint64_t seed) {
  const auto results = run_trials(detectors, scenario, ctx, cfg, seed);
  std::vector<EvalReport> reports;
  std::vector<TrialResult> column(results.size());
  for (std::size_t d = 0; d < detectors.size(); ++d) {
    for (std::size_t i = 0; i < results.size(); ++i) column[i] = results[i][d];
    reports.push_back(summarize(column, detectors[d].id, std::string(scenario_name), detectors[d].parameter()));
  }
  return reports;
}

FalseAlarmPeriod false_alarm_period(const Detector& detector, const FilterContext& ctx, const EvalConfig& cfg,
                                    std::uint64_t seed) {
  const auto results = run_trials({detector}, AttackScenario{}, ctx, cfg, seed);
  FalseAlarmPeriod p;
  p.n = static_cast<std::int64_t>(results.size());
  Accumulator sum;
  std::int64_t censored = 0;
  for (const auto& r : results) {
    sum.add(static_cast<double>(r[0].stopped ? r[0].gamma : cfg.max_horizon));
    if (!r[0].stopped) ++censored;
  }
  p.mean = sum.value() / static_cast<double>(p.n);
  p.censored_fraction = static_cast<double>(censored) / static_cast<double>(p.n);
  return p;
}

std::vector<CurvePoint> tradeoff_curve(const std::vector<EvalReport>& reports) {
  std::vector<CurvePoint> pts;
  pts.reserve(reports.size());
  for (const auto& r : reports) pts.push_back({r.pfa, r.add, r.add, r.parameter, r.detector});
  std::stable_sort(pts.begin(), pts.end(), [](const CurvePoint& a, const CurvePoint& b) {
    return a.pfa < b.pfa || (a.pfa == b.pfa && a.add < b.add);
  });
  for (std::size_t i = 1; i < pts.size(); ++i) pts[i].add_monotone = std::min(pts[i].add, pts[i - 1].add_monotone);
  return pts;
}

std::vector<double> nominal_residuals(const FilterContext& ctx, std::int64_t n_steps, std::uint64_t seed) {
  if (n_steps < 1) throw std::invalid_argument("need at least one nominal step");
  SimulatedStream stream(*ctx.model, AttackScenario{}, ctx.x0, make_rng(seed, 0), 0);
  KalmanFilter filter = ctx.make_filter();
  filter.reset(ctx.x0);
  FilteredResiduals residuals(stream, filter);
  std::vector<double> etas(static_cast<std::size_t>(n_steps));
  for (double& eta : etas) residuals.next(eta);
  return etas;
}

std::vector<double> nominal_threshold_grid(ThresholdKind kind, PredictionSource source, const FilterContext& ctx,
                                           int n_points, std::int64_t n_steps, std::uint64_t seed) {
  if (n_points < 1) throw std::invalid_argument("grid needs at least one point");
  if (n_steps < 1) throw std::invalid_argument("grid needs at least one nominal step");
  SimulatedStream stream(*ctx.model, AttackScenario{}, ctx.x0, make_rng(seed, 0), 0);
  KalmanFilter filter = ctx.make_filter();
  filter.reset(ctx.x0);
  FilteredPredictions pred(stream, filter, source);
  Eigen::VectorXd y, y_hat;
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(n_steps));
  for (std::int64_t i = 0; i < n_steps; ++i) {
    pred.next(y, y_hat);
    const double v = kind == ThresholdKind::euclidean ? euclidean_statistic(y, y_hat) : 1.0 - cosine_similarity(y, y_hat);
    stats.push_back(v);
  }
  auto mid = stats.begin() + static_cast<std::ptrdiff_t>(stats.size() / 2);
  std::nth_element(stats.begin(), mid, stats.end());
  double lo = std::max(*mid, 1e-15);
  // Evaluation runs far more steps than the calibration sample, so the top
  // extends past the observed maximum.
  double hi = 2.0 * *std::max_element(stats.begin(), stats.end());
  if (!(hi > lo)) hi = lo * 2.0;
  std::vector<double> grid;
  for (int i = 0; i < n_points; ++i) {
    const double f = n_points == 1 ? 0.0 : static_cast<double>(i) / (n_points - 1);
    const double v = lo * std::pow(hi / lo, f);
    grid.push_back(kind == ThresholdKind::euclidean ? v : std::clamp(1.0 - v, -1.0, 1.0));
  }
  return grid;
}

}  // namespace sgdetect
