#include "sgdetect/rl_detector.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "sgdetect/errors.hpp"
#include "text_io.hpp"

namespace sgdetect {

QTable::QTable(int levels, int window) : rows_(observation_space_size(levels, window)), q_(2 * rows_, 0.0) {
  meta.levels = levels;
  meta.window = window;
}

std::size_t QTable::slot(std::uint64_t o, Action a) const {
  if (o >= rows_) throw std::out_of_range("observation index " + std::to_string(o) + " outside Q-table");
  return static_cast<std::size_t>(2 * o + static_cast<std::uint64_t>(a));
}

void sarsa_update(QTable& q, std::uint64_t o, Action a, double r, std::uint64_t o_next, Action a_next, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  const double target = r + q(o_next, a_next);
  double& cell = q.at(o, a);
  cell += alpha * (target - cell);
}

void sarsa_terminal_update(QTable& q, std::uint64_t o, Action a, double r, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  double& cell = q.at(o, a);
  cell += alpha * (r - cell);
}

Action greedy_action(const QTable& q, std::uint64_t o) {
  return q(o, Action::stop) < q(o, Action::continue_) ? Action::stop : Action::continue_;
}

Action select_action(const QTable& q, std::uint64_t o, double epsilon, Rng& rng) {
  const Action greedy = greedy_action(q, o);
  if (epsilon <= 0.0) return greedy;
  const bool explore = epsilon >= 1.0 || std::bernoulli_distribution(epsilon)(rng);
  if (!explore) return greedy;
  return greedy == Action::stop ? Action::continue_ : Action::stop;
}

std::int64_t TrainConfig::total_episodes() const {
  std::int64_t n = 0;
  for (const auto& s : schedule) n += s.episodes;
  return n;
}

void TrainConfig::validate() const {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha must lie in (0, 1]");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (!(cost > 0.0) || !std::isfinite(cost)) throw std::invalid_argument("delay cost c must be > 0");
  if (horizon < 1) throw std::invalid_argument("episode length T must be >= 1");
  if (window < 1) throw std::invalid_argument("window size M must be >= 1");
  for (const auto& s : schedule) {
    if (s.tau < 1) throw std::invalid_argument("training tau must be >= 1");
    if (s.episodes < 0) throw std::invalid_argument("episode counts must be >= 0");
  }
  if (log_interval < 1) throw std::invalid_argument("log interval must be >= 1");
}

std::vector<TrainingStage> standard_schedule(std::int64_t episodes_per_phase) {
  return {{100, episodes_per_phase, TrainingPhase::fdi_phase}, {1, episodes_per_phase, TrainingPhase::hybrid_phase}};
}

FilteredResiduals::FilteredResiduals(MeasurementStream& stream, KalmanFilter& filter)
    : stream_(&stream), filter_(&filter), y_(filter.model().K()), available_(filter.model().K()) {}

bool FilteredResiduals::next(double& eta) {
  if (!stream_->next(y_, available_)) return false;
  filter_->step(y_, &available_);
  eta = filter_->eta();
  return true;
}

bool ScriptedResiduals::next(double& eta) {
  if (pos_ >= etas_.size()) return false;
  eta = etas_[pos_++];
  return true;
}

namespace {

ObservationWindow warm_window(const QuantizerConfig& quantizer, ResidualSource& source, int window, int warmup) {
  ObservationWindow o(window, quantizer.levels, 1);
  double eta = 0.0;
  for (int i = 0; i < warmup; ++i) {
    if (!source.next(eta)) throw std::runtime_error("residual stream ended during warm-up");
    o.push(quantize(quantizer, eta));
  }
  return o;
}

}  // namespace

EpisodeOutcome run_episode(QTable& q, ResidualSource& source, const QuantizerConfig& quantizer, std::int64_t tau,
                           const TrainConfig& cfg, Rng& rng) {
  ObservationWindow o = warm_window(quantizer, source, cfg.window, cfg.window);
  Action a = Action::continue_;
  HiddenState s = HiddenState::pre_attack;
  EpisodeOutcome out;
  std::int64_t t = 0;
  while (s != HiddenState::terminal && t < cfg.horizon) {
    ++t;
    if (a == Action::stop) {
      s = HiddenState::terminal;
      const double r = t < tau ? 1.0 : 0.0;
      sarsa_terminal_update(q, o.index(), a, r, cfg.alpha);
      out.total_cost += r;
      out.stopped = true;
      out.stop_time = t;
    } else {
      double r = 0.0;
      if (t >= tau) {
        r = cfg.cost;
        s = HiddenState::post_attack;
      }
      double eta = 0.0;
      if (!source.next(eta)) throw std::runtime_error("residual stream ended inside an episode");
      ObservationWindow o_next = o;
      o_next.push(quantize(quantizer, eta));
      const Action a_next = select_action(q, o_next.index(), cfg.epsilon, rng);
      sarsa_update(q, o.index(), a, r, o_next.index(), a_next, cfg.alpha);
      out.total_cost += r;
      o = std::move(o_next);
      a = a_next;
    }
  }
  out.steps = static_cast<int>(t);
  out.final_state = s;
  return out;
}

QTable train(const SystemModel& model, const Eigen::VectorXd& x0, const TrainConfig& cfg,
             const QuantizerConfig& quantizer, std::uint64_t seed, std::vector<TrainLogRecord>* log) {
  cfg.validate();
  QTable q(quantizer.levels, cfg.window);
  q.meta.thresholds = quantizer.thresholds;
  q.meta.cost = cfg.cost;
  q.meta.alpha = cfg.alpha;
  q.meta.epsilon = cfg.epsilon;
  q.meta.horizon = cfg.horizon;
  q.meta.episodes = cfg.total_episodes();
  q.meta.seed = seed;

  const FilterContext ctx = FilterContext::make(model, x0, cfg.filter);
  KalmanFilter filter = ctx.make_filter();
  std::uint64_t episode = 0;
  double running = 0.0, block = 0.0;
  std::int64_t in_block = 0;
  for (const TrainingStage& stage : cfg.schedule) {
    for (std::int64_t i = 0; i < stage.episodes; ++i, ++episode) {
      Rng rng = make_rng(seed, episode);
      AttackScenario scenario = sample_training_scenario(stage.attack, stage.tau, model.K(), rng, cfg.sign_mode);
      SimulatedStream stream(model, std::move(scenario), x0, Rng(rng()), cfg.window);
      filter.reset(x0);
      FilteredResiduals residuals(stream, filter);
      const EpisodeOutcome out = run_episode(q, residuals, quantizer, stage.tau, cfg, rng);
      running += out.total_cost;
      block += out.total_cost;
      ++in_block;
      if (log && (episode + 1) % static_cast<std::uint64_t>(cfg.log_interval) == 0) {
        log->push_back({static_cast<std::int64_t>(episode + 1), std::string(to_string(stage.attack)),
                        block / static_cast<double>(in_block), running / static_cast<double>(episode + 1)});
        block = 0.0;
        in_block = 0;
      }
    }
  }
  return q;
}

StopResult detect_residuals(const QTable& q, const QuantizerConfig& quantizer, ResidualSource& source, int warmup,
                            std::int64_t max_horizon) {
  if (max_horizon < 1) throw std::invalid_argument("max_horizon must be >= 1");
  if (quantizer.levels != q.meta.levels) throw std::invalid_argument("quantizer does not match the Q-table");
  ObservationWindow o = warm_window(quantizer, source, q.meta.window, warmup);
  double eta = 0.0;
  std::int64_t t = 0;
  while (t < max_horizon) {
    if (!source.next(eta)) return {t, false};
    ++t;
    o.push(quantize(quantizer, eta));
    if (greedy_action(q, o.index()) == Action::stop) return {t, true};
  }
  return {max_horizon, false};
}

StopResult detect(const QTable& q, MeasurementStream& stream, const FilterContext& ctx,
                  const QuantizerConfig& quantizer, std::int64_t max_horizon) {
  KalmanFilter filter = ctx.make_filter();
  filter.reset(ctx.x0);
  FilteredResiduals residuals(stream, filter);
  return detect_residuals(q, quantizer, residuals, stream.warmup(), max_horizon);
}

std::uint64_t unvisited_windows(const QTable& q) {
  std::uint64_t n = 0;
  for (std::uint64_t o = 0; o < q.rows(); ++o)
    if (q(o, Action::continue_) == 0.0 && q(o, Action::stop) == 0.0) ++n;
  return n;
}

namespace {

constexpr const char* kMagic = "SGDETECT-QTABLE";
constexpr int kVersion = 1;

// Shortest text that reads back to the same double.
std::string exact(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

}  // namespace

void save_qtable(const std::filesystem::path& path, const QTable& q, const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << kMagic << ' ' << kVersion << '\n';
  for (const auto& c : comments) out << "# " << c << '\n';
  const QTableMeta& m = q.meta;
  out << "levels " << m.levels << '\n';
  out << "window " << m.window << '\n';
  out << "thresholds";
  for (double b : m.thresholds) out << ' ' << exact(b);
  out << '\n';
  out << "cost " << exact(m.cost) << '\n';
  out << "alpha " << exact(m.alpha) << '\n';
  out << "epsilon " << exact(m.epsilon) << '\n';
  out << "horizon " << m.horizon << '\n';
  out << "episodes " << m.episodes << '\n';
  out << "seed " << m.seed << '\n';
  out << "data\n";
  for (std::uint64_t o = 0; o < q.rows(); ++o)
    out << o << ' ' << exact(q(o, Action::continue_)) << ' ' << exact(q(o, Action::stop)) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

QTable load_qtable(const std::filesystem::path& path) {
  std::ifstream in = detail::open_input(path);
  std::string line;
  int lineno = 0;
  auto where = [&] { return path.string() + ":" + std::to_string(lineno); };
  if (!std::getline(in, line)) throw ParseError(path.string() + ": empty Q-table file");
  ++lineno;
  {
    const auto tok = detail::split_ws(detail::trim(line));
    if (tok.size() != 2 || tok[0] != kMagic) throw ParseError(where() + ": not a Q-table file");
    if (detail::to_integer(tok[1], where()) != kVersion) throw ParseError(where() + ": unsupported Q-table version");
  }
  QTableMeta m;
  bool saw_data = false;
  while (!saw_data && std::getline(in, line)) {
    ++lineno;
    const auto s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto tok = detail::split_ws(s);
    const auto key = tok[0];
    auto value = [&]() -> std::string_view {
      if (tok.size() != 2) throw ParseError(where() + ": expected '" + std::string(key) + " <value>'");
      return tok[1];
    };
    if (key == "levels") m.levels = static_cast<int>(detail::to_integer(value(), where()));
    else if (key == "window") m.window = static_cast<int>(detail::to_integer(value(), where()));
    else if (key == "thresholds") {
      for (std::size_t i = 1; i < tok.size(); ++i) m.thresholds.push_back(detail::to_double(tok[i], where()));
    } else if (key == "cost") m.cost = detail::to_double(value(), where());
    else if (key == "alpha") m.alpha = detail::to_double(value(), where());
    else if (key == "epsilon") m.epsilon = detail::to_double(value(), where());
    else if (key == "horizon") m.horizon = static_cast<int>(detail::to_integer(value(), where()));
    else if (key == "episodes") m.episodes = detail::to_integer(value(), where());
    else if (key == "seed") {
      std::uint64_t seed = 0;
      if (!detail::parse_number(value(), seed)) throw ParseError(where() + ": bad seed");
      m.seed = seed;
    } else if (key == "data") saw_data = true;
    else throw ParseError(where() + ": unknown header key '" + std::string(key) + "'");
  }
  if (!saw_data) throw ParseError(path.string() + ": missing 'data' section");
  try {
    (void)m.quantizer();
  } catch (const std::invalid_argument& e) {
    throw ParseError(path.string() + ": invalid quantizer header: " + e.what());
  }
  QTable q(m.levels, m.window);
  q.meta = m;
  std::uint64_t expected = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto tok = detail::split_ws(s);
    if (tok.size() != 3) throw ParseError(where() + ": expected 'index q_continue q_stop'");
    std::uint64_t idx = 0;
    if (!detail::parse_number(tok[0], idx) || idx != expected) throw ParseError(where() + ": rows must be in index order");
    const double qc = detail::to_double(tok[1], where());
    const double qs = detail::to_double(tok[2], where());
    if (!std::isfinite(qc) || !std::isfinite(qs)) throw ParseError(where() + ": non-finite Q value");
    if (idx >= q.rows()) throw ParseError(where() + ": more rows than levels^window");
    q.at(idx, Action::continue_) = qc;
    q.at(idx, Action::stop) = qs;
    ++expected;
  }
  if (expected != q.rows())
    throw ParseError(path.string() + ": expected " + std::to_string(q.rows()) + " rows, found " + std::to_string(expected));
  return q;
}

}  // namespace sgdetect
