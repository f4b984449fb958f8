#include "sgdetect/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>

#include "config.hpp"
#include "sgdetect/errors.hpp"
#include "sgdetect/eval.hpp"
#include "sgdetect/grid_model.hpp"
#include "sgdetect/observation.hpp"
#include "sgdetect/rl_detector.hpp"
#include "text_io.hpp"

namespace sgdetect {

namespace fs = std::filesystem;

namespace {

struct Options {
  fs::path config;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> out;
  std::optional<unsigned> jobs;
};

// Everything a subcommand needs, resolved once.
struct Run {
  Config cfg;
  std::uint64_t seed = 0;
  fs::path out_dir;
  unsigned jobs = 1;
  std::ostream* out = nullptr;

  std::string header() const {
    char buf[96];
    std::snprintf(buf, sizeof buf, "# config_hash=%016llx seed=%llu", static_cast<unsigned long long>(cfg.hash()),
                  static_cast<unsigned long long>(seed));
    return buf;
  }
  fs::path artifact(const std::string& name) const { return out_dir / name; }
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_artifact(const fs::path& p) {
  std::ofstream f(p);
  if (!f) throw Error("cannot write " + p.string());
  return f;
}

std::string seed_tag(std::uint64_t seed) { return "s" + std::to_string(seed); }

LoadedSystem load_model(const Config& cfg) { return load_system(cfg.path("model.file"), cfg.path("model.x0")); }

FilterOptions filter_options(const Config& cfg) {
  FilterOptions o;
  o.steady_state = cfg.flag_or("filter.steady_state", true);
  const std::string dos = cfg.text_or("filter.dos", "zeros");
  if (dos == "zeros") o.dos = DosHandling::zeros;
  else if (dos == "skip") o.dos = DosHandling::skip;
  else throw ConfigError("filter.dos must be 'zeros' or 'skip'");
  o.initial_covariance = cfg.number_or("filter.initial_covariance", kInitialCovariance);
  if (!(o.initial_covariance > 0.0)) throw ConfigError("filter.initial_covariance must be > 0");
  return o;
}

std::vector<double> quantile_list(const Config& cfg) {
  return cfg.has("quantizer.quantiles") ? cfg.numbers("quantizer.quantiles") : kDefaultCalibrationQuantiles;
}

QuantizerConfig quantizer_from(const Run& run, const FilterContext& ctx) {
  const auto levels = static_cast<int>(run.cfg.integer_or("quantizer.levels", 4));
  if (run.cfg.has("quantizer.thresholds")) return QuantizerConfig::make(levels, run.cfg.numbers("quantizer.thresholds"));
  const auto steps = run.cfg.integer_or("quantizer.calibration_steps", 100000);
  const auto etas = nominal_residuals(ctx, steps, derive_seed(run.seed, 0xca11b));
  const auto q = quantile_list(run.cfg);
  return calibrate_thresholds(etas, levels, q);
}

std::vector<std::pair<int, int>> parse_lines(const std::string& key, const std::string& value) {
  std::vector<std::pair<int, int>> out;
  for (auto tok : detail::split_ws(value)) {
    const auto dash = tok.find('-');
    long long a = 0, b = 0;
    if (dash == std::string_view::npos || !detail::parse_number(tok.substr(0, dash), a) ||
        !detail::parse_number(tok.substr(dash + 1), b))
      throw ConfigError(key + ": lines are written as bus-bus, e.g. 9-10");
    out.emplace_back(static_cast<int>(a), static_cast<int>(b));
  }
  return out;
}

AttackScenario scenario_from(const Config& cfg, const std::string& name, const SystemModel& model) {
  const std::string pre = "scenario." + name + ".";
  if (!cfg.has(pre + "kind")) throw ConfigError("scenario '" + name + "' has no " + pre + "kind");
  AttackScenario s;
  s.kind = parse_attack_kind(cfg.text(pre + "kind"));
  s.tau = cfg.integer_or(pre + "tau", s.kind == AttackKind::none ? kNever : 1);
  AttackParams& p = s.params;
  p.fdi_lo = cfg.number_or(pre + "fdi_lo", 0.0);
  p.fdi_hi = cfg.number_or(pre + "fdi_hi", 0.0);
  p.sign_mode = parse_sign_mode(cfg.text_or(pre + "sign_mode", "uniform"));
  if (p.sign_mode == SignMode::per_episode) p.signs.assign(static_cast<std::size_t>(model.K()), 1);
  p.stealth_lo = cfg.number_or(pre + "stealth_lo", 0.0);
  p.stealth_hi = cfg.number_or(pre + "stealth_hi", 0.0);
  p.jam_var_lo = cfg.number_or(pre + "jam_var_lo", 0.0);
  p.jam_var_hi = cfg.number_or(pre + "jam_var_hi", 0.0);
  p.corr_entry_var = cfg.number_or(pre + "corr_entry_var", 0.0);
  p.availability = cfg.number_or(pre + "availability", 1.0);
  if (cfg.has(pre + "removed_lines")) p.removed_lines = parse_lines(pre + "removed_lines", cfg.text(pre + "removed_lines"));
  return prepare_scenario(model, std::move(s));
}

std::vector<TrainingStage> schedule_from(const Config& cfg) {
  if (!cfg.has("train.schedule")) return standard_schedule(cfg.integer_or("train.episodes", 400000));
  std::vector<TrainingStage> out;
  // tau:episodes:phase entries
  for (const auto& tok : cfg.words("train.schedule")) {
    const auto a = tok.find(':'), b = tok.rfind(':');
    long long tau = 0;
    double episodes = 0;
    if (a == std::string::npos || a == b || !detail::parse_number(std::string_view(tok).substr(0, a), tau) ||
        !detail::parse_number(std::string_view(tok).substr(a + 1, b - a - 1), episodes))
      throw ConfigError("train.schedule entries are tau:episodes:phase, got '" + tok + "'");
    out.push_back({tau, static_cast<std::int64_t>(episodes), parse_training_phase(tok.substr(b + 1))});
  }
  return out;
}

TrainConfig train_config_from(const Config& cfg) {
  TrainConfig t;
  t.alpha = cfg.number_or("train.alpha", t.alpha);
  t.epsilon = cfg.number_or("train.epsilon", t.epsilon);
  t.cost = cfg.number_or("train.cost", t.cost);
  t.horizon = static_cast<int>(cfg.integer_or("train.horizon", t.horizon));
  t.window = static_cast<int>(cfg.integer_or("train.window", t.window));
  t.schedule = schedule_from(cfg);
  t.sign_mode = parse_sign_mode(cfg.text_or("train.sign_mode", std::string(to_string(t.sign_mode))));
  t.log_interval = static_cast<int>(cfg.integer_or("train.log_interval", t.log_interval));
  t.filter = filter_options(cfg);
  t.validate();
  return t;
}

std::string cost_tag(double c) {
  std::string s = fmt(c);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

fs::path default_table_name(const TrainConfig& t) { return "qtable_c" + cost_tag(t.cost) + ".qtable"; }

// Config-relative first, then the output directory (where `train` writes).
fs::path resolve_input(const Run& run, const std::string& value) {
  fs::path p = value;
  if (p.is_absolute()) return p;
  const fs::path a = run.cfg.base_dir() / p;
  if (fs::exists(a)) return a;
  const fs::path b = run.out_dir / p;
  if (fs::exists(b)) return b;
  throw MissingFileError(a);
}

EvalConfig eval_config_from(const Run& run) {
  EvalConfig e;
  e.n_trials = run.cfg.integer_or("eval.n_trials", 10000);
  e.bound = run.cfg.integer_or("eval.bound", 10);
  e.max_horizon = run.cfg.integer_or("eval.max_horizon", 40000);
  e.warmup = static_cast<int>(run.cfg.integer_or("eval.warmup", run.cfg.integer_or("train.window", 4)));
  e.jobs = run.jobs;
  e.validate();
  return e;
}

std::string detector_label(const fs::path& table_path) { return "rl:" + table_path.stem().string(); }

std::vector<Detector> rl_detectors(const Run& run) {
  std::vector<Detector> out;
  if (!run.cfg.has("eval.tables")) throw ConfigError("rl detector requested but eval.tables is not set");
  for (const auto& name : run.cfg.words("eval.tables")) {
    const fs::path p = resolve_input(run, name);
    out.push_back(Detector::rl(std::make_shared<const QTable>(load_qtable(p)), detector_label(p)));
  }
  return out;
}

std::vector<double> thresholds_for(const Run& run, ThresholdKind kind, PredictionSource source,
                                   const FilterContext& ctx) {
  const std::string key = kind == ThresholdKind::euclidean ? "eval.euclidean_thresholds" : "eval.cosine_thresholds";
  if (!run.cfg.has(key)) throw ConfigError(std::string(to_string(kind)) + " detector requested but " + key + " is not set");
  if (run.cfg.text(key) == "auto") {
    const int points = static_cast<int>(run.cfg.integer_or("eval.grid_points", 40));
    const auto steps = run.cfg.integer_or("eval.grid_steps", 100000);
    return nominal_threshold_grid(kind, source, ctx, points, steps, derive_seed(run.seed, 0x6a1d));
  }
  return run.cfg.numbers(key);
}

// Detector families in config order; each family is a list of detectors.
std::vector<std::pair<std::string, std::vector<Detector>>> detector_families(const Run& run, const FilterContext& ctx) {
  const auto source = parse_prediction_source(run.cfg.text_or("eval.prediction_source", "posterior"));
  std::vector<std::pair<std::string, std::vector<Detector>>> out;
  for (const auto& name : run.cfg.words("eval.detectors")) {
    const DetectorKind kind = parse_detector_kind(name);
    std::vector<Detector> ds;
    if (kind == DetectorKind::rl) {
      ds = rl_detectors(run);
    } else {
      const ThresholdKind tk = kind == DetectorKind::euclidean ? ThresholdKind::euclidean : ThresholdKind::cosine;
      for (double thr : thresholds_for(run, tk, source, ctx))
        ds.push_back(tk == ThresholdKind::euclidean ? Detector::euclidean(thr, source) : Detector::cosine(thr, source));
    }
    out.emplace_back(name, std::move(ds));
  }
  if (out.empty()) throw ConfigError("eval.detectors is empty");
  return out;
}

void write_report_header(std::ostream& f, const Run& run) {
  f << run.header() << '\n'
    << "detector,scenario,pfa,add,precision,recall,fscore,n,add_conditional,censored,parameter\n";
}

void write_report_row(std::ostream& f, const EvalReport& r) {
  f << r.detector << ',' << r.scenario << ',' << fmt(r.pfa) << ',' << fmt(r.add) << ',' << fmt(r.scores.precision)
    << ',' << fmt(r.scores.recall) << ',' << fmt(r.scores.fscore) << ',' << r.n << ',' << fmt(r.add_conditional)
    << ',' << r.no_stop << ',' << fmt(r.parameter) << '\n';
}

void print_report(std::ostream& out, const EvalReport& r) {
  out << r.scenario << ' ' << r.detector << " param=" << fmt(r.parameter) << " pfa=" << fmt(r.pfa)
      << " add=" << fmt(r.add) << " precision=" << fmt(r.scores.precision) << " recall=" << fmt(r.scores.recall)
      << " fscore=" << fmt(r.scores.fscore) << " n=" << r.n << '\n';
}

// --- subcommands ---

int cmd_calibrate(const Run& run) {
  const auto sys = load_model(run.cfg);
  const auto ctx = FilterContext::make(sys.model, sys.x0, filter_options(run.cfg));
  const auto levels = static_cast<int>(run.cfg.integer_or("quantizer.levels", 4));
  const auto steps = run.cfg.integer_or("quantizer.calibration_steps", 100000);
  const auto quantiles = quantile_list(run.cfg);
  const auto etas = nominal_residuals(ctx, steps, derive_seed(run.seed, 0xca11b));
  const auto q = calibrate_thresholds(etas, levels, quantiles);
  const fs::path path = run.artifact("calibration_" + seed_tag(run.seed) + ".csv");
  auto f = open_artifact(path);
  f << run.header() << '\n' << "level,quantile,threshold\n";
  for (std::size_t i = 0; i < q.thresholds.size(); ++i)
    f << i + 1 << ',' << fmt(quantiles[i]) << ',' << fmt(q.thresholds[i]) << '\n';
  *run.out << "calibrate: " << steps << " nominal steps, thresholds";
  for (double b : q.thresholds) *run.out << ' ' << fmt(b);
  *run.out << " -> " << path.string() << '\n';
  return kExitOk;
}

int cmd_train(const Run& run) {
  const auto sys = load_model(run.cfg);
  const TrainConfig t = train_config_from(run.cfg);
  const auto ctx = FilterContext::make(sys.model, sys.x0, t.filter);
  const QuantizerConfig q = quantizer_from(run, ctx);
  std::vector<TrainLogRecord> log;
  const QTable table = train(sys.model, sys.x0, t, q, run.seed, &log);
  const fs::path name = run.cfg.has("train.table") ? fs::path(run.cfg.text("train.table")) : default_table_name(t);
  const fs::path path = name.is_absolute() ? name : run.artifact(name.string());
  save_qtable(path, table, {run.header().substr(2)});
  const fs::path log_path = run.artifact(path.stem().string() + "_trainlog.csv");
  auto f = open_artifact(log_path);
  f << run.header() << '\n' << "episode,stage,block_mean_cost,running_mean_cost\n";
  for (const auto& r : log)
    f << r.episode << ',' << r.stage << ',' << fmt(r.block_mean_cost) << ',' << fmt(r.running_mean_cost) << '\n';
  *run.out << "train: " << t.total_episodes() << " episodes, c=" << fmt(t.cost) << ", "
           << unvisited_windows(table) << " of " << table.rows() << " windows unvisited -> " << path.string() << '\n';
  return kExitOk;
}

int cmd_detect(const Run& run) {
  const auto sys = load_model(run.cfg);
  const auto ctx = FilterContext::make(sys.model, sys.x0, filter_options(run.cfg));
  const QTable table = load_qtable(resolve_input(run, run.cfg.text("detect.table")));
  const QuantizerConfig q = table.meta.quantizer();
  const auto horizon = run.cfg.integer_or("detect.max_horizon", 40000);
  const int warmup = static_cast<int>(run.cfg.integer_or("detect.warmup", table.meta.window));
  StopResult r;
  std::string source;
  if (run.cfg.has("detect.input")) {
    const fs::path in = resolve_input(run, run.cfg.text("detect.input"));
    RecordedStream stream(read_measurement_rows(in, sys.model.K()), warmup);
    r = detect(table, stream, ctx, q, horizon);
    source = in.filename().string();
  } else {
    const std::string name = run.cfg.text_or("detect.scenario", "");
    AttackScenario s = name.empty() ? AttackScenario{} : scenario_from(run.cfg, name, sys.model);
    if (run.cfg.has("detect.tau")) s = s.with_tau(run.cfg.integer("detect.tau"));
    SimulatedStream stream(sys.model, s, sys.x0, make_rng(run.seed, 0), warmup);
    r = detect(table, stream, ctx, q, horizon);
    source = name.empty() ? "nominal" : name;
  }
  const fs::path path = run.artifact("detect_" + seed_tag(run.seed) + ".csv");
  auto f = open_artifact(path);
  f << run.header() << '\n' << "source,gamma,stopped\n" << source << ',' << r.gamma << ',' << (r.stopped ? 1 : 0) << '\n';
  *run.out << "detect: " << source << (r.stopped ? " alarm at t=" : " no alarm up to t=") << r.gamma << '\n';
  return kExitOk;
}

int cmd_evaluate(const Run& run) {
  const auto sys = load_model(run.cfg);
  const auto ctx = FilterContext::make(sys.model, sys.x0, filter_options(run.cfg));
  const EvalConfig e = eval_config_from(run);
  std::vector<Detector> all;
  for (auto& [name, ds] : detector_families(run, ctx)) all.insert(all.end(), ds.begin(), ds.end());
  const fs::path path = run.artifact("report_" + seed_tag(run.seed) + ".csv");
  auto f = open_artifact(path);
  write_report_header(f, run);
  for (const auto& name : run.cfg.words("eval.scenarios")) {
    const AttackScenario s = scenario_from(run.cfg, name, sys.model);
    for (const auto& r : evaluate(all, s, name, ctx, e, run.seed)) {
      write_report_row(f, r);
      print_report(*run.out, r);
    }
  }
  if (run.cfg.has("eval.false_alarm_trials")) {
    EvalConfig fe = e;
    fe.n_trials = run.cfg.integer("eval.false_alarm_trials");
    fe.validate();
    const fs::path fpath = run.artifact("false_alarm_period_" + seed_tag(run.seed) + ".csv");
    auto g = open_artifact(fpath);
    g << run.header() << '\n' << "detector,parameter,mean_period,censored_fraction,n,max_horizon\n";
    for (const auto& d : all) {
      const auto p = false_alarm_period(d, ctx, fe, derive_seed(run.seed, 0xfa));
      g << d.id << ',' << fmt(d.parameter()) << ',' << fmt(p.mean) << ',' << fmt(p.censored_fraction) << ',' << p.n
        << ',' << fe.max_horizon << '\n';
      *run.out << "false-alarm period " << d.id << " param=" << fmt(d.parameter()) << ": " << fmt(p.mean)
               << " (censored " << fmt(p.censored_fraction) << ")\n";
    }
  }
  *run.out << "evaluate: report -> " << path.string() << '\n';
  return kExitOk;
}

int cmd_sweep(const Run& run) {
  const auto sys = load_model(run.cfg);
  const auto ctx = FilterContext::make(sys.model, sys.x0, filter_options(run.cfg));
  const EvalConfig e = eval_config_from(run);
  const auto families = detector_families(run, ctx);
  std::vector<Detector> all;
  for (const auto& [name, ds] : families) all.insert(all.end(), ds.begin(), ds.end());
  for (const auto& scen : run.cfg.words("eval.scenarios")) {
    const AttackScenario s = scenario_from(run.cfg, scen, sys.model);
    const auto reports = evaluate(all, s, scen, ctx, e, run.seed);
    const fs::path rpath = run.artifact("sweep_" + scen + "_" + seed_tag(run.seed) + ".csv");
    auto rf = open_artifact(rpath);
    write_report_header(rf, run);
    for (const auto& r : reports) write_report_row(rf, r);
    std::size_t at = 0;
    for (const auto& [name, ds] : families) {
      const std::vector<EvalReport> part(reports.begin() + static_cast<std::ptrdiff_t>(at),
                                         reports.begin() + static_cast<std::ptrdiff_t>(at + ds.size()));
      at += ds.size();
      const fs::path cpath = run.artifact("curve_" + name + "_" + scen + "_" + seed_tag(run.seed) + ".csv");
      auto cf = open_artifact(cpath);
      cf << run.header() << '\n' << "pfa,add,add_monotone,param\n";
      for (const auto& p : tradeoff_curve(part))
        cf << fmt(p.pfa) << ',' << fmt(p.add) << ',' << fmt(p.add_monotone) << ',' << fmt(p.parameter) << '\n';
      *run.out << "sweep: " << scen << ' ' << name << ' ' << part.size() << " points -> " << cpath.string() << '\n';
    }
  }
  return kExitOk;
}

int cmd_mse(const Run& run) {
  const auto sys = load_model(run.cfg);
  const FilterOptions fo = filter_options(run.cfg);
  const int horizon = static_cast<int>(run.cfg.integer_or("mse.horizon", 200));
  const int runs = static_cast<int>(run.cfg.integer_or("mse.runs", 200));
  for (const auto& name : run.cfg.words("mse.scenarios")) {
    AttackScenario s = scenario_from(run.cfg, name, sys.model);
    if (run.cfg.has("mse.tau")) s = s.with_tau(run.cfg.integer("mse.tau"));
    const auto curve = mse_curve(sys.model, sys.x0, s, horizon, runs, run.seed, fo);
    const fs::path path = run.artifact("mse_" + name + "_" + seed_tag(run.seed) + ".csv");
    auto f = open_artifact(path);
    f << run.header() << '\n' << "t,mse\n";
    for (std::size_t t = 0; t < curve.size(); ++t) f << t + 1 << ',' << fmt(curve[t]) << '\n';
    *run.out << "mse-demo: " << name << " -> " << path.string() << '\n';
  }
  return kExitOk;
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Online cyber-attack detection for power-grid state estimation"};
  app.require_subcommand(1);
  Options opt;
  std::string command;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"calibrate", "Calibrate quantizer thresholds from nominal residuals"},
      {"train", "Train a Q-table with SARSA"},
      {"detect", "Run online detection with a trained table"},
      {"evaluate", "Monte Carlo evaluation of detectors"},
      {"sweep", "Tradeoff curves over detector parameters"},
      {"mse-demo", "State estimation error under attack"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "Configuration file")->required();
    sub->add_option("--seed", opt.seed, "Master seed (overrides run.seed)");
    sub->add_option("--out", opt.out, "Output directory");
    sub->add_option("--jobs", opt.jobs, "Worker threads for evaluation")->check(CLI::PositiveNumber);
    sub->callback([&command, name = name] { command = name; });
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << "run with --help for usage\n";
    return kExitUsage;
  }

  try {
    Run run;
    run.out = &out;
    run.cfg = Config::load(opt.config);
    run.seed = opt.seed ? *opt.seed : static_cast<std::uint64_t>(run.cfg.integer_or("run.seed", 1));
    run.jobs = opt.jobs ? *opt.jobs : static_cast<unsigned>(run.cfg.integer_or("run.jobs", 1));
    if (opt.out) run.out_dir = *opt.out;
    else if (const char* env = std::getenv("SGDETECT_OUT"); env && *env) run.out_dir = env;
    else if (run.cfg.has("run.out")) run.out_dir = run.cfg.path("run.out");
    else run.out_dir = "out";
    fs::create_directories(run.out_dir);

    if (command == "calibrate") return cmd_calibrate(run);
    if (command == "train") return cmd_train(run);
    if (command == "detect") return cmd_detect(run);
    if (command == "evaluate") return cmd_evaluate(run);
    if (command == "sweep") return cmd_sweep(run);
    return cmd_mse(run);
  } catch (const MissingFileError& e) {
    err << "error: " << e.what() << '\n';
    return kExitMissingFile;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    err << "error: invalid configuration: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace sgdetect
