#include "sgdetect/simulation.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

#include "text_io.hpp"

namespace sgdetect {

SimulatedStream::SimulatedStream(const SystemModel& model, AttackScenario scenario, const Eigen::VectorXd& x0,
                                 Rng rng, int warmup)
    : model_(&model), scenario_(std::move(scenario)), x_(x0), scratch_(x0.size()), rng_(rng), warmup_(warmup),
      t_(-static_cast<std::int64_t>(warmup)) {
  if (warmup < 0) throw std::invalid_argument("warm-up length must be >= 0");
  if (x0.size() != model.N()) throw std::invalid_argument("initial state has wrong length");
}

bool SimulatedStream::next(Eigen::VectorXd& y, Mask& available) {
  ++t_;
  step_state_into(*model_, x_, rng_, scratch_);
  if (y.size() != model_->K()) y.resize(model_->K());
  attacked_measurement_into(*model_, scenario_, t_, x_, rng_, y, &available);
  return true;
}

RecordedStream::RecordedStream(std::vector<Eigen::VectorXd> rows, int warmup)
    : rows_(std::move(rows)), warmup_(warmup) {
  if (warmup < 0) throw std::invalid_argument("warm-up length must be >= 0");
}

bool RecordedStream::next(Eigen::VectorXd& y, Mask& available) {
  if (pos_ >= rows_.size()) return false;
  y = rows_[pos_++];
  available.setConstant(y.size(), true);
  return true;
}

std::vector<Eigen::VectorXd> read_measurement_rows(const std::filesystem::path& path, Eigen::Index K) {
  std::ifstream in = detail::open_input(path);
  std::vector<Eigen::VectorXd> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const auto tok = detail::split_ws(s);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (static_cast<Eigen::Index>(tok.size()) != K)
      throw ParseError(where + ": expected " + std::to_string(K) + " values, got " + std::to_string(tok.size()));
    Eigen::VectorXd y(K);
    for (Eigen::Index k = 0; k < K; ++k) y(k) = detail::to_double(tok[static_cast<std::size_t>(k)], where);
    rows.push_back(std::move(y));
  }
  return rows;
}

FilterContext FilterContext::make(const SystemModel& model, const Eigen::VectorXd& x0, FilterOptions options) {
  FilterContext ctx;
  ctx.model = &model;
  ctx.x0 = x0;
  ctx.options = options;
  if (options.steady_state && options.dos != DosHandling::skip)
    ctx.schedule = std::make_shared<const GainSchedule>(compute_gain_schedule(model, options.initial_covariance));
  return ctx;
}

}  // namespace sgdetect
