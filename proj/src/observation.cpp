#include "sgdetect/observation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace sgdetect {

QuantizerConfig QuantizerConfig::make(int levels, std::vector<double> thresholds) {
  if (levels < 2) throw std::invalid_argument("quantizer needs at least 2 levels");
  if (thresholds.size() != static_cast<std::size_t>(levels - 1))
    throw std::invalid_argument("quantizer with " + std::to_string(levels) + " levels needs " +
                                std::to_string(levels - 1) + " thresholds");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (!(thresholds[i] > 0.0) || !std::isfinite(thresholds[i]))
      throw std::invalid_argument("quantizer thresholds must be positive and finite");
    if (i > 0 && !(thresholds[i] > thresholds[i - 1]))
      throw std::invalid_argument("quantizer thresholds must be strictly increasing");
  }
  return QuantizerConfig{levels, std::move(thresholds)};
}

QuantizerConfig calibrate_thresholds(std::span<const double> etas, int levels, std::span<const double> quantiles) {
  if (levels < 2) throw std::invalid_argument("quantizer needs at least 2 levels");
  if (etas.size() < kMinCalibrationSamples)
    throw std::invalid_argument("calibration needs at least " + std::to_string(kMinCalibrationSamples) +
                                " nominal samples, got " + std::to_string(etas.size()));
  if (quantiles.size() != static_cast<std::size_t>(levels - 1))
    throw std::invalid_argument("need one calibration quantile per threshold");
  for (std::size_t i = 0; i < quantiles.size(); ++i) {
    if (!(quantiles[i] > 0.0 && quantiles[i] < 1.0)) throw std::invalid_argument("quantiles must lie in (0, 1)");
    if (i > 0 && !(quantiles[i] > quantiles[i - 1])) throw std::invalid_argument("quantiles must be increasing");
  }
  std::vector<double> sorted(etas.begin(), etas.end());
  std::sort(sorted.begin(), sorted.end());
  const double lo = sorted.front(), hi = sorted.back();
  if (!(hi > 0.0) || !(hi > lo)) throw std::invalid_argument("nominal samples are degenerate (no positive spread)");

  const auto n = static_cast<double>(sorted.size());
  std::vector<double> beta;
  for (double q : quantiles) {
    const double pos = q * (n - 1.0);
    const auto i = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(i);
    const double v = i + 1 < sorted.size() ? sorted[i] + frac * (sorted[i + 1] - sorted[i]) : sorted[i];
    beta.push_back(v);
  }

  // Lower bound for the first threshold: the smallest positive sample.
  const double floor_value = *std::upper_bound(sorted.begin(), sorted.end(), 0.0);
  if (!(beta[0] > 0.0)) beta[0] = floor_value;

  // Spread runs of non-increasing values between the last good value and the next
  // larger one (or the sample maximum).
  for (std::size_t i = 1; i < beta.size(); ++i) {
    if (beta[i] > beta[i - 1]) continue;
    std::size_t j = i;
    while (j < beta.size() && !(beta[j] > beta[i - 1])) ++j;
    double upper = j < beta.size() ? beta[j] : hi;
    if (!(upper > beta[i - 1])) upper = beta[i - 1] + std::max(std::abs(beta[i - 1]), 1e-300) * 1e-6 * (j - i + 1);
    const double step = (upper - beta[i - 1]) / static_cast<double>(j - i + 1);
    for (std::size_t m = i; m < j; ++m) beta[m] = beta[i - 1] + step * static_cast<double>(m - i + 1);
  }
  return QuantizerConfig::make(levels, std::move(beta));
}

int quantize(const QuantizerConfig& q, double eta) {
  // number of thresholds <= eta, so eta == beta_i lands in the upper interval
  const auto it = std::upper_bound(q.thresholds.begin(), q.thresholds.end(), eta);
  return 1 + static_cast<int>(it - q.thresholds.begin());
}

std::uint64_t observation_space_size(int levels, int size) {
  if (levels < 1 || size < 1) throw std::invalid_argument("window size and levels must be positive");
  std::uint64_t n = 1;
  for (int i = 0; i < size; ++i) {
    if (n > (std::numeric_limits<std::uint64_t>::max() >> 1) / static_cast<std::uint64_t>(levels))
      throw std::overflow_error("observation space too large");
    n *= static_cast<std::uint64_t>(levels);
  }
  return n;
}

ObservationWindow::ObservationWindow(int size, int levels, int fill) : levels_(levels) {
  if (size < 1) throw std::invalid_argument("window size must be >= 1");
  if (levels < 2) throw std::invalid_argument("window needs at least 2 levels");
  if (fill < 1 || fill > levels) throw std::invalid_argument("fill symbol out of range");
  observation_space_size(levels, size);
  symbols_.assign(static_cast<std::size_t>(size), fill);
  top_weight_ = 1;
  for (int i = 1; i < size; ++i) top_weight_ *= static_cast<std::uint64_t>(levels);
  index_ = 0;
  std::uint64_t w = 1;
  for (int i = 0; i < size; ++i, w *= static_cast<std::uint64_t>(levels))
    index_ += static_cast<std::uint64_t>(fill - 1) * w;
}

void ObservationWindow::push(int symbol) {
  if (symbol < 1 || symbol > levels_)
    throw std::invalid_argument("symbol " + std::to_string(symbol) + " outside 1.." + std::to_string(levels_));
  const int oldest = symbols_[head_];
  // the oldest entry carries the top weight; drop it, shift, add the newest at weight 1
  index_ = (index_ - static_cast<std::uint64_t>(oldest - 1) * top_weight_) * static_cast<std::uint64_t>(levels_) +
           static_cast<std::uint64_t>(symbol - 1);
  symbols_[head_] = symbol;
  head_ = (head_ + 1) % symbols_.size();
}

std::vector<int> ObservationWindow::symbols() const {
  std::vector<int> out;
  out.reserve(symbols_.size());
  for (int i = 0; i < size(); ++i) out.push_back((*this)[i]);
  return out;
}

ObservationWindow push_window(ObservationWindow w, int symbol) {
  w.push(symbol);
  return w;
}

std::uint64_t window_index(const ObservationWindow& w) { return w.index(); }

ObservationWindow decode_window(std::uint64_t index, int size, int levels) {
  const std::uint64_t space = observation_space_size(levels, size);
  if (index >= space) throw std::out_of_range("window index out of range");
  std::vector<int> newest_first;
  for (int j = 0; j < size; ++j) {
    newest_first.push_back(static_cast<int>(index % static_cast<std::uint64_t>(levels)) + 1);
    index /= static_cast<std::uint64_t>(levels);
  }
  ObservationWindow w(size, levels, 1);
  for (int j = size - 1; j >= 0; --j) w.push(newest_first[static_cast<std::size_t>(j)]);
  return w;
}

}  // namespace sgdetect
