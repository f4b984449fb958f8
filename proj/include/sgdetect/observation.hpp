#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace sgdetect {

/// Maps eta to a symbol in 1..levels: symbol i covers [beta_{i-1}, beta_i),
/// with beta_0 = 0 and beta_levels = +inf.
struct QuantizerConfig {
  int levels = 0;
  std::vector<double> thresholds;  // levels - 1 values, strictly increasing, positive

  /// Throws std::invalid_argument if the invariants do not hold.
  static QuantizerConfig make(int levels, std::vector<double> thresholds);
};

/// Default calibration quantiles for 4 levels.
inline const std::vector<double> kDefaultCalibrationQuantiles{0.90, 0.95, 0.99};
inline constexpr std::size_t kMinCalibrationSamples = 1000;

/// Thresholds at empirical quantiles (linear interpolation between order
/// statistics) of nominal eta samples. Colliding quantiles are spread evenly
/// between their distinct neighbours so the result is always strictly increasing.
/// Throws std::invalid_argument on too few samples, levels < 2, a quantile
/// list of the wrong length, or samples without any positive spread.
QuantizerConfig calibrate_thresholds(std::span<const double> nominal_etas, int levels,
                                     std::span<const double> quantiles = kDefaultCalibrationQuantiles);

int quantize(const QuantizerConfig& q, double eta);

/// The `size` most recent symbols, oldest first.
class ObservationWindow {
 public:
  ObservationWindow() = default;
  /// Window of `size` copies of `fill`.
  ObservationWindow(int size, int levels, int fill = 1);

  /// Evicts the oldest symbol and appends `symbol` (1..levels).
  void push(int symbol);

  int size() const noexcept { return static_cast<int>(symbols_.size()); }
  int levels() const noexcept { return levels_; }
  /// i = 0 is the oldest entry.
  int operator[](int i) const { return symbols_[static_cast<std::size_t>((head_ + i) % symbols_.size())]; }
  int newest() const { return (*this)[size() - 1]; }
  std::vector<int> symbols() const;

  /// Sum over j of (s_j - 1) * levels^j where s_0 is the newest symbol.
  std::uint64_t index() const noexcept { return index_; }

  bool operator==(const ObservationWindow& o) const { return symbols() == o.symbols() && levels_ == o.levels_; }

 private:
  std::vector<int> symbols_;
  std::size_t head_ = 0;
  int levels_ = 0;
  std::uint64_t index_ = 0;
  std::uint64_t top_weight_ = 1;  // levels^(size-1)
};

/// Value-style push: returns the window with `symbol` appended.
ObservationWindow push_window(ObservationWindow w, int symbol);
std::uint64_t window_index(const ObservationWindow& w);
/// Inverse of window_index.
ObservationWindow decode_window(std::uint64_t index, int size, int levels);
/// levels^size, throws std::overflow_error when it does not fit in 63 bits.
std::uint64_t observation_space_size(int levels, int size);

}  // namespace sgdetect
