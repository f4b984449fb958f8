#include <doctest.h>

#include <set>

#include "sgdetect/observation.hpp"
#include "support.hpp"

using namespace sgdetect;

namespace {

QuantizerConfig paper() { return QuantizerConfig::make(4, {0.95e-2, 1.05e-2, 1.15e-2}); }

ObservationWindow window_of(std::vector<int> symbols, int levels) {
  ObservationWindow w(static_cast<int>(symbols.size()), levels, 1);
  for (int s : symbols) w.push(s);
  return w;
}

}  // namespace

TEST_CASE("quantize follows left-closed intervals") {
  const auto q = paper();
  CHECK(quantize(q, 0.5e-2) == 1);
  CHECK(quantize(q, 1.00e-2) == 2);
  CHECK(quantize(q, 1.20e-2) == 4);
  CHECK(quantize(q, 0.0) == 1);
  CHECK(quantize(q, 0.95e-2) == 2);
  CHECK(quantize(q, 1.05e-2) == 3);
  CHECK(quantize(q, 1.15e-2) == 4);
  CHECK(quantize(q, std::nextafter(0.95e-2, 0.0)) == 1);
  CHECK(quantize(q, 1e9) == 4);
}

TEST_CASE("quantize is monotone and surjective") {
  const auto q = paper();
  std::set<int> seen;
  int prev = 1;
  for (int i = 0; i <= 20000; ++i) {
    const double eta = (q.thresholds.back() + 1.0) * i / 20000.0;
    const int s = quantize(q, eta);
    CHECK(s >= prev);
    CHECK(s >= 1);
    CHECK(s <= 4);
    prev = s;
    seen.insert(s);
  }
  CHECK(seen.size() == 4);
}

TEST_CASE("quantizer invariants") {
  CHECK_THROWS_AS(QuantizerConfig::make(1, {}), std::invalid_argument);
  CHECK_THROWS_AS(QuantizerConfig::make(3, {0.2, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(QuantizerConfig::make(3, {0.1, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(QuantizerConfig::make(3, {0.0, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(QuantizerConfig::make(3, {0.1}), std::invalid_argument);
  const auto q = paper();
  CHECK(q.thresholds == std::vector<double>{0.95e-2, 1.05e-2, 1.15e-2});
}

TEST_CASE("calibration") {
  SUBCASE("median of a small sample") {
    std::vector<double> s;
    for (int i = 0; i < 1000; ++i) s.push_back(1.0 + i % 4);
    const std::vector<double> qs{0.5};
    const auto q = calibrate_thresholds(s, 2, qs);
    CHECK(q.thresholds[0] >= 2.0);
    CHECK(q.thresholds[0] <= 3.0);
  }
  SUBCASE("default quantiles on a uniform ramp") {
    std::vector<double> s;
    for (int i = 1; i <= 10001; ++i) s.push_back(i * 1e-4);
    const auto q = calibrate_thresholds(s, 4);
    REQUIRE(q.thresholds.size() == 3);
    CHECK(q.thresholds[0] == doctest::Approx(0.9001).epsilon(1e-3));
    CHECK(q.thresholds[1] == doctest::Approx(0.9501).epsilon(1e-3));
    CHECK(q.thresholds[2] == doctest::Approx(0.9901).epsilon(1e-3));
  }
  SUBCASE("colliding quantiles are spread") {
    std::vector<double> s(1000, 1.0);
    s.back() = 2.0;
    const auto q = calibrate_thresholds(s, 4);
    CHECK(q.thresholds[0] < q.thresholds[1]);
    CHECK(q.thresholds[1] < q.thresholds[2]);
  }
  SUBCASE("errors") {
    std::vector<double> few(999, 1.0);
    CHECK_THROWS_AS(calibrate_thresholds(few, 4), std::invalid_argument);
    std::vector<double> ok(1000, 1.0);
    ok[0] = 0.5;
    CHECK_THROWS_AS(calibrate_thresholds(ok, 1), std::invalid_argument);
    const std::vector<double> two{0.5, 0.9};
    CHECK_THROWS_AS(calibrate_thresholds(ok, 4, two), std::invalid_argument);
    std::vector<double> constant(1000, 0.3);
    try {
      const auto q = calibrate_thresholds(constant, 4);
      CHECK(q.thresholds[0] < q.thresholds[1]);
      CHECK(q.thresholds[1] < q.thresholds[2]);
    } catch (const std::invalid_argument&) {
    }
  }
}

TEST_CASE("push_window") {
  CHECK(push_window(window_of({1, 1, 1, 1}, 4), 2).symbols() == std::vector<int>{1, 1, 1, 2});
  CHECK(push_window(window_of({1, 2, 3, 4}, 4), 1).symbols() == std::vector<int>{2, 3, 4, 1});
  CHECK(push_window(window_of({3}, 4), 2).symbols() == std::vector<int>{2});
  ObservationWindow w(4, 4, 1);
  CHECK_THROWS_AS(w.push(0), std::invalid_argument);
  CHECK_THROWS_AS(w.push(5), std::invalid_argument);
  CHECK(w.size() == 4);
}

TEST_CASE("window_index examples") {
  CHECK(window_index(window_of({1, 1, 1, 1}, 4)) == 0);
  CHECK(window_index(window_of({1, 1, 1, 1, 1, 1}, 3)) == 0);
  CHECK(window_index(window_of({1, 1, 1, 2}, 4)) == 1);
  CHECK(window_index(window_of({4, 4, 4, 4}, 4)) == 255);
  CHECK(window_index(window_of({2, 1, 1, 1}, 4)) == 64);
  CHECK(observation_space_size(4, 4) == 256);
  CHECK_THROWS_AS(observation_space_size(4, 40), std::overflow_error);
}

TEST_CASE("all 256 windows round-trip and encode injectively") {
  std::set<std::uint64_t> seen;
  for (int a = 1; a <= 4; ++a)
    for (int b = 1; b <= 4; ++b)
      for (int c = 1; c <= 4; ++c)
        for (int d = 1; d <= 4; ++d) {
          const auto w = window_of({a, b, c, d}, 4);
          const std::uint64_t idx = window_index(w);
          CHECK(idx == static_cast<std::uint64_t>((d - 1) + 4 * (c - 1) + 16 * (b - 1) + 64 * (a - 1)));
          CHECK(decode_window(idx, 4, 4) == w);
          seen.insert(idx);
        }
  CHECK(seen.size() == 256);
  for (std::uint64_t i = 0; i < 256; ++i) CHECK(window_index(decode_window(i, 4, 4)) == i);
}

TEST_CASE("rolling index agrees with recomputation over a long random sequence") {
  Rng rng(2);
  ObservationWindow w(5, 3, 1);
  for (int i = 0; i < 5000; ++i) {
    w.push(static_cast<int>(rng() % 3) + 1);
    std::uint64_t expect = 0, weight = 1;
    for (int j = w.size() - 1; j >= 0; --j) {
      expect += static_cast<std::uint64_t>(w[j] - 1) * weight;
      weight *= 3;
    }
    CHECK(w.index() == expect);
  }
}
