#include <doctest.h>

#include "sgdetect/attack.hpp"
#include "support.hpp"

using namespace sgdetect;

namespace {

const SystemModel& model() { return testing::ieee14().model; }
const Eigen::VectorXd& x0() { return testing::ieee14().x0; }

AttackScenario make(AttackKind kind, std::int64_t tau = 1) {
  AttackScenario s;
  s.kind = kind;
  s.tau = tau;
  return s;
}

Eigen::VectorXd nominal(std::uint64_t seed) {
  Rng rng(seed);
  return measure_nominal(model(), x0(), rng);
}

Eigen::VectorXd attacked(const AttackScenario& s, std::int64_t t, std::uint64_t seed) {
  Rng rng(seed);
  return attacked_measurement(model(), s, t, x0(), rng);
}

std::vector<AttackScenario> all_kinds(std::int64_t tau) {
  std::vector<AttackScenario> out;
  auto fdi = make(AttackKind::fdi, tau);
  fdi.params.fdi_lo = -0.07;
  fdi.params.fdi_hi = 0.07;
  out.push_back(fdi);
  auto st = make(AttackKind::stealth_fdi, tau);
  st.params.stealth_lo = 0.08;
  st.params.stealth_hi = 0.12;
  out.push_back(st);
  auto jam = make(AttackKind::jamming_awgn, tau);
  jam.params.jam_var_lo = 1e-3;
  jam.params.jam_var_hi = 2e-3;
  out.push_back(jam);
  auto cj = make(AttackKind::jamming_correlated, tau);
  cj.params.corr_entry_var = 8e-5;
  out.push_back(cj);
  auto hy = make(AttackKind::hybrid, tau);
  hy.params = fdi.params;
  hy.params.jam_var_lo = 5e-4;
  hy.params.jam_var_hi = 1e-3;
  out.push_back(hy);
  auto dos = make(AttackKind::dos, tau);
  dos.params.availability = 0.8;
  out.push_back(dos);
  auto topo = make(AttackKind::topology, tau);
  topo.params.removed_lines = {{9, 10}, {12, 13}};
  out.push_back(topo);
  auto mixed = make(AttackKind::mixed, tau);
  mixed.params = hy.params;
  mixed.params.removed_lines = {{9, 10}, {12, 13}};
  out.push_back(mixed);
  for (auto& s : out) s = prepare_scenario(model(), s);
  return out;
}

}  // namespace

TEST_CASE("attack kind names round-trip") {
  for (auto k : {AttackKind::none, AttackKind::fdi, AttackKind::stealth_fdi, AttackKind::jamming_awgn,
                 AttackKind::jamming_correlated, AttackKind::hybrid, AttackKind::dos, AttackKind::topology,
                 AttackKind::mixed})
    CHECK(parse_attack_kind(to_string(k)) == k);
  CHECK_THROWS_AS(parse_attack_kind("meteor"), std::invalid_argument);
  CHECK_THROWS_AS(parse_sign_mode("sideways"), std::invalid_argument);
}

TEST_CASE("before tau every kind reproduces the nominal measurement") {
  for (const auto& s : all_kinds(50)) {
    CAPTURE(to_string(s.kind));
    for (std::int64_t t : {1, 10, 49}) CHECK(attacked(s, t, 100 + static_cast<std::uint64_t>(t)) == nominal(100 + static_cast<std::uint64_t>(t)));
    CHECK(attacked(s, 50, 7) != nominal(7));
  }
}

TEST_CASE("tau = never leaves the stream nominal") {
  auto s = all_kinds(1).front();
  s.tau = kNever;
  CHECK(attacked(s, 1000000, 3) == nominal(3));
}

TEST_CASE("zero-width fdi bounds are a no-op") {
  auto s = make(AttackKind::fdi);
  s = prepare_scenario(model(), s);
  for (std::int64_t t : {1, 2, 30}) CHECK(attacked(s, t, 5) == nominal(5));
}

TEST_CASE("fdi offsets stay inside their bounds") {
  SUBCASE("uniform") {
    auto s = make(AttackKind::fdi);
    s.params.fdi_lo = -0.07;
    s.params.fdi_hi = 0.07;
    s = prepare_scenario(model(), s);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const Eigen::VectorXd d = attacked(s, 1, seed) - nominal(seed);
      CHECK(d.maxCoeff() <= 0.07 + 1e-15);
      CHECK(d.minCoeff() >= -0.07 - 1e-15);
    }
  }
  SUBCASE("per episode keeps each meter's sign") {
    Rng rng(1);
    auto s = sample_training_scenario(TrainingPhase::fdi_phase, 1, model().K(), rng, SignMode::per_episode);
    s = prepare_scenario(model(), s);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Eigen::VectorXd d = attacked(s, 1, seed) - nominal(seed);
      for (Eigen::Index k = 0; k < d.size(); ++k) {
        const double mag = std::abs(d(k));
        CHECK(mag >= 0.02 - 1e-12);
        CHECK(mag <= 0.06 + 1e-12);
        CHECK((d(k) > 0) == (s.params.signs[static_cast<std::size_t>(k)] > 0));
      }
    }
  }
  SUBCASE("per step magnitudes") {
    auto s = make(AttackKind::fdi);
    s.params.fdi_lo = 0.02;
    s.params.fdi_hi = 0.06;
    s.params.sign_mode = SignMode::per_step;
    s = prepare_scenario(model(), s);
    int neg = 0, total = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const Eigen::VectorXd d = attacked(s, 1, seed) - nominal(seed);
      for (Eigen::Index k = 0; k < d.size(); ++k) {
        CHECK(std::abs(d(k)) >= 0.02 - 1e-12);
        CHECK(std::abs(d(k)) <= 0.06 + 1e-12);
        neg += d(k) < 0;
        ++total;
      }
    }
    CHECK(neg > total / 3);
    CHECK(neg < 2 * total / 3);
  }
}

TEST_CASE("stealth injection lies in the column space of H") {
  auto s = all_kinds(1)[1];
  const Eigen::MatrixXd& H = model().H;
  const Eigen::MatrixXd proj = H * (H.transpose() * H).ldlt().solve(H.transpose());
  const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(H.rows(), H.rows()) - proj;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Eigen::VectorXd d = attacked(s, 1, seed) - nominal(seed);
    CHECK(d.norm() > 0.1);
    CHECK((P * d).norm() <= 1e-9);
  }
}

TEST_CASE("dos components are nominal or zero") {
  auto s = make(AttackKind::dos);
  s.params.availability = 0.5;
  s = prepare_scenario(model(), s);
  int zeros = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const Eigen::VectorXd y = attacked(s, 1, seed), n = nominal(seed);
    for (Eigen::Index k = 0; k < y.size(); ++k) {
      CHECK((y(k) == n(k) || y(k) == 0.0));
      zeros += y(k) == 0.0;
    }
  }
  CHECK(zeros > 800);
  CHECK(zeros < 1500);

  s.params.availability = 0.0;
  CHECK(attacked(s, 1, 4).isZero(0.0));

  Rng rng(4);
  Eigen::VectorXd y(model().K());
  Eigen::Array<bool, Eigen::Dynamic, 1> mask;
  attacked_measurement_into(model(), s, 1, x0(), rng, y, &mask);
  CHECK_FALSE(mask.any());
}

TEST_CASE("jamming noise has the configured variance") {
  auto s = make(AttackKind::jamming_awgn);
  s.params.jam_var_lo = 1e-3;
  s.params.jam_var_hi = 1e-3;
  s = prepare_scenario(model(), s);
  std::vector<double> d;
  for (std::uint64_t seed = 0; seed < 5000; ++seed) {
    const Eigen::VectorXd v = attacked(s, 1, seed) - nominal(seed);
    for (Eigen::Index k = 0; k < v.size(); ++k) d.push_back(v(k));
  }
  const auto mo = testing::moments(d);
  CHECK(std::abs(mo.mean) < 1e-3);
  CHECK(mo.var == doctest::Approx(1e-3).epsilon(0.05));
}

TEST_CASE("correlated jamming is zero mean with variance K * entry variance") {
  auto s = all_kinds(1)[3];
  std::vector<double> d;
  for (std::uint64_t seed = 0; seed < 5000; ++seed) {
    const Eigen::VectorXd v = attacked(s, 1, seed) - nominal(seed);
    for (Eigen::Index k = 0; k < v.size(); ++k) d.push_back(v(k));
  }
  const auto mo = testing::moments(d);
  CHECK(std::abs(mo.mean) < 1e-3);
  CHECK(mo.var == doctest::Approx(23 * 8e-5).epsilon(0.1));
}

TEST_CASE("topology attack removes the broken lines") {
  const auto s = all_kinds(1)[6];
  REQUIRE(s.h_bar.has_value());
  const auto& topo = *model().topology;
  const auto b910 = *topo.find_branch(9, 10);
  const auto b1213 = *topo.find_branch(12, 13);
  const Eigen::MatrixXd diff = model().H - *s.h_bar;
  for (std::size_t k = 0; k < topo.meters.size(); ++k) {
    const auto& m = topo.meters[k];
    const auto row = static_cast<Eigen::Index>(k);
    if (m.kind == MeterInfo::Kind::flow && (m.branch == b910 || m.branch == b1213)) {
      CHECK(s.h_bar->row(row).isZero(0.0));
    } else if (m.kind == MeterInfo::Kind::injection && !(m.bus == 9 || m.bus == 10 || m.bus == 12 || m.bus == 13)) {
      CHECK(diff.row(row).isZero(1e-8));
    }
  }
  // Injection at bus 9 loses exactly the 9-10 susceptance.
  const double b = topo.branches[b910].susceptance;
  const auto inj9 = 9 - 2;
  CHECK(diff(inj9, 9 - 2) == doctest::Approx(b));
  CHECK(diff(inj9, 10 - 2) == doctest::Approx(-b));

  auto bad = make(AttackKind::topology);
  bad.params.removed_lines = {{1, 14}};
  CHECK_THROWS_AS(prepare_scenario(model(), bad), std::invalid_argument);
}

TEST_CASE("prepare_scenario validates parameter ranges") {
  auto s = make(AttackKind::fdi);
  s.params.fdi_lo = 0.1;
  s.params.fdi_hi = 0.0;
  CHECK_THROWS_AS(prepare_scenario(model(), s), std::invalid_argument);
  s = make(AttackKind::dos);
  s.params.availability = 1.5;
  CHECK_THROWS_AS(prepare_scenario(model(), s), std::invalid_argument);
  s = make(AttackKind::jamming_awgn);
  s.params.jam_var_lo = -1;
  CHECK_THROWS_AS(prepare_scenario(model(), s), std::invalid_argument);
  s = make(AttackKind::fdi, 0);
  CHECK_THROWS_AS(prepare_scenario(model(), s), std::invalid_argument);
  s = make(AttackKind::fdi);
  s.params.sign_mode = SignMode::per_episode;
  s.params.fdi_lo = 0.02;
  s.params.fdi_hi = 0.06;
  CHECK_THROWS_AS(prepare_scenario(model(), s), std::invalid_argument);
}

TEST_CASE("training scenarios") {
  Rng rng(1);
  const auto f = sample_training_scenario(TrainingPhase::fdi_phase, 100, 23, rng);
  CHECK(f.kind == AttackKind::fdi);
  CHECK(f.tau == 100);
  CHECK(f.params.fdi_lo == 0.02);
  CHECK(f.params.fdi_hi == 0.06);

  const auto h = sample_training_scenario(TrainingPhase::hybrid_phase, 1, 23, rng);
  CHECK(h.kind == AttackKind::hybrid);
  CHECK(h.tau == 1);
  CHECK(h.params.jam_var_lo == 2e-4);
  CHECK(h.params.jam_var_hi == 4e-4);

  Rng a(9), b(9);
  const auto sa = sample_training_scenario(TrainingPhase::fdi_phase, 100, 23, a, SignMode::per_episode);
  const auto sb = sample_training_scenario(TrainingPhase::fdi_phase, 100, 23, b, SignMode::per_episode);
  CHECK(sa.params.signs == sb.params.signs);
  CHECK(sa.params.signs.size() == 23);

  CHECK_THROWS_AS(sample_training_scenario(TrainingPhase::fdi_phase, 0, 23, rng), std::invalid_argument);
}
