#include <doctest.h>

#include <fstream>

#include "sgdetect/errors.hpp"
#include "sgdetect/grid_model.hpp"
#include "support.hpp"

using namespace sgdetect;
using testing::TempDir;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
}

int svd_rank(const Eigen::MatrixXd& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
  const auto& s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  int r = 0;
  for (Eigen::Index i = 0; i < s.size(); ++i)
    if (s(i) > 1e-8 * s(0)) ++r;
  return r;
}

}  // namespace

TEST_CASE("shipped IEEE-14 model has 13 states and 23 meters") {
  const auto& sys = testing::ieee14();
  CHECK(sys.model.N() == 13);
  CHECK(sys.model.K() == 23);
  CHECK(sys.x0.size() == 13);
  CHECK(sys.model.A.isApprox(Eigen::MatrixXd::Identity(13, 13)));
  CHECK(sys.model.sigma_v2 == doctest::Approx(1e-4));
  CHECK(sys.model.topology.has_value());
}

TEST_CASE("observability rank of the shipped model matches an SVD oracle") {
  const auto& m = testing::ieee14().model;
  Eigen::MatrixXd stacked(m.K() * m.N(), m.N());
  Eigen::MatrixXd pow = Eigen::MatrixXd::Identity(m.N(), m.N());
  for (Eigen::Index i = 0; i < m.N(); ++i) {
    stacked.middleRows(i * m.K(), m.K()) = m.H * pow;
    pow = pow * m.A;
  }
  const auto obs = check_observability(m);
  CHECK(obs.rank == svd_rank(stacked));
  CHECK(obs.rank == 13);
  CHECK(obs.observable);
}

TEST_CASE("shipped H equals the DC Jacobian rebuilt from the branch list") {
  const auto& m = testing::ieee14().model;
  const auto& topo = *m.topology;
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(m.K(), m.N());
  auto col = [&](int bus) { return bus == 1 ? -1 : bus - 2; };
  for (std::size_t k = 0; k < topo.meters.size(); ++k) {
    const auto& mi = topo.meters[k];
    if (mi.kind == MeterInfo::Kind::injection) {
      for (const auto& br : topo.branches) {
        if (br.from != mi.bus && br.to != mi.bus) continue;
        const int other = br.from == mi.bus ? br.to : br.from;
        if (col(mi.bus) >= 0) h(static_cast<Eigen::Index>(k), col(mi.bus)) += br.susceptance;
        if (col(other) >= 0) h(static_cast<Eigen::Index>(k), col(other)) -= br.susceptance;
      }
    } else {
      const auto& br = topo.branches[mi.branch];
      if (col(br.from) >= 0) h(static_cast<Eigen::Index>(k), col(br.from)) += br.susceptance;
      if (col(br.to) >= 0) h(static_cast<Eigen::Index>(k), col(br.to)) -= br.susceptance;
    }
  }
  CHECK((h - m.H).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("check_observability on trivial matrices") {
  SystemModel m;
  m.A = Eigen::MatrixXd::Identity(3, 3);
  m.H = Eigen::MatrixXd::Zero(4, 3);
  m.sigma_w2 = 1;
  CHECK(check_observability(m).rank == 0);
  CHECK_FALSE(check_observability(m).observable);
  m.H.topRows(3) = Eigen::MatrixXd::Identity(3, 3);
  CHECK(check_observability(m).rank == 3);
  CHECK(check_observability(m).observable);
}

TEST_CASE("load_system accepts the scalar toy model") {
  TempDir dir("grid");
  write_text(dir / "toy.model", "# 1 1\n1\n0 1\n");
  write_text(dir / "toy.x0", "0\n");
  const auto sys = load_system(dir / "toy.model", dir / "toy.x0");
  CHECK(sys.model.N() == 1);
  CHECK(sys.model.K() == 1);
  CHECK(sys.model.A(0, 0) == 1.0);
  CHECK(sys.model.sigma_v2 == 0.0);
  CHECK(sys.model.sigma_w2 == 1.0);
  CHECK(sys.x0(0) == 0.0);
}

TEST_CASE("load_system rejects bad inputs") {
  TempDir dir("grid");
  write_text(dir / "x0", "0 0\n");

  SUBCASE("zero H reports its rank") {
    write_text(dir / "m", "# 2 3\n0 0\n0 0\n0 0\n1e-4 2e-4\n");
    try {
      load_system(dir / "m", dir / "x0");
      FAIL("expected ModelError");
    } catch (const ModelError& e) {
      CHECK(e.rank() == 0);
    }
  }
  SUBCASE("row length mismatch") {
    write_text(dir / "m", "# 2 3\n1 0\n0 1 5\n1 1\n1e-4 2e-4\n");
    CHECK_THROWS_AS(load_system(dir / "m", dir / "x0"), ModelError);
  }
  SUBCASE("K < N") {
    write_text(dir / "m", "# 2 1\n1 0\n1e-4 2e-4\n");
    CHECK_THROWS_AS(load_system(dir / "m", dir / "x0"), ModelError);
  }
  SUBCASE("non-positive measurement noise") {
    write_text(dir / "m", "# 2 2\n1 0\n0 1\n1e-4 0\n");
    CHECK_THROWS_AS(load_system(dir / "m", dir / "x0"), ModelError);
  }
  SUBCASE("garbage") {
    write_text(dir / "m", "# 2 2\n1 zero\n0 1\n1e-4 1\n");
    CHECK_THROWS_AS(load_system(dir / "m", dir / "x0"), Error);
  }
  SUBCASE("missing header") {
    write_text(dir / "m", "1 0\n0 1\n1e-4 1\n");
    CHECK_THROWS_AS(load_system(dir / "m", dir / "x0"), ParseError);
  }
  SUBCASE("x0 of wrong length") {
    write_text(dir / "m", "# 2 2\n1 0\n0 1\n1e-4 1\n");
    write_text(dir / "x0", "0 0 0\n");
    CHECK_THROWS_AS(load_system(dir / "m", dir / "x0"), ModelError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_system(dir / "nope", dir / "x0"), MissingFileError); }
}

TEST_CASE("explicit A block is read and model files round-trip") {
  TempDir dir("grid");
  write_text(dir / "m", "# 2 2\n1 0\n0 1\n1e-4 2e-4\n0.5 0\n0 0.9\n");
  const auto m = read_model_file(dir / "m");
  CHECK(m.A(0, 0) == 0.5);
  CHECK(m.A(1, 1) == 0.9);
  write_model_file(dir / "m2", m);
  const auto back = read_model_file(dir / "m2");
  CHECK(back.A == m.A);
  CHECK(back.H == m.H);
  CHECK(back.sigma_v2 == m.sigma_v2);
  CHECK(back.sigma_w2 == m.sigma_w2);
}

TEST_CASE("step_state") {
  SUBCASE("no process noise and A = I leaves the state unchanged") {
    auto m = testing::scalar_model(1, 1, 0, 1);
    Rng rng(1);
    Eigen::VectorXd x(1);
    x << 0.3;
    CHECK(step_state(m, x, rng)(0) == 0.3);
  }
  SUBCASE("increment variance and shape on the shipped model") {
    const auto& sys = testing::ieee14();
    Rng rng(42);
    Eigen::VectorXd x = sys.x0;
    std::vector<double> inc;
    inc.reserve(13 * 100000);
    for (int t = 0; t < 100000; ++t) {
      const Eigen::VectorXd nx = step_state(sys.model, x, rng);
      for (Eigen::Index i = 0; i < 13; ++i) inc.push_back(nx(i) - x(i));
      x = nx;
    }
    const auto mo = testing::moments(inc);
    CHECK(mo.var >= 0.95e-4);
    CHECK(mo.var <= 1.05e-4);
    CHECK(std::abs(mo.skew) < 0.05);
    CHECK(std::abs(mo.exkurt) < 0.1);
  }
  SUBCASE("same seed, same output") {
    const auto& sys = testing::ieee14();
    Rng a(7), b(7);
    CHECK(step_state(sys.model, sys.x0, a) == step_state(sys.model, sys.x0, b));
  }
  SUBCASE("dimension mismatch") {
    const auto& sys = testing::ieee14();
    Rng rng(1);
    CHECK_THROWS_AS(step_state(sys.model, Eigen::VectorXd::Zero(3), rng), std::invalid_argument);
  }
}

TEST_CASE("measure_nominal") {
  SUBCASE("zero measurement noise gives H x") {
    const auto& sys = testing::ieee14();
    SystemModel m = sys.model;
    m.sigma_w2 = 0.0;
    Rng rng(3);
    CHECK((measure_nominal(m, sys.x0, rng) - m.H * sys.x0).norm() == 0.0);
  }
  SUBCASE("scalar model mean and variance") {
    auto m = testing::scalar_model(1, 1, 0, 1);
    Rng rng(11);
    Eigen::VectorXd x(1);
    x << 2.0;
    std::vector<double> ys;
    for (int i = 0; i < 100000; ++i) ys.push_back(measure_nominal(m, x, rng)(0));
    const auto mo = testing::moments(ys);
    CHECK(std::abs(mo.mean - 2.0) <= 0.02 * 2.0);
    CHECK(std::abs(mo.var - 1.0) <= 0.02);
  }
  SUBCASE("measurement noise shape") {
    const auto& sys = testing::ieee14();
    Rng rng(5);
    std::vector<double> w;
    const Eigen::VectorXd hx = sys.model.H * sys.x0;
    for (int i = 0; i < 100000 / 23 + 1; ++i) {
      const Eigen::VectorXd y = measure_nominal(sys.model, sys.x0, rng);
      for (Eigen::Index k = 0; k < 23; ++k) w.push_back(y(k) - hx(k));
    }
    const auto mo = testing::moments(w);
    CHECK(std::abs(mo.var / sys.model.sigma_w2 - 1.0) < 0.03);
    CHECK(std::abs(mo.skew) < 0.05);
    CHECK(std::abs(mo.exkurt) < 0.1);
  }
  SUBCASE("reproducible") {
    const auto& sys = testing::ieee14();
    Rng a(9), b(9);
    CHECK(measure_nominal(sys.model, sys.x0, a) == measure_nominal(sys.model, sys.x0, b));
  }
}

TEST_CASE("simulate_states replays from the seed") {
  const auto& sys = testing::ieee14();
  Rng a(1), b(1);
  const auto ta = simulate_states(sys.model, sys.x0, 50, a);
  const auto tb = simulate_states(sys.model, sys.x0, 50, b);
  REQUIRE(ta.horizon() == 50);
  for (int t = 0; t < 50; ++t) CHECK(ta.states[static_cast<std::size_t>(t)] == tb.states[static_cast<std::size_t>(t)]);

  Rng c(1);
  Eigen::VectorXd x = sys.x0;
  for (int t = 0; t < 50; ++t) {
    x = step_state(sys.model, x, c);
    CHECK(x == ta.states[static_cast<std::size_t>(t)]);
  }
}
