#include "sgdetect/grid_model.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>

#include "sgdetect/errors.hpp"
#include "text_io.hpp"

namespace sgdetect {

std::optional<std::size_t> NetworkTopology::find_branch(int a, int b) const noexcept {
  for (std::size_t i = 0; i < branches.size(); ++i) {
    const auto& br = branches[i];
    if ((br.from == a && br.to == b) || (br.from == b && br.to == a)) return i;
  }
  return std::nullopt;
}

Eigen::MatrixXd dc_measurement_matrix(const NetworkTopology& topology, Eigen::Index n_states,
                                      const std::vector<bool>& removed) {
  const auto K = static_cast<Eigen::Index>(topology.meters.size());
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(K, n_states);
  auto is_removed = [&](std::size_t i) { return !removed.empty() && removed[i]; };
  auto add = [&](Eigen::Index row, int bus, double v) {
    const int c = topology.state_column(bus);
    if (c >= 0) H(row, c) += v;
  };
  for (Eigen::Index k = 0; k < K; ++k) {
    const MeterInfo& m = topology.meters[static_cast<std::size_t>(k)];
    if (m.kind == MeterInfo::Kind::flow) {
      if (is_removed(m.branch)) continue;
      const Branch& br = topology.branches[m.branch];
      add(k, br.from, br.susceptance);
      add(k, br.to, -br.susceptance);
      continue;
    }
    for (std::size_t i = 0; i < topology.branches.size(); ++i) {
      if (is_removed(i)) continue;
      const Branch& br = topology.branches[i];
      if (br.from != m.bus && br.to != m.bus) continue;
      const int other = br.from == m.bus ? br.to : br.from;
      add(k, m.bus, br.susceptance);
      add(k, other, -br.susceptance);
    }
  }
  return H;
}

Observability check_observability(const SystemModel& model) {
  const Eigen::Index n = model.N();
  const Eigen::Index k = model.K();
  if (n == 0 || k == 0) return {};
  Eigen::MatrixXd O(n * k, n);
  Eigen::MatrixXd block = model.H;
  for (Eigen::Index i = 0; i < n; ++i) {
    O.middleRows(i * k, k) = block;
    if (i + 1 < n) block = block * model.A;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(O);
  const auto& s = svd.singularValues();
  const double smax = s.size() ? s(0) : 0.0;
  int rank = 0;
  if (smax > 0.0) {
    for (Eigen::Index i = 0; i < s.size(); ++i)
      if (s(i) > kRankTolerance * smax) ++rank;
  }
  return {rank, rank == n};
}

void validate_model(const SystemModel& m) {
  const Eigen::Index n = m.A.rows();
  if (n == 0) throw ModelError("state dimension N must be positive");
  if (m.A.cols() != n) throw ModelError("A must be square");
  if (m.H.cols() != n)
    throw ModelError("H has " + std::to_string(m.H.cols()) + " columns, expected N = " + std::to_string(n));
  if (m.H.rows() < n)
    throw ModelError("need K >= N meters, got K = " + std::to_string(m.H.rows()) + ", N = " + std::to_string(n));
  if (!(m.sigma_v2 >= 0.0) || !std::isfinite(m.sigma_v2)) throw ModelError("sigma_v2 must be >= 0");
  if (!(m.sigma_w2 > 0.0) || !std::isfinite(m.sigma_w2)) throw ModelError("sigma_w2 must be > 0");
  if (!m.A.allFinite() || !m.H.allFinite()) throw ModelError("model matrices contain non-finite values");
  if (m.topology && m.topology->meters.size() != static_cast<std::size_t>(m.H.rows()))
    throw ModelError("topology lists " + std::to_string(m.topology->meters.size()) + " meters, H has " +
                     std::to_string(m.H.rows()) + " rows");
  const Observability obs = check_observability(m);
  if (!obs.observable)
    throw ModelError("system not observable: observability rank " + std::to_string(obs.rank) + " < N = " +
                         std::to_string(n),
                     obs.rank);
}

namespace {

void parse_directive(const std::vector<std::string_view>& tok, NetworkTopology& topo, const std::string& where) {
  // tok[0] == "#@"
  if (tok.size() < 2) throw ParseError(where + ": empty directive");
  const std::string_view what = tok[1];
  if (what == "reference" && tok.size() == 3) {
    topo.reference_bus = static_cast<int>(detail::to_integer(tok[2], where));
  } else if (what == "branch" && tok.size() == 5) {
    Branch b;
    b.from = static_cast<int>(detail::to_integer(tok[2], where));
    b.to = static_cast<int>(detail::to_integer(tok[3], where));
    b.susceptance = detail::to_double(tok[4], where);
    topo.branches.push_back(b);
  } else if (what == "meter" && tok.size() >= 4) {
    const auto index = detail::to_integer(tok[2], where);
    if (index != static_cast<long long>(topo.meters.size()) + 1)
      throw ParseError(where + ": meters must be listed in order 1..K");
    MeterInfo m;
    if (tok[3] == "injection" && tok.size() == 5) {
      m.kind = MeterInfo::Kind::injection;
      m.bus = static_cast<int>(detail::to_integer(tok[4], where));
    } else if (tok[3] == "flow" && tok.size() == 6) {
      m.kind = MeterInfo::Kind::flow;
      const int a = static_cast<int>(detail::to_integer(tok[4], where));
      const int b = static_cast<int>(detail::to_integer(tok[5], where));
      const auto br = topo.find_branch(a, b);
      if (!br) throw ParseError(where + ": flow meter on unknown line " + std::to_string(a) + "-" + std::to_string(b));
      m.branch = *br;
    } else {
      throw ParseError(where + ": bad meter directive");
    }
    topo.meters.push_back(m);
  } else {
    throw ParseError(where + ": unknown directive '" + std::string(what) + "'");
  }
}

}  // namespace

SystemModel read_model_file(const std::filesystem::path& path) {
  std::ifstream in = detail::open_input(path);
  long long n = -1, k = -1;
  std::vector<std::vector<double>> rows;
  NetworkTopology topo;
  bool has_topology = false;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    const std::string_view s = detail::trim(line);
    if (s.empty()) continue;
    if (s.front() == '#') {
      auto tok = detail::split_ws(s.substr(1));
      if (s.size() >= 2 && s[1] == '@') {
        tok = detail::split_ws(s);
        parse_directive(tok, topo, where);
        has_topology = true;
        continue;
      }
      long long a = 0, b = 0;
      if (n < 0 && tok.size() == 2 && detail::parse_number(tok[0], a) && detail::parse_number(tok[1], b)) {
        if (a <= 0 || b <= 0) throw ParseError(where + ": N and K must be positive");
        n = a;
        k = b;
      }
      continue;
    }
    if (n < 0) throw ParseError(where + ": data before the '# N K' header");
    std::vector<double> row;
    for (auto t : detail::split_ws(s)) row.push_back(detail::to_double(t, where));
    rows.push_back(std::move(row));
  }
  if (n < 0) throw ParseError(path.string() + ": missing '# N K' header");

  const auto need_rows = static_cast<std::size_t>(k + 1);
  if (rows.size() != need_rows && rows.size() != need_rows + static_cast<std::size_t>(n))
    throw ModelError(path.string() + ": expected " + std::to_string(need_rows) + " or " +
                     std::to_string(need_rows + n) + " data rows, found " + std::to_string(rows.size()));

  SystemModel m;
  m.H.resize(k, n);
  for (long long r = 0; r < k; ++r) {
    if (rows[r].size() != static_cast<std::size_t>(n))
      throw ModelError(path.string() + ": H row " + std::to_string(r + 1) + " has " +
                       std::to_string(rows[r].size()) + " entries, expected N = " + std::to_string(n));
    for (long long c = 0; c < n; ++c) m.H(r, c) = rows[r][c];
  }
  const auto& noise = rows[k];
  if (noise.size() != 2) throw ModelError(path.string() + ": noise row must hold 'sigma_v2 sigma_w2'");
  m.sigma_v2 = noise[0];
  m.sigma_w2 = noise[1];
  if (rows.size() == need_rows) {
    m.A = Eigen::MatrixXd::Identity(n, n);
  } else {
    m.A.resize(n, n);
    for (long long r = 0; r < n; ++r) {
      const auto& row = rows[need_rows + r];
      if (row.size() != static_cast<std::size_t>(n))
        throw ModelError(path.string() + ": A row " + std::to_string(r + 1) + " has wrong length");
      for (long long c = 0; c < n; ++c) m.A(r, c) = row[c];
    }
  }
  if (has_topology) {
    if (topo.meters.size() != static_cast<std::size_t>(k))
      throw ModelError(path.string() + ": topology directives describe " + std::to_string(topo.meters.size()) +
                       " meters, header says K = " + std::to_string(k));
    const Eigen::MatrixXd rebuilt = dc_measurement_matrix(topo, n);
    const double scale = std::max(1.0, m.H.cwiseAbs().maxCoeff());
    if ((rebuilt - m.H).cwiseAbs().maxCoeff() > 1e-8 * scale)
      throw ModelError(path.string() + ": topology directives disagree with H");
    m.topology = std::move(topo);
  }
  return m;
}

Eigen::VectorXd read_state_file(const std::filesystem::path& path) {
  std::ifstream in = detail::open_input(path);
  std::vector<double> vals;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    for (auto t : detail::split_ws(s))
      vals.push_back(detail::to_double(t, path.string() + ":" + std::to_string(lineno)));
  }
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

void write_model_file(const std::filesystem::path& path, const SystemModel& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << std::setprecision(17);
  if (m.topology) {
    out << "#@ reference " << m.topology->reference_bus << '\n';
    for (const auto& b : m.topology->branches) out << "#@ branch " << b.from << ' ' << b.to << ' ' << b.susceptance << '\n';
    for (std::size_t i = 0; i < m.topology->meters.size(); ++i) {
      const auto& mi = m.topology->meters[i];
      out << "#@ meter " << i + 1;
      if (mi.kind == MeterInfo::Kind::injection) {
        out << " injection " << mi.bus << '\n';
      } else {
        const auto& b = m.topology->branches[mi.branch];
        out << " flow " << b.from << ' ' << b.to << '\n';
      }
    }
  }
  out << "# " << m.N() << ' ' << m.K() << '\n';
  for (Eigen::Index r = 0; r < m.K(); ++r) {
    for (Eigen::Index c = 0; c < m.N(); ++c) out << (c ? " " : "") << m.H(r, c);
    out << '\n';
  }
  out << m.sigma_v2 << ' ' << m.sigma_w2 << '\n';
  if (!m.A.isIdentity(0.0)) {
    for (Eigen::Index r = 0; r < m.N(); ++r) {
      for (Eigen::Index c = 0; c < m.N(); ++c) out << (c ? " " : "") << m.A(r, c);
      out << '\n';
    }
  }
}

LoadedSystem load_system(const std::filesystem::path& model_file, const std::filesystem::path& x0_file) {
  LoadedSystem ls{read_model_file(model_file), read_state_file(x0_file)};
  validate_model(ls.model);
  if (ls.x0.size() != ls.model.N())
    throw ModelError(x0_file.string() + ": initial state has " + std::to_string(ls.x0.size()) +
                     " entries, expected N = " + std::to_string(ls.model.N()));
  return ls;
}

namespace {

void check_state(const SystemModel& m, const Eigen::VectorXd& x) {
  if (x.size() != m.N())
    throw std::invalid_argument("state has length " + std::to_string(x.size()) + ", expected N = " +
                                std::to_string(m.N()));
}

}  // namespace

void step_state_into(const SystemModel& m, Eigen::VectorXd& x, Rng& rng, Eigen::VectorXd& scratch) {
  check_state(m, x);
  scratch.noalias() = m.A * x;
  x = scratch;
  if (m.sigma_v2 > 0.0) {
    std::normal_distribution<double> nd(0.0, std::sqrt(m.sigma_v2));
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += nd(rng);
  }
}

void measure_nominal_into(const SystemModel& m, const Eigen::VectorXd& x, Rng& rng, Eigen::VectorXd& y) {
  check_state(m, x);
  y.noalias() = m.H * x;
  if (m.sigma_w2 > 0.0) {
    std::normal_distribution<double> nd(0.0, std::sqrt(m.sigma_w2));
    for (Eigen::Index k = 0; k < y.size(); ++k) y(k) += nd(rng);
  }
}

Eigen::VectorXd step_state(const SystemModel& m, const Eigen::VectorXd& x, Rng& rng) {
  Eigen::VectorXd out = x, scratch(x.size());
  step_state_into(m, out, rng, scratch);
  return out;
}

Eigen::VectorXd measure_nominal(const SystemModel& m, const Eigen::VectorXd& x, Rng& rng) {
  Eigen::VectorXd y(m.K());
  measure_nominal_into(m, x, rng, y);
  return y;
}

GridTrajectory simulate_states(const SystemModel& m, const Eigen::VectorXd& x0, int horizon, Rng& rng) {
  GridTrajectory tr;
  tr.states.reserve(static_cast<std::size_t>(std::max(horizon, 0)));
  Eigen::VectorXd x = x0, scratch(x0.size());
  for (int t = 1; t <= horizon; ++t) {
    step_state_into(m, x, rng, scratch);
    tr.states.push_back(x);
  }
  return tr;
}

}  // namespace sgdetect
