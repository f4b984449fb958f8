#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "sgdetect/grid_model.hpp"

namespace testing {

inline std::filesystem::path data_path(const std::string& name) { return std::filesystem::path(SGDETECT_DATA_DIR) / name; }
inline std::filesystem::path preset_path(const std::string& name) {
  return std::filesystem::path(SGDETECT_PRESET_DIR) / name;
}

inline const sgdetect::LoadedSystem& ieee14() {
  static const sgdetect::LoadedSystem sys =
      sgdetect::load_system(data_path("ieee14.model"), data_path("ieee14.x0"));
  return sys;
}

inline sgdetect::SystemModel scalar_model(double a, double h, double sv2, double sw2) {
  sgdetect::SystemModel m;
  m.A = Eigen::MatrixXd::Constant(1, 1, a);
  m.H = Eigen::MatrixXd::Constant(1, 1, h);
  m.sigma_v2 = sv2;
  m.sigma_w2 = sw2;
  return m;
}

inline bool rel_close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max({1.0, std::abs(a), std::abs(b)});
}

struct Moments {
  double mean = 0, var = 0, skew = 0, exkurt = 0;
};

inline Moments moments(const std::vector<double>& x) {
  const double n = static_cast<double>(x.size());
  Moments m;
  for (double v : x) m.mean += v;
  m.mean /= n;
  double m2 = 0, m3 = 0, m4 = 0;
  for (double v : x) {
    const double d = v - m.mean;
    m2 += d * d;
    m3 += d * d * d;
    m4 += d * d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m4 /= n;
  m.var = m2 * n / (n - 1);
  m.skew = m3 / std::pow(m2, 1.5);
  m.exkurt = m4 / (m2 * m2) - 3.0;
  return m;
}

// Fresh temp directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("sgdetect_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& s) const { return path_ / s; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
