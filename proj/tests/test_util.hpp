#pragma once

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace shield::testing {

// Relative error with a floor on the denominator so that exact zeros in both
// gradients compare equal.
inline double rel_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GradCheck {
  double max_rel = 0.0;
  std::size_t worst = 0;
  std::size_t checked = 0;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// Compares `analytic` against central differences of `f` at `x`.
inline GradCheck check_gradient(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                const std::vector<double>& analytic, double step = 1e-5) {
  GradCheck r;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + step;
    const double up = f(x);
    x[i] = keep - step;
    const double down = f(x);
    x[i] = keep;
    const double numeric = (up - down) / (2.0 * step);
    const double e = rel_error(analytic[i], numeric);
    if (e > r.max_rel) {
      r.max_rel = e;
      r.worst = i;
      r.analytic_at_worst = analytic[i];
      r.numeric_at_worst = numeric;
    }
    ++r.checked;
  }
  return r;
}

inline std::vector<double> random_vector(std::size_t n, unsigned seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (double& x : v) x = d(eng);
  return v;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("shield_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace shield::testing
