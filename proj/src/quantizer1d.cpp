#include "qprdc/quantizer1d.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <unistd.h>

#include "qprdc/gaussian.hpp"

namespace qprdc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kLloydBudget = 10000;
constexpr std::size_t kNewtonBudget = 100;
constexpr double kLloydTol = 1e-8;
constexpr double kStationarityTol = 1e-10;

double upper_tail(double x) {
  return 0.5 * std::erfc(x / 1.4142135623730951);
}

// Phi(b) - Phi(a) without cancellation in the tails: evaluated as a
// difference of same-side tail probabilities.
double cell_mass(double a, double b) {
  if (a == -kInf && b == kInf) return 1.0;
  if (b == kInf) return upper_tail(a);
  if (a == -kInf) return upper_tail(-b);
  if (a + b > 0.0) return upper_tail(a) - upper_tail(b);
  return upper_tail(-b) - upper_tail(-a);
}

double pdf_or_zero(double x) {
  return std::isinf(x) ? 0.0 : norm_pdf(x);
}

// Distortion of a standard-normal quantizer from the cell-wise identity
// int_a^b (xi - z)^2 phi = [P + a phi(a) - b phi(b)] - 2 z [phi(a) - phi(b)]
//                          + z^2 P.
double std_distortion(const std::vector<double>& z) {
  const std::size_t n = z.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = (i == 0) ? -kInf : 0.5 * (z[i - 1] + z[i]);
    const double b = (i + 1 == n) ? kInf : 0.5 * (z[i] + z[i + 1]);
    const double p = cell_mass(a, b);
    const double pa = pdf_or_zero(a);
    const double pb = pdf_or_zero(b);
    const double i2 = p + (std::isinf(a) ? 0.0 : a * pa) -
                      (std::isinf(b) ? 0.0 : b * pb);
    const double i1 = pa - pb;
    total += i2 - 2.0 * z[i] * i1 + z[i] * z[i] * p;
  }
  return total;
}

// One Lloyd step: move every point to the conditional mean of its cell.
// Returns the sup-norm of the movement.
double lloyd_step(std::vector<double>& z) {
  const std::size_t n = z.size();
  std::vector<double> next(n);
  double move = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = (i == 0) ? -kInf : 0.5 * (z[i - 1] + z[i]);
    const double b = (i + 1 == n) ? kInf : 0.5 * (z[i] + z[i + 1]);
    const double p = cell_mass(a, b);
    const double m = pdf_or_zero(a) - pdf_or_zero(b);
    next[i] = (p > 0.0) ? m / p : z[i];
    move = std::max(move, std::fabs(next[i] - z[i]));
  }
  z = std::move(next);
  return move;
}

// Stationarity residual max_i |z_i - centroid(C_i)|.
double stationarity_residual(const std::vector<double>& z) {
  const std::size_t n = z.size();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = (i == 0) ? -kInf : 0.5 * (z[i - 1] + z[i]);
    const double b = (i + 1 == n) ? kInf : 0.5 * (z[i] + z[i + 1]);
    const double p = cell_mass(a, b);
    if (p <= 0.0) return kInf;
    const double c = (pdf_or_zero(a) - pdf_or_zero(b)) / p;
    worst = std::max(worst, std::fabs(z[i] - c));
  }
  return worst;
}

// Newton step on the distortion gradient g_i = 2 (z_i P_i - M_i); the
// Hessian is symmetric tridiagonal and solved by the Thomas algorithm.
// Returns false when the step had to be rejected (non-monotone result).
bool newton_step(std::vector<double>& z) {
  const std::size_t n = z.size();
  std::vector<double> diag(n), off(n > 0 ? n - 1 : 0), g(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = (i == 0) ? -kInf : 0.5 * (z[i - 1] + z[i]);
    const double b = (i + 1 == n) ? kInf : 0.5 * (z[i] + z[i + 1]);
    const double p = cell_mass(a, b);
    const double pa = pdf_or_zero(a);
    const double pb = pdf_or_zero(b);
    g[i] = 2.0 * (z[i] * p - (pa - pb));
    double h = 2.0 * p;
    if (i > 0) h -= 0.5 * (z[i] - z[i - 1]) * pa;
    if (i + 1 < n) h -= 0.5 * (z[i + 1] - z[i]) * pb;
    diag[i] = h;
    if (i + 1 < n) off[i] = -0.5 * (z[i + 1] - z[i]) * pb;
  }
  // Thomas forward sweep.
  std::vector<double> cp(n), dp(n);
  cp[0] = (n > 1) ? off[0] / diag[0] : 0.0;
  dp[0] = g[0] / diag[0];
  for (std::size_t i = 1; i < n; ++i) {
    const double denom = diag[i] - off[i - 1] * cp[i - 1];
    if (denom == 0.0) return false;
    if (i + 1 < n) cp[i] = off[i] / denom;
    dp[i] = (g[i] - off[i - 1] * dp[i - 1]) / denom;
  }
  std::vector<double> step(n);
  step[n - 1] = dp[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) step[i] = dp[i] - cp[i] * step[i + 1];

  // Damped update keeping the points strictly increasing.
  for (double damp = 1.0; damp >= 1.0 / 64.0; damp /= 2.0) {
    std::vector<double> trial(n);
    bool increasing = true;
    for (std::size_t i = 0; i < n; ++i) {
      trial[i] = z[i] - damp * step[i];
      if (i > 0 && trial[i] <= trial[i - 1]) {
        increasing = false;
        break;
      }
    }
    if (increasing) {
      z = std::move(trial);
      return true;
    }
  }
  return false;
}

std::vector<double> cell_weights(const std::vector<double>& z) {
  const std::size_t n = z.size();
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = (i == 0) ? -kInf : 0.5 * (z[i - 1] + z[i]);
    const double b = (i + 1 == n) ? kInf : 0.5 * (z[i] + z[i + 1]);
    w[i] = cell_mass(a, b);
  }
  return w;
}

std::string format_17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Grid1D::Grid1D(std::vector<double> points, std::vector<double> weights,
               double distortion, double mean, double stdev)
    : points_(std::move(points)),
      weights_(std::move(weights)),
      distortion_(distortion),
      mean_(mean),
      stdev_(stdev) {
  if (points_.empty() || points_.size() != weights_.size()) {
    throw QuantizerError("Grid1D: inconsistent sizes");
  }
  if (!(stdev_ >= 0.0)) throw QuantizerError("Grid1D: stdev must be >= 0");
  if (stdev_ == 0.0 && points_.size() != 1) {
    throw QuantizerError("Grid1D: degenerate law requires a single point");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (i > 0 && !(points_[i] > points_[i - 1])) {
      throw QuantizerError("Grid1D: points not strictly increasing");
    }
    if (!(weights_[i] > 0.0)) {
      throw QuantizerError("Grid1D: weights must be positive");
    }
    sum += weights_[i];
  }
  if (std::fabs(sum - 1.0) > 1e-12) {
    throw QuantizerError("Grid1D: weights do not sum to 1");
  }
}

double Grid1D::midpoint(std::size_t i) const {
  if (i + 1 >= points_.size()) return kInf;
  return 0.5 * (points_[i] + points_[i + 1]);
}

std::size_t Grid1D::cell_index(double xi) const {
  // Cells are (m_{i-1}, m_i]; lower_bound on midpoints gives the index.
  std::size_t lo = 0, hi = points_.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (xi <= midpoint(mid)) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return lo;
}

Grid1D build_std_grid(std::size_t n) {
  if (n == 0) throw QuantizerError("build_std_grid: level must be >= 1");
  if (n == 1) return Grid1D({0.0}, {1.0}, 1.0, 0.0, 1.0);

  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    z[i] = norm_inv_cdf((2.0 * (i + 1) - 1.0) / (2.0 * n));
  }

#ifndef NDEBUG
  double prev_distortion = std_distortion(z);
#endif
  std::size_t lloyd_used = 0;
  for (; lloyd_used < kLloydBudget; ++lloyd_used) {
    const double move = lloyd_step(z);
#ifndef NDEBUG
    const double dist = std_distortion(z);
    assert(dist <= prev_distortion + 1e-14);
    prev_distortion = dist;
#endif
    if (move <= kLloydTol) break;
    // Lloyd contracts slowly at high levels; hand over to Newton once the
    // iterate is in its basin.
    if (lloyd_used >= 50 && move < 1e-3) break;
  }

  for (std::size_t it = 0; it < kNewtonBudget; ++it) {
    if (stationarity_residual(z) <= kStationarityTol) break;
    if (!newton_step(z)) lloyd_step(z);
  }
  if (stationarity_residual(z) > kStationarityTol) {
    throw QuantizerError("build_std_grid: iteration budget exhausted at N=" +
                         std::to_string(n));
  }

  // Enforce the exact symmetry z_i = -z_{N+1-i} of the standard grid.
  for (std::size_t i = 0; i < n / 2; ++i) {
    const double s = 0.5 * (z[i] - z[n - 1 - i]);
    z[i] = s;
    z[n - 1 - i] = -s;
  }
  if (n % 2 == 1) z[n / 2] = 0.0;

  return Grid1D(z, cell_weights(z), std_distortion(z), 0.0, 1.0);
}

Grid1D rescale(const Grid1D& grid, double mu, double sigma) {
  if (!(sigma > 0.0)) throw QuantizerError("rescale: sigma must be > 0");
  std::vector<double> pts(grid.level());
  for (std::size_t i = 0; i < grid.level(); ++i) {
    pts[i] = mu + sigma * grid.points()[i];
  }
  return Grid1D(std::move(pts), grid.weights(),
                sigma * sigma * grid.distortion(), mu + sigma * grid.mean(),
                sigma * grid.stdev());
}

double distortion_of(const Grid1D& grid) {
  std::vector<double> std_pts(grid.level());
  for (std::size_t i = 0; i < grid.level(); ++i) {
    std_pts[i] = (grid.points()[i] - grid.mean()) / grid.stdev();
  }
  return grid.stdev() * grid.stdev() * std_distortion(std_pts);
}

void save_grid(const Grid1D& grid, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw QuantizerError("save_grid: cannot open " + path);
  out << "QGRID1D v1 N=" << grid.level() << "\n";
  for (std::size_t i = 0; i < grid.level(); ++i) {
    out << format_17(grid.points()[i]) << " " << format_17(grid.weights()[i])
        << "\n";
  }
  if (!out) throw QuantizerError("save_grid: write failed for " + path);
}

Grid1D load_grid(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw QuantizerError("load_grid: cannot open " + path);
  std::string magic, version, ntag;
  in >> magic >> version >> ntag;
  if (magic != "QGRID1D" || version != "v1" || ntag.rfind("N=", 0) != 0) {
    throw QuantizerError("load_grid: bad header in " + path);
  }
  std::size_t n = 0;
  try {
    n = std::stoul(ntag.substr(2));
  } catch (const std::exception&) {
    throw QuantizerError("load_grid: bad level in header of " + path);
  }
  if (n == 0) throw QuantizerError("load_grid: bad level in " + path);
  std::vector<double> pts(n), w(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(in >> pts[i] >> w[i])) {
      throw QuantizerError("load_grid: level mismatch in " + path);
    }
    if (i > 0 && !(pts[i] > pts[i - 1])) {
      throw QuantizerError("load_grid: points not increasing in " + path);
    }
  }
  double extra;
  if (in >> extra) {
    throw QuantizerError("load_grid: level mismatch in " + path);
  }
  return Grid1D(pts, w, std_distortion(pts), 0.0, 1.0);
}

Grid1D GridCache::get_std_grid(std::size_t n) const {
  if (dir_.empty()) return build_std_grid(n);
  namespace fs = std::filesystem;
  fs::create_directories(dir_);
  const fs::path file = fs::path(dir_) / ("std_N" + std::to_string(n) +
                                          ".qgrid");
  if (fs::exists(file)) {
    try {
      return load_grid(file.string());
    } catch (const QuantizerError&) {
      // Corrupt cache entry: rebuild below and overwrite.
    }
  }
  Grid1D grid = build_std_grid(n);
  const fs::path tmp = file.string() + ".tmp" + std::to_string(::getpid());
  save_grid(grid, tmp.string());
  fs::rename(tmp, file);
  return grid;
}

}  // namespace qprdc
