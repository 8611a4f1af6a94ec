#include "qprdc/model3f.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace qprdc {

InitialCurve InitialCurve::flat(double rate) {
  InitialCurve c;
  c.flat_ = true;
  c.rate_ = rate;
  return c;
}

InitialCurve InitialCurve::tabulated(
    std::vector<std::pair<double, double>> pts) {
  if (pts.empty()) throw ModelError("InitialCurve: empty table");
  if (pts.front().first != 0.0 || pts.front().second != 1.0) {
    throw ModelError("InitialCurve: table must start at (0, 1)");
  }
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (i > 0 && !(pts[i].first > pts[i - 1].first)) {
      throw ModelError("InitialCurve: tenors not strictly increasing");
    }
    if (!(pts[i].second > 0.0 && pts[i].second <= 1.0)) {
      throw ModelError("InitialCurve: discounts must be in (0, 1]");
    }
  }
  InitialCurve c;
  c.flat_ = false;
  c.pts_ = std::move(pts);
  return c;
}

InitialCurve InitialCurve::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("InitialCurve: cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("tenor_years,discount", 0) != 0) {
    throw ModelError("InitialCurve: bad CSV header in " + path);
  }
  std::vector<std::pair<double, double>> pts;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b)) {
      throw ModelError("InitialCurve: bad CSV row in " + path);
    }
    pts.emplace_back(std::stod(a), std::stod(b));
  }
  return tabulated(std::move(pts));
}

double InitialCurve::discount(double t) const {
  if (t < 0.0) throw ModelError("InitialCurve: negative tenor");
  if (flat_) return std::exp(-rate_ * t);
  // Log-linear interpolation; flat-forward extrapolation past the last
  // tenor from the final segment.
  if (t <= 0.0) return 1.0;
  std::size_t hi = 1;
  while (hi + 1 < pts_.size() && pts_[hi].first < t) ++hi;
  const auto& [t0, d0] = pts_[hi - 1];
  const auto& [t1, d1] = pts_[hi];
  const double slope = (std::log(d1) - std::log(d0)) / (t1 - t0);
  return std::exp(std::log(d0) + slope * (t - t0));
}

void ModelParams::validate() const {
  if (!(s0 > 0.0)) throw ModelError("ModelParams: s0 must be > 0");
  if (sigma_s < 0.0 || sigma_d < 0.0 || sigma_f < 0.0) {
    throw ModelError("ModelParams: negative volatility");
  }
  Eigen::Matrix3d corr;
  corr << 1.0, rho_sd, rho_sf,  //
      rho_sd, 1.0, rho_df,      //
      rho_sf, rho_df, 1.0;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(corr);
  if (es.eigenvalues().minCoeff() < -1e-12) {
    throw ModelError("ModelParams: correlation matrix not PSD");
  }
  if (curve_d.discount(0.0) != 1.0 || curve_f.discount(0.0) != 1.0) {
    throw ModelError("ModelParams: curves must map 0 to 1");
  }
}

double phi_d(const ModelParams& p, double t) {
  return p.curve_d.discount(t) *
         std::exp(-p.sigma_d * p.sigma_d * t * t * t / 6.0);
}

double phi_f(const ModelParams& p, double t) {
  return p.curve_f.discount(t) *
         std::exp(-p.rho_sf * p.sigma_s * p.sigma_f * t * t / 2.0 -
                  p.sigma_f * p.sigma_f * t * t * t / 6.0);
}

namespace {

void check_psd(const Eigen::Matrix4d& m, const char* what) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(m);
  if (es.eigenvalues().minCoeff() < -1e-10 * std::max(1.0, m.norm())) {
    throw ModelError(std::string(what) + ": covariance not PSD");
  }
}

}  // namespace

StateCov state_cov(const ModelParams& p, double t) {
  if (t < 0.0) throw ModelError("state_cov: negative time");
  const double t2 = t * t, t3 = t * t * t;
  const double ss = p.sigma_s, sd = p.sigma_d, sf = p.sigma_f;
  StateCov m = StateCov::Zero();
  // Ordering (X, W^f, Y, W^d); every entry is an Ito isometry in closed
  // form under <W^S,W^d> = rho_sd t, <W^S,W^f> = rho_sf t,
  // <W^d,W^f> = rho_df t.
  m(0, 0) = ss * ss * t + p.rho_sf * ss * sf * t2 + sf * sf * t3 / 3.0;
  m(0, 1) = p.rho_sf * ss * t + sf * t2 / 2.0;
  m(0, 2) = -sd * (p.rho_sd * ss * t2 / 2.0 + p.rho_df * sf * t3 / 3.0);
  m(0, 3) = p.rho_sd * ss * t + p.rho_df * sf * t2 / 2.0;
  m(1, 1) = t;
  m(1, 2) = -p.rho_df * sd * t2 / 2.0;
  m(1, 3) = p.rho_df * t;
  m(2, 2) = sd * sd * t3 / 3.0;
  m(2, 3) = -sd * t2 / 2.0;
  m(3, 3) = t;
  m = m.selfadjointView<Eigen::Upper>();
  check_psd(m, "state_cov");
  return m;
}

IncrementCov increment_cov(const ModelParams& p, double t_k, double t_k1) {
  if (!(t_k >= 0.0 && t_k1 > t_k)) {
    throw ModelError("increment_cov: require 0 <= t_k < t_k1");
  }
  const double d = t_k1 - t_k;
  const double d2 = d * d, d3 = d * d * d;
  const double ss = p.sigma_s, sd = p.sigma_d, sf = p.sigma_f;
  IncrementCov m = IncrementCov::Zero();
  m(0, 0) = ss * ss * d + p.rho_sf * ss * sf * d2 + sf * sf * d3 / 3.0;
  m(0, 1) = p.rho_sf * ss * d + sf * d2 / 2.0;
  m(0, 2) = -sd * (p.rho_sd * ss * d2 / 2.0 + p.rho_df * sf * d3 / 3.0);
  m(0, 3) = p.rho_sd * ss * d + p.rho_df * sf * d2 / 2.0;
  m(1, 1) = d;
  m(1, 2) = -p.rho_df * sd * d2 / 2.0;
  m(1, 3) = p.rho_df * d;
  m(2, 2) = sd * sd * d3 / 3.0;
  m(2, 3) = -sd * d2 / 2.0;
  m(3, 3) = d;
  m = m.selfadjointView<Eigen::Upper>();
  check_psd(m, "increment_cov");
  return m;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
  Eigen::VectorXd ev = es.eigenvalues();
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (ev[i] < -1e-12 * std::max(1.0, cov.norm())) {
      throw ModelError("psd_sqrt: matrix has a negative eigenvalue");
    }
    ev[i] = std::sqrt(std::max(ev[i], 0.0));
  }
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

std::vector<Eigen::Matrix<double, 4, Eigen::Dynamic>> simulate_states(
    const ModelParams& p, const std::vector<double>& dates,
    std::size_t n_paths, std::uint64_t seed) {
  if (n_paths == 0) throw ModelError("simulate_states: n_paths must be >= 1");
  for (std::size_t k = 0; k < dates.size(); ++k) {
    if (dates[k] < 0.0 || (k > 0 && !(dates[k] > dates[k - 1]))) {
      throw ModelError("simulate_states: dates must be increasing and >= 0");
    }
  }
  const std::size_t n_steps = dates.size();
  // Per-step PSD factors; step 0 goes from time 0 to dates[0].
  std::vector<Eigen::Matrix4d> roots(n_steps);
  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t0 = (k == 0) ? 0.0 : dates[k - 1];
    if (dates[k] == t0) {
      roots[k].setZero();
    } else {
      roots[k] = psd_sqrt(increment_cov(p, t0, dates[k]));
    }
  }

  std::vector<Eigen::Matrix<double, 4, Eigen::Dynamic>> out(n_paths);
  for (std::size_t path = 0; path < n_paths; ++path) {
    // Per-path substream so results are independent of batching.
    std::seed_seq sseq{seed, static_cast<std::uint64_t>(path)};
    std::mt19937_64 rng(sseq);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Matrix<double, 4, Eigen::Dynamic> states(4, n_steps);
    Eigen::Vector4d s = Eigen::Vector4d::Zero();
    double t_prev = 0.0;
    for (std::size_t k = 0; k < n_steps; ++k) {
      Eigen::Vector4d z;
      for (int i = 0; i < 4; ++i) z[i] = gauss(rng);
      const Eigen::Vector4d g = roots[k] * z;
      const double delta = dates[k] - t_prev;
      Eigen::Vector4d next;
      next[0] = s[0] + p.sigma_f * delta * s[1] + g[0];
      next[1] = s[1] + g[1];
      next[2] = s[2] - p.sigma_d * delta * s[3] + g[2];
      next[3] = s[3] + g[3];
      s = next;
      states.col(static_cast<Eigen::Index>(k)) = s;
      t_prev = dates[k];
    }
    out[path] = std::move(states);
  }
  return out;
}

double spot_from_state(const ModelParams& p, double t, double x, double y,
                       double discount) {
  if (!(discount > 0.0)) {
    throw ModelError("spot_from_state: discount must be > 0");
  }
  return p.s0 * (phi_f(p, t) / discount) *
         std::exp(-p.sigma_s * p.sigma_s * t / 2.0 + x + y) * std::exp(-y);
}

double spot_from_state(const ModelParams& p, double t, double x, double y) {
  return spot_from_state(p, t, x, y, phi_d(p, t) * std::exp(-y));
}

}  // namespace qprdc
