#include "qprdc/mc_oracle.hpp"

#include <cmath>
#include <random>

#include <Eigen/Dense>

namespace qprdc {

McEstimate mc_european(const ModelParams& params, const ProductSpec& spec,
                       std::size_t n_paths, std::uint64_t seed,
                       bool antithetic) {
  spec.validate();
  if (n_paths < 2) throw ModelError("mc_european: n_paths must be >= 2");
  const std::size_t k = spec.n_dates() - 1;
  const double t = spec.exercise_dates[k];

  const StateCov cov4 = state_cov(params, t);
  Eigen::Matrix2d cov;
  cov << cov4(0, 0), cov4(0, 2), cov4(0, 2), cov4(2, 2);
  const Eigen::Matrix2d root = psd_sqrt(cov);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n_paths; ++i) {
    Eigen::Vector2d z(gauss(rng), gauss(rng));
    const Eigen::Vector2d s = root * z;
    double sample = obstacle_h(params, spec, k, s[0], s[1]);
    if (antithetic) {
      const Eigen::Vector2d sa = -s;
      sample = 0.5 * (sample + obstacle_h(params, spec, k, sa[0], sa[1]));
    }
    sum += sample;
    sum_sq += sample * sample;
  }
  const double n = static_cast<double>(n_paths);
  const double mean = sum / n;
  const double var = std::max(sum_sq / n - mean * mean, 0.0) * n / (n - 1.0);

  McEstimate est;
  est.value = mean;
  est.stderr_ = std::sqrt(var / n);
  est.n_paths = n_paths;
  est.seed = seed;
  return est;
}

std::vector<double> mc_transition_row(const ModelParams& params,
                                      const QuantTree& tree, std::size_t k,
                                      std::size_t source_node,
                                      std::size_t n_samples,
                                      std::uint64_t seed) {
  if (k + 1 >= tree.layers.size()) {
    throw TreeError("mc_transition_row: step index out of range");
  }
  const DateLayer& src = tree.layers[k];
  const DateLayer& dst = tree.layers[k + 1];
  if (source_node >= src.node_count()) {
    throw TreeError("mc_transition_row: source node out of range");
  }
  if (n_samples == 0) {
    throw TreeError("mc_transition_row: n_samples must be >= 1");
  }
  const double delta = dst.t - src.t;
  const Eigen::MatrixXd g_root =
      psd_sqrt(increment_cov(params, src.t, dst.t));
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto idx = src.unflatten(source_node);
  std::vector<std::size_t> counts(dst.node_count(), 0);

  if (tree.mode == TreeMode::TwoD) {
    // The tree's 2D kernel treats the Brownian levels at t_k as fresh
    // unconditional draws; sample them jointly with their rho_df link.
    const double x0 = src.grids[0].points()[idx[0]];
    const double y0 = src.grids[1].points()[idx[1]];
    const double sw = std::sqrt(src.t);
    const double c = (std::fabs(params.rho_df) < 1.0)
                         ? std::sqrt(1.0 - params.rho_df * params.rho_df)
                         : 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) {
      const double zf = gauss(rng);
      const double zd = params.rho_df * zf + c * gauss(rng);
      const double wf = sw * zf;
      const double wd = sw * zd;
      Eigen::Vector4d z;
      for (int d = 0; d < 4; ++d) z[d] = gauss(rng);
      const Eigen::Vector4d g = g_root * z;
      const double x = x0 + params.sigma_f * delta * wf + g[0];
      const double y = y0 - params.sigma_d * delta * wd + g[2];
      const std::size_t jx = dst.grids[0].cell_index(x);
      const std::size_t jy = dst.grids[1].cell_index(y);
      ++counts[jx * dst.grids[1].level() + jy];
    }
  } else {
    const double x0 = src.grids[0].points()[idx[0]];
    const double u0 = src.grids[1].points()[idx[1]];
    const double y0 = src.grids[2].points()[idx[2]];
    const double v0 = src.grids[3].points()[idx[3]];
    for (std::size_t s = 0; s < n_samples; ++s) {
      Eigen::Vector4d z;
      for (int d = 0; d < 4; ++d) z[d] = gauss(rng);
      const Eigen::Vector4d g = g_root * z;
      const std::size_t jx =
          dst.grids[0].cell_index(x0 + params.sigma_f * delta * u0 + g[0]);
      const std::size_t ju = dst.grids[1].cell_index(u0 + g[1]);
      const std::size_t jy =
          dst.grids[2].cell_index(y0 - params.sigma_d * delta * v0 + g[2]);
      const std::size_t jv = dst.grids[3].cell_index(v0 + g[3]);
      ++counts[((jx * dst.grids[1].level() + ju) * dst.grids[2].level() + jy) *
                   dst.grids[3].level() +
               jv];
    }
  }

  std::vector<double> row(counts.size());
  for (std::size_t j = 0; j < counts.size(); ++j) {
    row[j] = static_cast<double>(counts[j]) / static_cast<double>(n_samples);
  }
  return row;
}

}  // namespace qprdc
