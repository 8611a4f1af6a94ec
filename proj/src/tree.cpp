#include "qprdc/tree.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <thread>

#include "qprdc/gaussian.hpp"

namespace qprdc {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::atomic<int> g_threads{0};

// Runs fn(i) for i in [0, n); each index writes only its own output, so
// results are identical for any worker count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  int workers = g_threads.load();
  if (workers == 0) {
    workers = static_cast<int>(std::thread::hardware_concurrency());
  }
  workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  if (workers == 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
        fn(i);
      }
    });
  }
  for (auto& th : pool) th.join();
}

// Lower Voronoi bound of cell j (the upper bound of cell j is bound(j+1)).
double cell_bound(const Grid1D& g, std::size_t j) {
  return (j == 0) ? -kInf : g.midpoint(j - 1);
}

// Masses of N(m, s^2) over the Voronoi cells of the target grid.
Eigen::RowVectorXd line_masses(const Grid1D& g, double m, double s) {
  const std::size_t n = g.level();
  Eigen::RowVectorXd out(n);
  if (s == 0.0) {
    out.setZero();
    out[static_cast<Eigen::Index>(g.cell_index(m))] = 1.0;
    return out;
  }
  double prev = 0.0;  // Phi(-inf)
  for (std::size_t j = 0; j < n; ++j) {
    const double hi = g.midpoint(j);
    const double cur = (hi >= kInf) ? 1.0 : norm_cdf((hi - m) / s);
    out[static_cast<Eigen::Index>(j)] = std::max(cur - prev, 0.0);
    prev = cur;
  }
  return out;
}

// One transition row of a Gaussian pair: target cell probabilities of
// (U, V) ~ N((mu_u, mu_v), [[su^2, cov], [cov, sv^2]]) over the product
// Voronoi cells of gu x gv, flattened row-major (ju major).
Eigen::RowVectorXd pair_row(const Grid1D& gu, const Grid1D& gv, double mu_u,
                            double mu_v, double su, double sv, double cov) {
  const std::size_t nu = gu.level(), nv = gv.level();
  Eigen::RowVectorXd out(nu * nv);
  if (su == 0.0 || sv == 0.0) {
    const Eigen::RowVectorXd mu_masses = line_masses(gu, mu_u, su);
    const Eigen::RowVectorXd mv_masses = line_masses(gv, mu_v, sv);
    for (std::size_t ju = 0; ju < nu; ++ju) {
      for (std::size_t jv = 0; jv < nv; ++jv) {
        out[static_cast<Eigen::Index>(ju * nv + jv)] =
            mu_masses[static_cast<Eigen::Index>(ju)] *
            mv_masses[static_cast<Eigen::Index>(jv)];
      }
    }
    return out;
  }
  double r = cov / (su * sv);
  r = std::clamp(r, -1.0, 1.0);
  if (r == 0.0) {
    const Eigen::RowVectorXd mu_masses = line_masses(gu, mu_u, su);
    const Eigen::RowVectorXd mv_masses = line_masses(gv, mu_v, sv);
    for (std::size_t ju = 0; ju < nu; ++ju) {
      for (std::size_t jv = 0; jv < nv; ++jv) {
        out[static_cast<Eigen::Index>(ju * nv + jv)] =
            mu_masses[static_cast<Eigen::Index>(ju)] *
            mv_masses[static_cast<Eigen::Index>(jv)];
      }
    }
    return out;
  }

  // Shared corner CDFs: (nu+1) x (nv+1) evaluations instead of 4 per cell.
  const Correlation rho(r);
  // corner(p, q) is the CDF at the lower bounds of cells (p, q); index nu
  // (resp. nv) is the +inf bound, index 0 the -inf bound.
  Eigen::MatrixXd corner(nu + 1, nv + 1);
  for (std::size_t p = 0; p <= nu; ++p) {
    const double ub = (p == nu) ? kInf : (cell_bound(gu, p) - mu_u) / su;
    for (std::size_t q = 0; q <= nv; ++q) {
      const double vb = (q == nv) ? kInf : (cell_bound(gv, q) - mu_v) / sv;
      corner(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(q)) =
          bivar_cdf(ub, vb, rho);
    }
  }
  for (std::size_t ju = 0; ju < nu; ++ju) {
    for (std::size_t jv = 0; jv < nv; ++jv) {
      const auto pi = static_cast<Eigen::Index>(ju);
      const auto qi = static_cast<Eigen::Index>(jv);
      double p = corner(pi + 1, qi + 1);
      p -= (ju == 0) ? 0.0 : corner(pi, qi + 1);
      p -= (jv == 0) ? 0.0 : corner(pi + 1, qi);
      p += (ju == 0 || jv == 0) ? 0.0 : corner(pi, qi);
      // ju==0 / jv==0 use the -inf corner, whose CDF is exactly 0.
      out[static_cast<Eigen::Index>(ju * nv + jv)] = std::max(p, 0.0);
    }
  }
  return out;
}

Grid1D degenerate_grid(double point) {
  return Grid1D({point}, {1.0}, 0.0, point, 0.0);
}

Grid1D layer_grid(double variance, std::size_t level, const GridCache* cache) {
  if (variance <= 0.0) return degenerate_grid(0.0);
  const Grid1D std_grid =
      cache ? cache->get_std_grid(level) : build_std_grid(level);
  return rescale(std_grid, 0.0, std::sqrt(variance));
}

struct TwoDStepLaw {
  double var_z1;
  double var_z2;
  double cov;
};

// Law of the 2D increment (Z1, Z2) = (sigma_f delta W^f_{t_k} + G1,
// -sigma_d delta W^d_{t_k} + G3); the Brownian levels at t_k are
// independent of the increments over (t_k, t_{k+1}].
TwoDStepLaw two_d_step_law(const ModelParams& p, double t_k, double t_k1) {
  const double delta = t_k1 - t_k;
  const IncrementCov g = increment_cov(p, t_k, t_k1);
  TwoDStepLaw law;
  law.var_z1 = p.sigma_f * p.sigma_f * delta * delta * t_k + g(0, 0);
  law.var_z2 = p.sigma_d * p.sigma_d * delta * delta * t_k + g(2, 2);
  law.cov = -p.sigma_f * p.sigma_d * delta * delta * p.rho_df * t_k + g(0, 2);
  return law;
}

void check_step(const QuantTree& tree, std::size_t k) {
  if (k + 1 >= tree.layers.size()) {
    throw TreeError("transitions: step index out of range");
  }
}

}  // namespace

GridSizes allocate_sizes(std::size_t n_total, TreeMode mode) {
  if (n_total < 1) throw TreeError("allocate_sizes: N_total must be >= 1");
  GridSizes s;
  s.mode = mode;
  const auto nt = static_cast<double>(n_total);
  if (mode == TreeMode::TwoD) {
    s.ny = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(std::sqrt(nt / 10.0))));
    s.nx = std::max<std::size_t>(
        1, static_cast<std::size_t>(
               std::llround(nt / static_cast<double>(s.ny))));
  } else {
    // Solve 1600 m^4 = N_total for the ratio scale, round the three lower
    // levels, then pick nx to hit the requested total (like the TwoD rule)
    // so the realized size stays within a factor 2 of the request.
    const double m = std::pow(nt / 1600.0, 0.25);
    auto level = [](double v) {
      return std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(v)));
    };
    s.nwd = level(m);
    s.ny = level(4.0 * m);
    s.nwf = level(10.0 * m);
    s.nx = level(nt / static_cast<double>(s.nwd * s.ny * s.nwf));
  }
  return s;
}

std::size_t DateLayer::node_count() const {
  std::size_t n = 1;
  for (const auto& g : grids) n *= g.level();
  return n;
}

std::vector<std::size_t> DateLayer::unflatten(std::size_t i) const {
  std::vector<std::size_t> idx(grids.size());
  for (std::size_t d = grids.size(); d-- > 0;) {
    idx[d] = i % grids[d].level();
    i /= grids[d].level();
  }
  return idx;
}

std::size_t TransitionMatrix::rows() const {
  return factorized
             ? static_cast<std::size_t>(factor_a.rows() * factor_b.rows())
             : static_cast<std::size_t>(dense.rows());
}

std::size_t TransitionMatrix::cols() const {
  return factorized
             ? static_cast<std::size_t>(factor_a.cols() * factor_b.cols())
             : static_cast<std::size_t>(dense.cols());
}

double TransitionMatrix::entry(std::size_t i, std::size_t j) const {
  if (!factorized) {
    return dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const auto bc = static_cast<std::size_t>(factor_b.cols());
  const auto br = static_cast<std::size_t>(factor_b.rows());
  return factor_a(static_cast<Eigen::Index>(i / br),
                  static_cast<Eigen::Index>(j / bc)) *
         factor_b(static_cast<Eigen::Index>(i % br),
                  static_cast<Eigen::Index>(j % bc));
}

Eigen::VectorXd TransitionMatrix::apply(
    const Eigen::VectorXd& next_values) const {
  if (static_cast<std::size_t>(next_values.size()) != cols()) {
    throw TreeError("TransitionMatrix::apply: size mismatch");
  }
  if (!factorized) return dense * next_values;
  // v flattened row-major over (A-index, B-index); pi v = A V B^T.
  using RowMat =
      Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const Eigen::Map<const RowMat> v(next_values.data(), factor_a.cols(),
                                   factor_b.cols());
  const RowMat cont = factor_a * (v * factor_b.transpose());
  return Eigen::Map<const Eigen::VectorXd>(cont.data(), cont.size());
}

QuantTree build_tree(const ModelParams& params, const ProductSpec& spec,
                     const GridSizes& sizes, const GridCache* cache) {
  params.validate();
  spec.validate();
  if (sizes.nx < 1 || sizes.ny < 1 || sizes.nwf < 1 || sizes.nwd < 1) {
    throw TreeError("build_tree: grid levels must be >= 1");
  }
  QuantTree tree;
  tree.mode = sizes.mode;
  tree.params = params;
  tree.sizes = sizes;

  // Layer 0: the origin with weight 1 in every dimension.
  const std::size_t dims = (sizes.mode == TreeMode::TwoD) ? 2 : 4;
  DateLayer root;
  root.t = 0.0;
  root.grids.assign(dims, degenerate_grid(0.0));
  tree.layers.push_back(std::move(root));

  for (double t : spec.exercise_dates) {
    const StateCov cov = state_cov(params, t);
    DateLayer layer;
    layer.t = t;
    if (sizes.mode == TreeMode::TwoD) {
      layer.grids.push_back(layer_grid(cov(0, 0), sizes.nx, cache));
      layer.grids.push_back(layer_grid(cov(2, 2), sizes.ny, cache));
    } else {
      layer.grids.push_back(layer_grid(cov(0, 0), sizes.nx, cache));
      layer.grids.push_back(layer_grid(cov(1, 1), sizes.nwf, cache));
      layer.grids.push_back(layer_grid(cov(2, 2), sizes.ny, cache));
      layer.grids.push_back(layer_grid(cov(3, 3), sizes.nwd, cache));
    }
    tree.layers.push_back(std::move(layer));
  }
  return tree;
}

TransitionMatrix transitions_2d(const QuantTree& tree, std::size_t k,
                                bool cell_averaged) {
  if (tree.mode != TreeMode::TwoD) {
    throw TreeError("transitions_2d: tree mode is not TwoD");
  }
  check_step(tree, k);
  const DateLayer& src = tree.layers[k];
  const DateLayer& dst = tree.layers[k + 1];
  const ModelParams& p = tree.params;
  const TwoDStepLaw law = two_d_step_law(p, src.t, dst.t);
  const double su = std::sqrt(std::max(law.var_z1, 0.0));
  const double sv = std::sqrt(std::max(law.var_z2, 0.0));

  const Grid1D& gx_src = src.grids[0];
  const Grid1D& gy_src = src.grids[1];
  const Grid1D& gx = dst.grids[0];
  const Grid1D& gy = dst.grids[1];

  TransitionMatrix out;
  out.step = k;
  out.provenance = Provenance::Deterministic2D;

  if (p.zero_correlations() && !cell_averaged) {
    // Z1 and Z2 are independent: pi = pi^X (x) pi^Y from 1D masses.
    out.factorized = true;
    out.factor_a.resize(static_cast<Eigen::Index>(gx_src.level()),
                        static_cast<Eigen::Index>(gx.level()));
    out.factor_b.resize(static_cast<Eigen::Index>(gy_src.level()),
                        static_cast<Eigen::Index>(gy.level()));
    for (std::size_t i = 0; i < gx_src.level(); ++i) {
      out.factor_a.row(static_cast<Eigen::Index>(i)) =
          line_masses(gx, gx_src.points()[i], su);
    }
    for (std::size_t i = 0; i < gy_src.level(); ++i) {
      out.factor_b.row(static_cast<Eigen::Index>(i)) =
          line_masses(gy, gy_src.points()[i], sv);
    }
    return out;
  }

  out.factorized = false;
  const std::size_t n_src = src.node_count();
  out.dense.resize(static_cast<Eigen::Index>(n_src),
                   static_cast<Eigen::Index>(dst.node_count()));

  // 3x3 Gauss-Legendre rule on [-1, 1] for the cell-averaged variant.
  static const double kGlX[3] = {-0.7745966692414834, 0.0,
                                 0.7745966692414834};
  static const double kGlW[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
  const StateCov src_cov = state_cov(p, src.t);
  const double sx = std::sqrt(std::max(src_cov(0, 0), 0.0));
  const double sy = std::sqrt(std::max(src_cov(2, 2), 0.0));
  const double rxy = (sx > 0.0 && sy > 0.0)
                         ? std::clamp(src_cov(0, 2) / (sx * sy), -1.0, 1.0)
                         : 0.0;

  parallel_for(n_src, [&](std::size_t i) {
    const std::size_t i1 = i / gy_src.level();
    const std::size_t i2 = i % gy_src.level();
    const double x0 = gx_src.points()[i1];
    const double y0 = gy_src.points()[i2];
    if (!cell_averaged || (sx == 0.0 && sy == 0.0)) {
      out.dense.row(static_cast<Eigen::Index>(i)) =
          pair_row(gx, gy, x0, y0, su, sv, law.cov);
      return;
    }
    // Average the conditioning state over its Voronoi cell against the
    // joint density of (X_k, Y_k); infinite bounds truncated at 8 sigma.
    auto clip = [](double b, double c, double s) {
      if (b <= -kInf) return c - 8.0 * s;
      if (b >= kInf) return c + 8.0 * s;
      return b;
    };
    const double ax = clip(cell_bound(gx_src, i1), x0, sx);
    const double bx = clip(gx_src.midpoint(i1), x0, sx);
    const double ay = clip(cell_bound(gy_src, i2), y0, sy);
    const double by = clip(gy_src.midpoint(i2), y0, sy);
    Eigen::RowVectorXd row =
        Eigen::RowVectorXd::Zero(out.dense.cols());
    double total_w = 0.0;
    for (int a = 0; a < 3; ++a) {
      const double x = 0.5 * (ax + bx) + 0.5 * (bx - ax) * kGlX[a];
      for (int b = 0; b < 3; ++b) {
        const double y = 0.5 * (ay + by) + 0.5 * (by - ay) * kGlX[b];
        const double zx = (sx > 0.0) ? (x - 0.0) / sx : 0.0;
        const double zy = (sy > 0.0) ? (y - 0.0) / sy : 0.0;
        const double q = 1.0 - rxy * rxy;
        const double dens = std::exp(
            -(zx * zx - 2.0 * rxy * zx * zy + zy * zy) / (2.0 * q));
        const double w = kGlW[a] * kGlW[b] * dens;
        row += w * pair_row(gx, gy, x, y, su, sv, law.cov);
        total_w += w;
      }
    }
    out.dense.row(static_cast<Eigen::Index>(i)) = row / total_w;
  });
  return out;
}

TransitionMatrix transitions_4d(const QuantTree& tree, std::size_t k,
                                const std::optional<McParams>& mc) {
  if (tree.mode != TreeMode::FourD) {
    throw TreeError("transitions_4d: tree mode is not FourD");
  }
  check_step(tree, k);
  const DateLayer& src = tree.layers[k];
  const DateLayer& dst = tree.layers[k + 1];
  const ModelParams& p = tree.params;
  const double delta = dst.t - src.t;
  const IncrementCov g = increment_cov(p, src.t, dst.t);

  const Grid1D& sx = src.grids[0];
  const Grid1D& swf = src.grids[1];
  const Grid1D& sy = src.grids[2];
  const Grid1D& swd = src.grids[3];
  const Grid1D& dx = dst.grids[0];
  const Grid1D& dwf = dst.grids[1];
  const Grid1D& dy = dst.grids[2];
  const Grid1D& dwd = dst.grids[3];

  TransitionMatrix out;
  out.step = k;

  // The kernel splits into (X, W^f) x (Y, W^d) exactly when the two
  // Brownian pairs are independent: rho_sd = rho_df = 0 (rho_sf only
  // couples X with W^f, inside the first pair).
  if (p.rho_sd == 0.0 && p.rho_df == 0.0) {
    out.provenance = Provenance::DeterministicFactorized4D;
    out.factorized = true;
    const std::size_t a_src = sx.level() * swf.level();
    const std::size_t b_src = sy.level() * swd.level();
    out.factor_a.resize(static_cast<Eigen::Index>(a_src),
                        static_cast<Eigen::Index>(dx.level() * dwf.level()));
    out.factor_b.resize(static_cast<Eigen::Index>(b_src),
                        static_cast<Eigen::Index>(dy.level() * dwd.level()));
    const double s_g1 = std::sqrt(std::max(g(0, 0), 0.0));
    const double s_g2 = std::sqrt(std::max(g(1, 1), 0.0));
    const double s_g3 = std::sqrt(std::max(g(2, 2), 0.0));
    const double s_g4 = std::sqrt(std::max(g(3, 3), 0.0));
    parallel_for(a_src, [&](std::size_t i) {
      const double x0 = sx.points()[i / swf.level()];
      const double u0 = swf.points()[i % swf.level()];
      out.factor_a.row(static_cast<Eigen::Index>(i)) =
          pair_row(dx, dwf, x0 + p.sigma_f * delta * u0, u0, s_g1, s_g2,
                   g(0, 1));
    });
    parallel_for(b_src, [&](std::size_t i) {
      const double y0 = sy.points()[i / swd.level()];
      const double v0 = swd.points()[i % swd.level()];
      out.factor_b.row(static_cast<Eigen::Index>(i)) =
          pair_row(dy, dwd, y0 - p.sigma_d * delta * v0, v0, s_g3, s_g4,
                   g(2, 3));
    });
    return out;
  }

  if (!mc || mc->n_samples == 0) {
    throw TreeError(
        "transitions_4d: nonzero rho_sd/rho_df requires Monte-Carlo "
        "parameters");
  }
  out.provenance = Provenance::MonteCarlo4D;
  out.factorized = false;
  out.mc_samples = mc->n_samples;
  out.mc_seed = mc->seed;

  // Common random numbers: one batch of increment draws shared by every
  // source node, so each row is a frequency vector over the same samples.
  const Eigen::MatrixXd root = psd_sqrt(g);
  std::mt19937_64 rng(mc->seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Matrix<double, 4, Eigen::Dynamic> draws(
      4, static_cast<Eigen::Index>(mc->n_samples));
  for (Eigen::Index s = 0; s < draws.cols(); ++s) {
    Eigen::Vector4d z;
    for (int d = 0; d < 4; ++d) z[d] = gauss(rng);
    draws.col(s) = root * z;
  }

  const std::size_t n_src = src.node_count();
  out.dense.setZero(static_cast<Eigen::Index>(n_src),
                    static_cast<Eigen::Index>(dst.node_count()));
  const double weight = 1.0 / static_cast<double>(mc->n_samples);
  parallel_for(n_src, [&](std::size_t i) {
    const auto idx = src.unflatten(i);
    const double x0 = sx.points()[idx[0]];
    const double u0 = swf.points()[idx[1]];
    const double y0 = sy.points()[idx[2]];
    const double v0 = swd.points()[idx[3]];
    for (Eigen::Index s = 0; s < draws.cols(); ++s) {
      const std::size_t jx = dx.cell_index(x0 + p.sigma_f * delta * u0 +
                                           draws(0, s));
      const std::size_t ju = dwf.cell_index(u0 + draws(1, s));
      const std::size_t jy = dy.cell_index(y0 - p.sigma_d * delta * v0 +
                                           draws(2, s));
      const std::size_t jv = dwd.cell_index(v0 + draws(3, s));
      const std::size_t j =
          ((jx * dwf.level() + ju) * dy.level() + jy) * dwd.level() + jv;
      out.dense(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) +=
          weight;
    }
  });
  return out;
}

TransitionMatrix transitions(const QuantTree& tree, std::size_t k,
                             const std::optional<McParams>& mc) {
  return tree.mode == TreeMode::TwoD ? transitions_2d(tree, k)
                                     : transitions_4d(tree, k, mc);
}

void dump_tree_csv(const QuantTree& tree, std::ostream& out,
                   const std::optional<McParams>& mc) {
  out << "record,layer_or_step,node_or_i,coords_or_j,weight_or_p\n";
  char buf[64];
  for (std::size_t l = 0; l < tree.layers.size(); ++l) {
    const DateLayer& layer = tree.layers[l];
    for (std::size_t i = 0; i < layer.node_count(); ++i) {
      const auto idx = layer.unflatten(i);
      double w = 1.0;
      out << "node," << l << ',' << i << ',';
      for (std::size_t d = 0; d < idx.size(); ++d) {
        w *= layer.grids[d].weights()[idx[d]];
        std::snprintf(buf, sizeof buf, "%.17g", layer.grids[d].points()[idx[d]]);
        out << (d ? ";" : "") << buf;
      }
      std::snprintf(buf, sizeof buf, "%.17g", w);
      out << ',' << buf << '\n';
    }
  }
  for (std::size_t k = 0; k + 1 < tree.layers.size(); ++k) {
    const TransitionMatrix pi = transitions(tree, k, mc);
    for (std::size_t i = 0; i < pi.rows(); ++i) {
      for (std::size_t j = 0; j < pi.cols(); ++j) {
        std::snprintf(buf, sizeof buf, "%.17g", pi.entry(i, j));
        out << "transition," << k << ',' << i << ',' << j << ',' << buf
            << '\n';
      }
    }
  }
}

void set_tree_threads(int threads) {
  g_threads.store(std::max(0, threads));
}

}  // namespace qprdc
