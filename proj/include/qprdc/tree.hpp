#pragma once

// Quantization trees: per-date product quantizers of the model state and
// the per-step transition matrices, in two flavours — the 2D tree on the
// non-Markovian pair (X, Y) and the 4D tree on the Markov tuple
// (X, W^f, Y, W^d).

#include <cstdint>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "qprdc/model3f.hpp"
#include "qprdc/payoff.hpp"
#include "qprdc/quantizer1d.hpp"

namespace qprdc {

struct TreeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class TreeMode { TwoD, FourD };

// Per-dimension quantizer levels. TwoD uses (nx, ny); FourD additionally
// (nwf, nwd). Policy: nx ~ 10 ny in TwoD; nx ~ 4 nwf, ny ~ 4 nwd and
// nwf ~ 10 nwd in FourD.
struct GridSizes {
  TreeMode mode = TreeMode::TwoD;
  std::size_t nx = 1;
  std::size_t nwf = 1;  // 1 and unused in TwoD
  std::size_t ny = 1;
  std::size_t nwd = 1;  // 1 and unused in TwoD

  std::size_t total() const { return nx * nwf * ny * nwd; }
};

// Rounds a total-size budget into per-dimension levels under the ratio
// policy; the realized total stays within a factor 2 of the request.
GridSizes allocate_sizes(std::size_t n_total, TreeMode mode);

// One tree layer: the date and the rescaled 1D quantizer per dimension.
// Dimension order: TwoD -> {X, Y}; FourD -> {X, W^f, Y, W^d}. Node
// flattening is row-major over that order:
//   TwoD:  i = ix*ny + iy
//   FourD: i = ((ix*nwf + iwf)*ny + iy)*nwd + iwd.
struct DateLayer {
  double t = 0.0;
  std::vector<Grid1D> grids;

  std::size_t node_count() const;
  // Multi-index of a flat node index, in dimension order.
  std::vector<std::size_t> unflatten(std::size_t i) const;
};

enum class Provenance { Deterministic2D, DeterministicFactorized4D,
                        MonteCarlo4D };

// Row-stochastic transition matrix for one step, stored either dense or
// as a Kronecker pair pi = A (x) B where A acts on the (X[,W^f]) block
// and B on the (Y[,W^d]) block of the flat index.
struct TransitionMatrix {
  std::size_t step = 0;
  Provenance provenance = Provenance::Deterministic2D;
  bool factorized = false;
  Eigen::MatrixXd dense;     // used when !factorized
  Eigen::MatrixXd factor_a;  // used when factorized
  Eigen::MatrixXd factor_b;
  std::size_t mc_samples = 0;  // MonteCarlo4D only
  std::uint64_t mc_seed = 0;

  std::size_t rows() const;
  std::size_t cols() const;
  double entry(std::size_t i, std::size_t j) const;
  // pi * v: expected next-layer value per source node.
  Eigen::VectorXd apply(const Eigen::VectorXd& next_values) const;
};

// Layers at t_0 = 0 (single origin node) and at every exercise date.
struct QuantTree {
  TreeMode mode = TreeMode::TwoD;
  ModelParams params;
  GridSizes sizes;
  std::vector<DateLayer> layers;
};

// Builds the per-date product quantizers; grid variances come from
// state_cov. A degenerate dimension (zero variance) collapses to a single
// point at 0. Pass a cache to reuse standard grids across runs.
QuantTree build_tree(const ModelParams& params, const ProductSpec& spec,
                     const GridSizes& sizes,
                     const GridCache* cache = nullptr);

// Deterministic 2D transition matrix for step k -> k+1. Zero cross
// correlation factorizes into two 1D-mass factors; otherwise dense
// bivariate rectangle probabilities. cell_averaged integrates the source
// state over its Voronoi cell with a 3x3 Gauss-Legendre rule (validation
// studies only; the default conditions on the exact grid point).
TransitionMatrix transitions_2d(const QuantTree& tree, std::size_t k,
                                bool cell_averaged = false);

// 4D transition matrix for step k -> k+1. With rho_sd = rho_df = 0 the
// kernel factorizes exactly into deterministic (X,W^f) and (Y,W^d) pair
// transitions (rho_sf only couples dimensions inside the first pair);
// otherwise a Monte-Carlo estimate with common random numbers across
// source nodes is required.
struct McParams {
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};
TransitionMatrix transitions_4d(const QuantTree& tree, std::size_t k,
                                const std::optional<McParams>& mc = {});

// Transition matrix in the tree's own mode (dispatch helper).
TransitionMatrix transitions(const QuantTree& tree, std::size_t k,
                             const std::optional<McParams>& mc = {});

// Debug dump: per-layer node CSV (layer,node,coordinates...,weight) then
// per-step entries (step,i,j,p).
void dump_tree_csv(const QuantTree& tree, std::ostream& out,
                   const std::optional<McParams>& mc = {});

// Number of worker threads used for transition-row computation; 0 picks
// the hardware default, 1 disables threading. Output is identical for any
// setting (rows are independent and written in place).
void set_tree_threads(int threads);

}  // namespace qprdc
