#pragma once

// Optimal quadratic quantizers of one-dimensional Gaussian laws:
// construction (Lloyd fixed point polished by Newton), rescaling,
// distortion evaluation and a text cache format.

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace qprdc {

struct QuantizerError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Optimal quantizer of N(mean, stdev^2): strictly increasing points,
// positive cell weights summing to 1, and the squared L2 quantization
// error of the grid. Immutable after construction.
class Grid1D {
 public:
  Grid1D(std::vector<double> points, std::vector<double> weights,
         double distortion, double mean, double stdev);

  std::size_t level() const { return points_.size(); }
  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& weights() const { return weights_; }
  double distortion() const { return distortion_; }
  double mean() const { return mean_; }
  double stdev() const { return stdev_; }

  // Voronoi midpoint between points i and i+1; the outermost boundaries
  // are -inf / +inf (support of a Gaussian).
  double midpoint(std::size_t i) const;

  // Index of the Voronoi cell containing xi.
  std::size_t cell_index(double xi) const;

 private:
  std::vector<double> points_;
  std::vector<double> weights_;
  double distortion_;
  double mean_;
  double stdev_;
};

// Builds the optimal quadratic quantizer of N(0,1) at level N.
// Throws QuantizerError if the iteration budget is exhausted before the
// stationarity tolerance (1e-10) is met.
Grid1D build_std_grid(std::size_t n);

// Maps a standard-normal grid to N(mu, sigma^2): points mu + sigma*z,
// weights unchanged, distortion scaled by sigma^2. Rejects sigma <= 0.
Grid1D rescale(const Grid1D& grid, double mu, double sigma);

// E[min_i (Z - z_i)^2] for Z ~ law(grid), in closed form per cell.
double distortion_of(const Grid1D& grid);

// Text cache, format: line 1 "QGRID1D v1 N=<N>", then N lines
// "<point> <weight>" with 17 significant digits in increasing point order.
void save_grid(const Grid1D& grid, const std::string& path);
Grid1D load_grid(const std::string& path);

// Directory-based cache keyed by level; an optimization only, results are
// identical with the cache disabled. Writes go through a temp file then a
// rename so concurrent builders do not corrupt each other.
class GridCache {
 public:
  // Empty dir disables the cache.
  explicit GridCache(std::string dir) : dir_(std::move(dir)) {}

  Grid1D get_std_grid(std::size_t n) const;

 private:
  std::string dir_;
};

}  // namespace qprdc
