#pragma once

// Scalar and bivariate Gaussian distribution functions used by the
// quantizer construction and the transition-probability computations.
// All functions here are pure and reentrant.

namespace qprdc {

// Correlation coefficient restricted to [-1, 1].
class Correlation {
 public:
  explicit Correlation(double rho);
  double value() const { return rho_; }

 private:
  double rho_;
};

// Standard normal density.
double norm_pdf(double x);

// Standard normal CDF, absolute error below 1e-15. Accepts +/-infinity.
double norm_cdf(double x);

// Inverse standard normal CDF. Throws std::domain_error for p outside (0,1).
double norm_inv_cdf(double p);

// Mass and conditional mean of a standard normal restricted to (a, b].
// Bounds may be +/-infinity. When the mass underflows (below 1e-300) the
// cell is flagged empty and the centroid is unusable.
struct CellMoments {
  double mass;
  double centroid;
  bool empty;
};
CellMoments gauss_cell_moments(double a, double b);

// P(U <= u, V <= v) for standardized bivariate normal with correlation rho.
// Drezner-Wesolowsky/Genz quadrature, |rho| split at 0.925; absolute error
// well below 1e-12. Accepts +/-infinity in either argument.
double bivar_cdf(double u, double v, Correlation rho);

// P(U in (u1,u2], V in (v1,v2]) via the four-corner CDF decomposition,
// clamped against negative rounding residue.
double bivar_rect_prob(double u1, double u2, double v1, double v2,
                       Correlation rho);

}  // namespace qprdc
