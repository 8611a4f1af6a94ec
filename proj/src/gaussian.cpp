#include "qprdc/gaussian.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qprdc {
namespace {

constexpr double kSqrt2 = 1.4142135623730951;
constexpr double kInvSqrt2Pi = 0.3989422804014327;
constexpr double kTwoPi = 6.283185307179586;

// Arguments at or beyond this magnitude are treated as infinite bounds.
constexpr double kInfThreshold = 1e300;

bool is_pos_inf(double x) { return x >= kInfThreshold; }
bool is_neg_inf(double x) { return x <= -kInfThreshold; }

// Gauss-Legendre abscissae/weights used by the Drezner-Wesolowsky/Genz
// bivariate normal quadrature (6, 12 and 20 points; half stored, the
// other half comes from symmetry).
const double kGlX1[3] = {-0.9324695142031522, -0.6612093864662647,
                         -0.2386191860831970};
const double kGlW1[3] = {0.1713244923791705, 0.3607615730481384,
                         0.4679139345726904};
const double kGlX2[6] = {-0.9815606342467191, -0.9041172563704750,
                         -0.7699026741943050, -0.5873179542866171,
                         -0.3678314989981802, -0.1252334085114692};
const double kGlW2[6] = {0.04717533638651177, 0.1069393259953183,
                         0.1600783285433464,  0.2031674267230659,
                         0.2334925365383547,  0.2491470458134029};
const double kGlX3[10] = {-0.9931285991850949, -0.9639719272779138,
                          -0.9122344282513259, -0.8391169718222188,
                          -0.7463319064601508, -0.6360536807265150,
                          -0.5108670019508271, -0.3737060887154196,
                          -0.2277858511416451, -0.0765265211334973};
const double kGlW3[10] = {0.01761400713915212, 0.04060142980038694,
                          0.06267204833410906, 0.08327674157670475,
                          0.1019301198172404,  0.1181945319615184,
                          0.1316886384491766,  0.1420961093183821,
                          0.1491729864726037,  0.1527533871307259};

// Genz's BVND: P(X > dh, Y > dk) for standardized bivariate normal with
// correlation r, |r| < 1. Quadrature over the angle for |r| < 0.925,
// otherwise the complementary expansion in sqrt(1 - r^2).
double bvnd_upper(double dh, double dk, double r) {
  const double* x;
  const double* w;
  int lg;
  if (std::fabs(r) < 0.3) {
    x = kGlX1;
    w = kGlW1;
    lg = 3;
  } else if (std::fabs(r) < 0.75) {
    x = kGlX2;
    w = kGlW2;
    lg = 6;
  } else {
    x = kGlX3;
    w = kGlW3;
    lg = 10;
  }

  double h = dh;
  double k = dk;
  double hk = h * k;
  double bvn = 0.0;

  if (std::fabs(r) < 0.925) {
    if (std::fabs(r) > 0.0) {
      const double hs = (h * h + k * k) / 2.0;
      const double asr = std::asin(r);
      for (int i = 0; i < lg; ++i) {
        for (int is = -1; is <= 1; is += 2) {
          const double sn = std::sin(asr * (is * x[i] + 1.0) / 2.0);
          bvn += w[i] * std::exp((sn * hk - hs) / (1.0 - sn * sn));
        }
      }
      bvn = bvn * asr / (2.0 * kTwoPi);
    }
    return bvn + norm_cdf(-h) * norm_cdf(-k);
  }

  if (r < 0.0) {
    k = -k;
    hk = -hk;
  }
  const double as0 = (1.0 - r) * (1.0 + r);
  double a = std::sqrt(as0);
  const double bs = (h - k) * (h - k);
  const double c = (4.0 - hk) / 8.0;
  const double d = (12.0 - hk) / 16.0;
  double asr = -(bs / as0 + hk) / 2.0;
  if (asr > -100.0) {
    bvn = a * std::exp(asr) *
          (1.0 - c * (bs - as0) * (1.0 - d * bs / 5.0) / 3.0 +
           c * d * as0 * as0 / 5.0);
  }
  if (-hk < 100.0) {
    const double b = std::sqrt(bs);
    bvn -= std::exp(-hk / 2.0) * std::sqrt(kTwoPi) * norm_cdf(-b / a) * b *
           (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0);
  }
  a /= 2.0;
  for (int i = 0; i < lg; ++i) {
    for (int is = -1; is <= 1; is += 2) {
      const double xa = a * (is * x[i] + 1.0);
      const double xs = xa * xa;
      const double rs = std::sqrt(1.0 - xs);
      asr = -(bs / xs + hk) / 2.0;
      if (asr > -100.0) {
        bvn += a * w[i] * std::exp(asr) *
               (std::exp(-hk * (1.0 - rs) / (2.0 * (1.0 + rs))) / rs -
                (1.0 + c * xs * (1.0 + d * xs)));
      }
    }
  }
  bvn = -bvn / kTwoPi;
  if (r > 0.0) {
    return bvn + norm_cdf(-std::max(h, k));
  }
  bvn = -bvn;
  if (k > h) bvn += norm_cdf(k) - norm_cdf(h);
  return bvn;
}

}  // namespace

Correlation::Correlation(double rho) : rho_(rho) {
  if (!(rho >= -1.0 && rho <= 1.0)) {
    throw std::domain_error("Correlation outside [-1, 1]");
  }
}

double norm_pdf(double x) {
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

double norm_cdf(double x) {
  if (is_pos_inf(x)) return 1.0;
  if (is_neg_inf(x)) return 0.0;
  return 0.5 * std::erfc(-x / kSqrt2);
}

double norm_inv_cdf(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::domain_error("norm_inv_cdf requires 0 < p < 1");
  }
  // Acklam's rational approximation, then one Halley step against the
  // erfc-based CDF to push the result to full double precision.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) *
        q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q +
          c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = norm_cdf(x) - p;
  const double u = e / norm_pdf(x);
  x -= u / (1.0 + x * u / 2.0);
  return x;
}

CellMoments gauss_cell_moments(double a, double b) {
  if (a > b) throw std::invalid_argument("gauss_cell_moments: a > b");
  const double fa = norm_cdf(a);
  const double fb = norm_cdf(b);
  const double mass = fb - fa;
  const double pa = is_neg_inf(a) ? 0.0 : norm_pdf(a);
  const double pb = is_pos_inf(b) ? 0.0 : norm_pdf(b);
  if (mass < 1e-300) {
    return CellMoments{mass, 0.0, true};
  }
  return CellMoments{mass, (pa - pb) / mass, false};
}

double bivar_cdf(double u, double v, Correlation rho) {
  if (is_neg_inf(u) || is_neg_inf(v)) return 0.0;
  if (is_pos_inf(u)) return norm_cdf(v);
  if (is_pos_inf(v)) return norm_cdf(u);
  const double r = rho.value();
  if (r >= 1.0) return norm_cdf(std::min(u, v));
  if (r <= -1.0) return std::max(0.0, norm_cdf(u) + norm_cdf(v) - 1.0);
  const double p = bvnd_upper(-u, -v, r);
  return std::clamp(p, 0.0, 1.0);
}

double bivar_rect_prob(double u1, double u2, double v1, double v2,
                       Correlation rho) {
  if (u1 > u2 || v1 > v2) {
    throw std::invalid_argument("bivar_rect_prob: empty rectangle bounds");
  }
  const double p = bivar_cdf(u2, v2, rho) - bivar_cdf(u1, v2, rho) -
                   bivar_cdf(u2, v1, rho) + bivar_cdf(u1, v1, rho);
  // Rounding can leave a tiny negative residue; transition rows must stay
  // valid probability vectors.
  if (p < 0.0) return 0.0;
  return std::min(p, 1.0);
}

}  // namespace qprdc
