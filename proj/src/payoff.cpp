#include "qprdc/payoff.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace qprdc {
namespace {

void check_index(const ProductSpec& spec, std::size_t k) {
  if (k >= spec.n_dates()) {
    throw PayoffError("payoff: date index out of range");
  }
}

// Accepts either a scalar (broadcast) or an array of length n.
std::vector<double> broadcast(const nlohmann::json& j, const char* field,
                              std::size_t n) {
  if (!j.contains(field)) {
    throw PayoffError(std::string("product JSON: missing field ") + field);
  }
  const auto& v = j.at(field);
  if (v.is_number()) {
    return std::vector<double>(n, v.get<double>());
  }
  if (v.is_array()) {
    if (v.size() != n) {
      throw PayoffError(std::string("product JSON: field ") + field +
                        " has wrong length");
    }
    return v.get<std::vector<double>>();
  }
  throw PayoffError(std::string("product JSON: field ") + field +
                    " must be a number or an array");
}

}  // namespace

void ProductSpec::validate() const {
  const std::size_t n = n_dates();
  if (n == 0) throw PayoffError("ProductSpec: no exercise dates");
  if (cd.size() != n || cf.size() != n || cap.size() != n ||
      floor.size() != n) {
    throw PayoffError("ProductSpec: per-date vectors must match date count");
  }
  if (!(s0_ref > 0.0)) throw PayoffError("ProductSpec: s0_ref must be > 0");
  for (std::size_t k = 0; k < n; ++k) {
    if (!(exercise_dates[k] > 0.0)) {
      throw PayoffError("ProductSpec: exercise dates must be > 0");
    }
    if (k > 0 && !(exercise_dates[k] > exercise_dates[k - 1])) {
      throw PayoffError("ProductSpec: exercise dates not strictly increasing");
    }
    if (!(cf[k] > 0.0)) throw PayoffError("ProductSpec: Cf must be > 0");
    if (!(floor[k] <= cap[k])) {
      throw PayoffError("ProductSpec: floor must not exceed cap");
    }
  }
}

ProductSpec ProductSpec::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw PayoffError(std::string("product JSON: parse error: ") + e.what());
  }
  ProductSpec spec;
  try {
    if (!j.contains("exercise_dates") || !j.at("exercise_dates").is_array()) {
      throw PayoffError("product JSON: exercise_dates[] is required");
    }
    spec.exercise_dates = j.at("exercise_dates").get<std::vector<double>>();
    const std::size_t n = spec.exercise_dates.size();
    spec.cd = broadcast(j, "Cd", n);
    spec.cf = broadcast(j, "Cf", n);
    spec.cap = broadcast(j, "cap", n);
    spec.floor = broadcast(j, "floor", n);
    spec.s0_ref = j.at("s0_ref").get<double>();
    spec.include_t0_exercise = j.value("include_t0_exercise", false);
  } catch (const nlohmann::json::exception& e) {
    throw PayoffError(std::string("product JSON: ") + e.what());
  }
  spec.validate();
  return spec;
}

ProductSpec ProductSpec::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw PayoffError("product JSON: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

double prdc_payoff(const ProductSpec& spec, std::size_t k, double s) {
  check_index(spec, k);
  const double coupon = spec.cf[k] / spec.s0_ref * s - spec.cd[k];
  return std::min(std::max(coupon, spec.floor[k]), spec.cap[k]);
}

CallDecomposition call_decomposition(const ProductSpec& spec, std::size_t k) {
  check_index(spec, k);
  CallDecomposition d;
  d.floor_leg = spec.floor[k];
  d.a = spec.cf[k] / spec.s0_ref;
  d.k1 = (spec.cap[k] + spec.cd[k]) / spec.cf[k] * spec.s0_ref;
  d.k2 = (spec.floor[k] + spec.cd[k]) / spec.cf[k] * spec.s0_ref;
  return d;
}

double obstacle_h(const ModelParams& params, const ProductSpec& spec,
                  std::size_t k, double x, double y) {
  check_index(spec, k);
  const double t = spec.exercise_dates[k];
  return phi_d(params, t) * std::exp(-y) *
         prdc_payoff(spec, k, spot_from_state(params, t, x, y));
}

double obstacle_generic(const ModelParams& params, double t,
                        const SpotPayoff& psi, double x, double y) {
  if (!(t >= 0.0)) throw PayoffError("obstacle_generic: t must be >= 0");
  return phi_d(params, t) * std::exp(-y) *
         psi(spot_from_state(params, t, x, y));
}

}  // namespace qprdc
