#include "qprdc/pricer.hpp"

#include <algorithm>
#include <chrono>

namespace qprdc {
namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start)
      .count();
}

// Obstacle vector h_k over all nodes of layer k+1 (date index k).
Eigen::VectorXd obstacle_vector(const QuantTree& tree, const ProductSpec& spec,
                                std::size_t date_k) {
  const DateLayer& layer = tree.layers[date_k + 1];
  const std::size_t n = layer.node_count();
  Eigen::VectorXd h(static_cast<Eigen::Index>(n));
  // x is dimension 0; y is dimension 1 (TwoD) or 2 (FourD).
  const std::size_t y_dim = (tree.mode == TreeMode::TwoD) ? 1 : 2;
  for (std::size_t i = 0; i < n; ++i) {
    const auto idx = layer.unflatten(i);
    const double x = layer.grids[0].points()[idx[0]];
    const double y = layer.grids[y_dim].points()[idx[y_dim]];
    h[static_cast<Eigen::Index>(i)] =
        obstacle_h(tree.params, spec, date_k, x, y);
  }
  return h;
}

void check_alignment(const QuantTree& tree, const ProductSpec& spec) {
  if (tree.layers.size() != spec.n_dates() + 1) {
    throw PricerError("pricer: tree layers do not match exercise dates");
  }
  for (std::size_t k = 0; k < spec.n_dates(); ++k) {
    if (tree.layers[k + 1].t != spec.exercise_dates[k]) {
      throw PricerError("pricer: tree dates do not match exercise dates");
    }
  }
}

}  // namespace

PriceResult price_bermudan(const QuantTree& tree, const ProductSpec& spec,
                           const PricerOptions& opt) {
  check_alignment(tree, spec);
  const std::size_t n = spec.n_dates();

  PriceResult res;
  res.mode = tree.mode;
  res.retained = opt.retain_layers;
  res.layer_sizes.reserve(n + 1);
  for (const auto& layer : tree.layers) {
    res.layer_sizes.push_back(layer.node_count());
  }
  res.exercise_flags.assign(n, {});
  if (opt.retain_layers) res.values.assign(n + 1, Eigen::VectorXd());

  // Terminal layer: value equals the obstacle everywhere.
  Eigen::VectorXd v = obstacle_vector(tree, spec, n - 1);
  res.exercise_flags[n - 1].assign(static_cast<std::size_t>(v.size()), 1);
  if (opt.retain_layers) res.values[n] = v;

  double transition_ms = 0.0;
  const auto sweep_start = Clock::now();
  for (std::size_t k = n - 1; k-- > 0;) {
    const auto t0 = Clock::now();
    const TransitionMatrix pi = transitions(tree, k + 1, opt.mc);
    transition_ms += ms_since(t0);
    const Eigen::VectorXd cont = pi.apply(v);
    const Eigen::VectorXd h = obstacle_vector(tree, spec, k);
    v = cont.cwiseMax(h);
    auto& flags = res.exercise_flags[k];
    flags.assign(static_cast<std::size_t>(v.size()), 0);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      flags[static_cast<std::size_t>(i)] = (h[i] >= cont[i]) ? 1 : 0;
    }
    if (opt.retain_layers) res.values[k + 1] = v;
  }

  {
    const auto t0 = Clock::now();
    const TransitionMatrix pi0 = transitions(tree, 0, opt.mc);
    transition_ms += ms_since(t0);
    const Eigen::VectorXd root = pi0.apply(v);
    res.v0 = root[0];
  }
  if (spec.include_t0_exercise) {
    res.v0 = std::max(res.v0, prdc_payoff(spec, 0, tree.params.s0));
  }
  if (opt.retain_layers) {
    res.values[0] = Eigen::VectorXd::Constant(1, res.v0);
  }
  res.transition_ms = transition_ms;
  res.induction_ms = ms_since(sweep_start) - transition_ms;
  return res;
}

PriceResult european_cubature(const QuantTree& tree, const ProductSpec& spec,
                              const PricerOptions& opt) {
  if (tree.layers.size() != 2) {
    throw PricerError("european_cubature: tree must have layers {t_0, T}");
  }
  return price_bermudan(tree, spec, opt);
}

std::vector<std::size_t> exercise_boundary(const PriceResult& result,
                                           std::size_t k) {
  if (!result.retained) {
    throw PricerError("exercise_boundary: layer retention disabled");
  }
  if (k >= result.exercise_flags.size()) {
    throw PricerError("exercise_boundary: date index out of range");
  }
  std::vector<std::size_t> nodes;
  const auto& flags = result.exercise_flags[k];
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (flags[i]) nodes.push_back(i);
  }
  return nodes;
}

}  // namespace qprdc
