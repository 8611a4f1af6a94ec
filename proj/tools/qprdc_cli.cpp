// Command-line front end: configuration ingestion, pricing/convergence
// experiment drivers and CSV emission on top of the qprdc library.
//
// Exit codes: 0 success, 2 configuration error, 3 numeric failure.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qprdc/closed_form.hpp"
#include "qprdc/mc_oracle.hpp"
#include "qprdc/pricer.hpp"
#include "qprdc/quantizer1d.hpp"
#include "qprdc/tree.hpp"

namespace {

using nlohmann::json;
using namespace qprdc;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  json doc;  // normalized config document; echoes round-trip to itself

  TreeMode mode() const {
    const std::string m = doc["engine"].value("mode", "2d");
    if (m == "2d") return TreeMode::TwoD;
    if (m == "4d") return TreeMode::FourD;
    throw ConfigError("engine.mode must be \"2d\" or \"4d\", got \"" + m +
                      "\"");
  }
  std::size_t n_total() const {
    const long long n = doc["engine"].value("N", 1000LL);
    if (n < 1) throw ConfigError("engine.N must be >= 1");
    return static_cast<std::size_t>(n);
  }
  std::size_t mc_samples() const {
    const long long n = doc["engine"].value("mc_samples", 0LL);
    if (n < 0) throw ConfigError("engine.mc_samples must be >= 0");
    return static_cast<std::size_t>(n);
  }
  std::uint64_t seed() const { return doc["engine"].value("seed", 1ULL); }
  int threads() const { return doc["engine"].value("threads", 0); }
  std::string cache_dir() const {
    return doc["engine"].value("cache_dir", std::string());
  }
  std::string out_csv() const {
    return doc["output"].value("csv", std::string());
  }
  bool retain_layers() const {
    return doc["output"].value("retain_layers", false);
  }
};

InitialCurve parse_curve(const json& j, const std::string& name) {
  if (!j.is_object()) {
    throw ConfigError("model." + name + " must be an object");
  }
  if (j.contains("flat_rate")) {
    return InitialCurve::flat(j.at("flat_rate").get<double>());
  }
  if (j.contains("csv")) {
    return InitialCurve::from_csv(j.at("csv").get<std::string>());
  }
  if (j.contains("tenors") && j.contains("discounts")) {
    const auto tenors = j.at("tenors").get<std::vector<double>>();
    const auto discounts = j.at("discounts").get<std::vector<double>>();
    if (tenors.size() != discounts.size()) {
      throw ConfigError("model." + name +
                        ": tenors and discounts differ in length");
    }
    std::vector<std::pair<double, double>> pts;
    pts.reserve(tenors.size());
    for (std::size_t i = 0; i < tenors.size(); ++i) {
      pts.emplace_back(tenors[i], discounts[i]);
    }
    return InitialCurve::tabulated(std::move(pts));
  }
  throw ConfigError("model." + name +
                    " needs flat_rate, csv, or tenors+discounts");
}

ModelParams parse_model(const json& j) {
  ModelParams p;
  p.s0 = j.at("s0").get<double>();
  p.sigma_s = j.at("sigma_s").get<double>();
  p.sigma_d = j.at("sigma_d").get<double>();
  p.sigma_f = j.at("sigma_f").get<double>();
  p.rho_sd = j.value("rho_sd", 0.0);
  p.rho_sf = j.value("rho_sf", 0.0);
  p.rho_df = j.value("rho_df", 0.0);
  p.curve_d = parse_curve(j.at("curve_d"), "curve_d");
  p.curve_f = parse_curve(j.at("curve_f"), "curve_f");
  p.validate();
  return p;
}

struct LoadedConfig {
  RunConfig run;
  ModelParams model;
  ProductSpec product;
};

LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json doc;
  in >> doc;
  if (!doc.contains("model")) throw ConfigError("config missing \"model\"");
  if (!doc.contains("product")) {
    throw ConfigError("config missing \"product\"");
  }
  if (!doc.contains("engine")) doc["engine"] = json::object();
  if (!doc.contains("output")) doc["output"] = json::object();

  LoadedConfig c;
  c.run.doc = doc;
  c.model = parse_model(doc["model"]);
  c.product = ProductSpec::from_json_text(doc["product"].dump());
  return c;
}

// Flag overrides mutate the config document so that the effective-config
// echo re-parses to exactly what was run.
struct FlagOverrides {
  std::string mode;
  long long n = -1;
  std::string n_list;
  long long mc_samples = -1;
  long long seed = -1;
  std::string out;
  int threads = -1;
  std::string cache_dir;
};

void apply_overrides(RunConfig& run, const FlagOverrides& f) {
  json& eng = run.doc["engine"];
  json& out = run.doc["output"];
  if (!f.mode.empty()) eng["mode"] = f.mode;
  if (f.n >= 0) eng["N"] = f.n;
  if (f.mc_samples >= 0) eng["mc_samples"] = f.mc_samples;
  if (f.seed >= 0) eng["seed"] = static_cast<std::uint64_t>(f.seed);
  if (f.threads >= 0) eng["threads"] = f.threads;
  if (!f.cache_dir.empty()) {
    eng["cache_dir"] = f.cache_dir;
  } else if (!eng.contains("cache_dir")) {
    if (const char* env = std::getenv("QPRDC_CACHE_DIR")) {
      eng["cache_dir"] = std::string(env);
    }
  }
  if (!f.out.empty()) out["csv"] = f.out;
}

std::vector<std::size_t> parse_n_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const long long v = std::stoll(tok);
    if (v < 1) throw ConfigError("--N-list entries must be >= 1");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigError("--N-list is empty");
  return out;
}

void write_csv(const std::string& path, const std::string& content) {
  if (path.empty()) return;
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open output file: " + path);
  out << content;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now() - t0)
      .count();
}

std::optional<McParams> mc_params_for(const LoadedConfig& c) {
  if (c.run.mc_samples() == 0) return std::nullopt;
  return McParams{c.run.mc_samples(), c.run.seed()};
}

// A correlated 4D tree has no deterministic transition kernel; demand an
// explicit Monte-Carlo budget up front rather than failing mid-build.
void check_engine_consistency(const LoadedConfig& c) {
  if (c.run.mode() == TreeMode::FourD &&
      (c.model.rho_sd != 0.0 || c.model.rho_df != 0.0) &&
      c.run.mc_samples() == 0) {
    throw ConfigError(
        "4d mode with rho_sd or rho_df nonzero requires --mc-samples");
  }
}

struct PricedRun {
  PriceResult result;
  GridSizes sizes;
  double wall_ms;
};

PricedRun run_price(const LoadedConfig& c, std::size_t n_total) {
  set_tree_threads(c.run.threads());
  const GridSizes sizes = allocate_sizes(n_total, c.run.mode());
  const std::string cache_dir = c.run.cache_dir();
  const GridCache cache(cache_dir);

  const auto t0 = std::chrono::steady_clock::now();
  const auto tb = std::chrono::steady_clock::now();
  QuantTree tree = build_tree(c.model, c.product, sizes,
                              cache_dir.empty() ? nullptr : &cache);
  const double build_ms = ms_since(tb);

  PricerOptions opt;
  opt.retain_layers = c.run.retain_layers();
  opt.mc = mc_params_for(c);
  PriceResult r = price_bermudan(tree, c.product, opt);
  r.build_ms = build_ms;
  return PricedRun{std::move(r), sizes, ms_since(t0)};
}

const char* mode_name(TreeMode m) {
  return m == TreeMode::TwoD ? "2d" : "4d";
}

int cmd_price(const LoadedConfig& c, bool echo_config) {
  check_engine_consistency(c);
  const PricedRun run = run_price(c, c.run.n_total());
  std::ostringstream csv;
  csv << "v0,mode,n_total,build_ms,transition_ms,induction_ms\n";
  csv.precision(17);
  csv << run.result.v0 << ',' << mode_name(c.run.mode()) << ','
      << run.sizes.total() << ',' << run.result.build_ms << ','
      << run.result.transition_ms << ',' << run.result.induction_ms << '\n';
  std::cout << csv.str();
  write_csv(c.run.out_csv(), csv.str());
  if (echo_config) std::cerr << c.run.doc.dump(2) << '\n';
  return 0;
}

int cmd_convergence(const LoadedConfig& c, const std::string& n_list_arg) {
  check_engine_consistency(c);
  std::vector<std::size_t> ns = parse_n_list(
      n_list_arg.empty() ? std::to_string(c.run.n_total()) : n_list_arg);

  // Reference: closed form for a single-date (European) product, else the
  // largest-N run of the configured mode.
  double reference = 0.0;
  std::vector<PricedRun> runs;
  runs.reserve(ns.size());
  for (std::size_t n : ns) runs.push_back(run_price(c, n));
  if (c.product.n_dates() == 1) {
    reference =
        european_prdc(c.model, c.product, c.product.exercise_dates[0]);
  } else {
    std::size_t best = 0;
    for (std::size_t i = 1; i < ns.size(); ++i) {
      if (ns[i] > ns[best]) best = i;
    }
    reference = runs[best].result.v0;
  }

  std::ostringstream csv;
  csv << "N,v0,rel_error,wall_ms\n";
  csv.precision(17);
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double v0 = runs[i].result.v0;
    const double rel = std::fabs(v0 - reference) / std::fabs(reference);
    csv << ns[i] << ',' << v0 << ',' << rel << ',' << runs[i].wall_ms
        << '\n';
  }
  std::cout << csv.str();
  write_csv(c.run.out_csv(), csv.str());
  return 0;
}

int cmd_quantize(const RunConfig& run, long long n_flag,
                 const std::string& out) {
  const std::size_t n =
      n_flag >= 1 ? static_cast<std::size_t>(n_flag) : run.n_total();
  const std::string cache_dir = run.cache_dir();
  const Grid1D grid = cache_dir.empty()
                          ? build_std_grid(n)
                          : GridCache(cache_dir).get_std_grid(n);
  if (!out.empty()) save_grid(grid, out);
  std::cout.precision(17);
  std::cout << "N=" << n << " distortion=" << grid.distortion()
            << " N_sqrt_distortion="
            << static_cast<double>(n) * std::sqrt(grid.distortion()) << '\n';
  return 0;
}

int cmd_mc_check(const LoadedConfig& c) {
  if (c.product.n_dates() != 1) {
    throw ConfigError("mc-check needs a single-date product");
  }
  const std::size_t n_paths =
      c.run.mc_samples() > 0 ? c.run.mc_samples() : 1000000;
  const double t = c.product.exercise_dates[0];
  const double want = european_prdc(c.model, c.product, t);
  const McEstimate est = mc_european(c.model, c.product, n_paths,
                                     c.run.seed());
  const double z = (est.value - want) / est.stderr_;
  std::ostringstream csv;
  csv << "value,stderr,reference,z,n_paths\n";
  csv.precision(17);
  csv << est.value << ',' << est.stderr_ << ',' << want << ',' << z << ','
      << n_paths << '\n';
  std::cout << csv.str();
  write_csv(c.run.out_csv(), csv.str());
  if (std::fabs(z) > 4.0) {
    std::cerr << "mc-check: |z| = " << std::fabs(z)
              << " exceeds 4 standard errors\n";
    return 3;
  }
  return 0;
}

int cmd_dump_tree(const LoadedConfig& c) {
  check_engine_consistency(c);
  set_tree_threads(c.run.threads());
  const QuantTree tree = build_tree(
      c.model, c.product, allocate_sizes(c.run.n_total(), c.run.mode()));
  const std::string path = c.run.out_csv();
  if (path.empty()) {
    dump_tree_csv(tree, std::cout, mc_params_for(c));
  } else {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot open output file: " + path);
    dump_tree_csv(tree, out, mc_params_for(c));
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"PRDC quantization-tree pricing toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  FlagOverrides flags;
  bool echo_config = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--mode", flags.mode, "tree mode: 2d or 4d")
      ->check(CLI::IsMember({"2d", "4d"}));
  app.add_option("--N", flags.n, "total node budget per layer");
  app.add_option("--N-list", flags.n_list,
                 "comma-separated budgets for convergence sweeps");
  app.add_option("--mc-samples", flags.mc_samples,
                 "Monte-Carlo samples (transition rows / mc-check paths)");
  app.add_option("--seed", flags.seed, "random seed");
  app.add_option("--out", flags.out, "CSV output path");
  app.add_option("--threads", flags.threads,
                 "worker threads (0 = hardware default)");
  app.add_option("--cache-dir", flags.cache_dir,
                 "quantizer grid cache directory (env QPRDC_CACHE_DIR)");
  app.add_flag("--echo-config", echo_config,
               "print the effective configuration to stderr");
  app.fallthrough();

  CLI::App* quantize = app.add_subcommand("quantize",
                                          "build a 1D quantizer grid");
  CLI::App* price = app.add_subcommand("price", "price the configured "
                                                "product");
  CLI::App* convergence =
      app.add_subcommand("convergence", "price across a budget sweep");
  CLI::App* mc_check =
      app.add_subcommand("mc-check", "Monte-Carlo vs closed-form check");
  CLI::App* dump_tree =
      app.add_subcommand("dump-tree", "dump layers and transitions as CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (quantize->parsed()) {
      RunConfig run;
      if (!config_path.empty()) {
        run = load_config(config_path).run;
      } else {
        run.doc = {{"engine", json::object()}, {"output", json::object()}};
      }
      apply_overrides(run, flags);
      return cmd_quantize(run, flags.n, flags.out);
    }

    if (config_path.empty()) {
      throw ConfigError("--config is required for this command");
    }
    LoadedConfig c = load_config(config_path);
    apply_overrides(c.run, flags);

    if (price->parsed()) return cmd_price(c, echo_config);
    if (convergence->parsed()) return cmd_convergence(c, flags.n_list);
    if (mc_check->parsed()) return cmd_mc_check(c);
    if (dump_tree->parsed()) return cmd_dump_tree(c);
    throw ConfigError("no command selected");
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const ModelError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const PayoffError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return 3;
  }
}
