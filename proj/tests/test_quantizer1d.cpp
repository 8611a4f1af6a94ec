#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>

#include "qprdc/gaussian.hpp"
#include "qprdc/quantizer1d.hpp"

using namespace qprdc;

namespace {
constexpr double kPi = 3.141592653589793;
}

TEST_CASE("level 1 and 2 grids in closed form") {
  const Grid1D g1 = build_std_grid(1);
  CHECK(g1.points()[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(g1.weights()[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(g1.distortion() == doctest::Approx(1.0).epsilon(1e-12));

  // N=2 optimum: +/- sqrt(2/pi), distortion 1 - 2/pi.
  const Grid1D g2 = build_std_grid(2);
  CHECK(g2.points()[0] == doctest::Approx(-0.7978845608028654).epsilon(1e-10));
  CHECK(g2.points()[1] == doctest::Approx(0.7978845608028654).epsilon(1e-10));
  CHECK(g2.weights()[0] == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(g2.distortion() ==
        doctest::Approx(1.0 - 2.0 / kPi).epsilon(1e-10));
}

TEST_CASE("stationarity: every point is its cell centroid") {
  for (std::size_t n : {3, 7, 16, 65}) {
    const Grid1D g = build_std_grid(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double lo = (i == 0) ? -std::numeric_limits<double>::infinity()
                                 : g.midpoint(i - 1);
      const double hi = g.midpoint(i);
      const auto cm = gauss_cell_moments(lo, hi);
      REQUIRE_FALSE(cm.empty);
      CHECK(g.points()[i] == doctest::Approx(cm.centroid).epsilon(1e-9));
      CHECK(g.weights()[i] == doctest::Approx(cm.mass).epsilon(1e-10));
    }
  }
}

TEST_CASE("grids are symmetric with unit total mass") {
  for (std::size_t n : {2, 5, 10, 33, 128}) {
    const Grid1D g = build_std_grid(n);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sum += g.weights()[i];
      CHECK(g.points()[i] == doctest::Approx(-g.points()[n - 1 - i])
                                 .epsilon(1e-14)
                                 .scale(1.0));
      CHECK(g.weights()[i] ==
            doctest::Approx(g.weights()[n - 1 - i]).epsilon(1e-12));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("distortion decays at the Zador rate") {
  // For the standard normal, N^2 * D_N -> pi*sqrt(3)/2 ~ 2.7207.
  const Grid1D g = build_std_grid(200);
  const double scaled = 200.0 * 200.0 * g.distortion();
  // Finite-N grids sit about 1% below the limit at N=200.
  CHECK(scaled == doctest::Approx(kPi * std::sqrt(3.0) / 2.0).epsilon(2e-2));
  CHECK(scaled < kPi * std::sqrt(3.0) / 2.0);

  // Monotone decrease in N.
  double prev = build_std_grid(4).distortion();
  for (std::size_t n : {8, 16, 32}) {
    const double d = build_std_grid(n).distortion();
    CHECK(d < prev);
    prev = d;
  }
}

TEST_CASE("large level meets the stationarity tolerance") {
  const Grid1D g = build_std_grid(1000);
  // Spot-check extreme cells: masses positive and points increasing.
  CHECK(g.weights().front() > 0.0);
  CHECK(g.weights().back() > 0.0);
  CHECK(g.points().front() < -3.0);
  CHECK(g.points().back() > 3.0);
  CHECK(distortion_of(g) == doctest::Approx(g.distortion()).epsilon(1e-12));
}

TEST_CASE("rescale maps to the target mean and scale") {
  const Grid1D g = build_std_grid(9);
  const Grid1D h = rescale(g, 1.5, 0.25);
  CHECK(h.mean() == doctest::Approx(1.5));
  CHECK(h.stdev() == doctest::Approx(0.25));
  for (std::size_t i = 0; i < 9; ++i) {
    CHECK(h.points()[i] ==
          doctest::Approx(1.5 + 0.25 * g.points()[i]).epsilon(1e-14));
    CHECK(h.weights()[i] == g.weights()[i]);
  }
  CHECK(h.distortion() ==
        doctest::Approx(0.0625 * g.distortion()).epsilon(1e-14));
  CHECK_THROWS_AS(rescale(g, 0.0, -1.0), QuantizerError);
  CHECK_THROWS_AS(rescale(g, 0.0, 0.0), QuantizerError);
}

TEST_CASE("cell_index agrees with the Voronoi midpoints") {
  const Grid1D g = build_std_grid(12);
  CHECK(g.cell_index(-50.0) == 0);
  CHECK(g.cell_index(50.0) == 11);
  for (std::size_t i = 0; i + 1 < 12; ++i) {
    const double m = g.midpoint(i);
    CHECK(g.cell_index(m - 1e-9) == i);
    CHECK(g.cell_index(m + 1e-9) == i + 1);
  }
}

TEST_CASE("save/load round trip preserves the grid exactly") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "qprdc_grid_test";
  fs::create_directories(dir);
  const std::string path = (dir / "g17.qgrid").string();

  const Grid1D g = build_std_grid(17);
  save_grid(g, path);
  const Grid1D h = load_grid(path);
  REQUIRE(h.level() == 17);
  for (std::size_t i = 0; i < 17; ++i) {
    CHECK(h.points()[i] == g.points()[i]);
    CHECK(h.weights()[i] == g.weights()[i]);
  }
  fs::remove_all(dir);
}

TEST_CASE("load rejects malformed files") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "qprdc_grid_bad";
  fs::create_directories(dir);

  auto write = [&](const char* name, const char* body) {
    const fs::path p = dir / name;
    std::FILE* f = std::fopen(p.string().c_str(), "w");
    REQUIRE(f != nullptr);
    std::fputs(body, f);
    std::fclose(f);
    return p.string();
  };

  CHECK_THROWS_AS(load_grid(write("head.qgrid", "QGRIDX v9 N=2\n0 1\n")),
                  QuantizerError);
  CHECK_THROWS_AS(
      load_grid(write("count.qgrid", "QGRID1D v1 N=3\n-1 0.5\n1 0.5\n")),
      QuantizerError);
  CHECK_THROWS_AS(
      load_grid(write("order.qgrid", "QGRID1D v1 N=2\n1 0.5\n-1 0.5\n")),
      QuantizerError);
  CHECK_THROWS_AS(load_grid((dir / "missing.qgrid").string()), QuantizerError);
  fs::remove_all(dir);
}

TEST_CASE("grid cache returns identical grids and survives corruption") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "qprdc_cache_test";
  fs::remove_all(dir);

  const GridCache cache(dir.string());
  const Grid1D fresh = build_std_grid(23);
  const Grid1D first = cache.get_std_grid(23);   // builds and stores
  const Grid1D second = cache.get_std_grid(23);  // loads
  for (std::size_t i = 0; i < 23; ++i) {
    CHECK(first.points()[i] == doctest::Approx(fresh.points()[i]));
    CHECK(second.points()[i] == first.points()[i]);
  }

  // A corrupt cache entry must be rebuilt, not trusted.
  {
    std::FILE* f =
        std::fopen((dir / "std_N23.qgrid").string().c_str(), "w");
    REQUIRE(f != nullptr);
    std::fputs("garbage\n", f);
    std::fclose(f);
  }
  const Grid1D rebuilt = cache.get_std_grid(23);
  CHECK(rebuilt.level() == 23);
  CHECK(rebuilt.points()[0] == doctest::Approx(fresh.points()[0]));

  // Disabled cache still works.
  const GridCache off("");
  CHECK(off.get_std_grid(6).level() == 6);
  fs::remove_all(dir);
}
