#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <random>

#include "bdce/dictionary.hpp"

using namespace bdce;

namespace {
const ScenarioConfig& desk() {
  static const ScenarioConfig c = desk_scale();
  return c;
}
const SamplingGrid& grid() {
  static const SamplingGrid g = build_grid(desk(), 0.5);
  return g;
}
const Dictionary& dict() {
  static const Dictionary d = build_dictionary(grid(), desk());
  return d;
}
}  // namespace

TEST_CASE("grid sizes") {
  const SamplingGrid& g = grid();
  CHECK(g.K_an == 64);
  CHECK(g.K_de == 4);
  CHECK(g.K_sl == 6);
  CHECK(g.K == 64 * 6 * 4);
  CHECK(g.eta_delta == doctest::Approx(0.060119).epsilon(1e-4));
  CHECK(slope_coherence(g.eta_delta, desk()) == doctest::Approx(0.5).epsilon(1e-9));
  CHECK_FALSE(g.eta_fallback);

  ScenarioConfig f = full_scale();
  const SamplingGrid gf = build_grid(f, 0.5);
  CHECK(gf.K_an == 256);
  CHECK(gf.K_de == 16);
  CHECK(gf.tau_delta == doctest::Approx(0.625e-9).epsilon(1e-12));
}

TEST_CASE("midpoint samples") {
  const SamplingGrid& g = grid();
  CHECK(g.psi_grid.front() == doctest::Approx(-1 + g.psi_delta / 2));
  CHECK(g.eta_grid.front() == doctest::Approx(g.eta_delta / 2));
  CHECK(g.tau_grid.back() == doctest::Approx((g.K_de - 0.5) * g.tau_delta));
  for (double p : g.psi_grid) CHECK(std::abs(std::remainder(p + 1, g.psi_delta)) > 0.4 * g.psi_delta);
}

TEST_CASE("threshold unreachable falls back to one slope sample") {
  ScenarioConfig c = desk();
  c.N = 4;
  c.r_min = 1000;
  const SamplingGrid g = build_grid(c, 0.5);
  CHECK(g.eta_fallback);
  CHECK(g.K_sl == 1);
  CHECK(g.eta_grid[0] == doctest::Approx(c.eta_max() / 2));
  CHECK_FALSE(g.report.empty());
}

TEST_CASE("index map") {
  const SamplingGrid& g = grid();
  const auto t0 = g.index_map(0);
  CHECK((t0.k_an == 0 && t0.k_sl == 0 && t0.k_de == 0));
  const auto t1 = g.index_map(g.K_sl);
  CHECK((t1.k_an == 1 && t1.k_sl == 0 && t1.k_de == 0));
  for (int k = 0; k < g.K; k += 37) {
    const auto t = g.index_map(k);
    CHECK(g.flatten(t.k_an, t.k_sl, t.k_de) == k);
  }
  CHECK_THROWS_AS(g.index_map(g.K), Error);
}

TEST_CASE("dictionary columns") {
  const Dictionary& D = dict();
  const SamplingGrid& g = grid();
  REQUIRE(D.U.cols() == g.K);
  REQUIRE(D.U.rows() == desk().N * desk().Np);
  for (int k = 0; k < g.K; ++k) CHECK(D.U.col(k).norm() == doctest::Approx(std::sqrt(16.0)).epsilon(1e-10));
  // U_tau is U scaled by -j 2 pi f_p on each subcarrier
  for (int k : {0, 5, 777, g.K - 1})
    for (int p = 0; p < desk().Np; ++p) {
      const cd s(0, -2 * kPi * pilot_frequency(p, desk()));
      CHECK((D.U_tau.col(k).segment(p * 64, 64) - s * D.U.col(k).segment(p * 64, 64)).norm() <
            1e-12 * std::abs(s));
    }
}

TEST_CASE("derivatives match central differences") {
  const ScenarioConfig& c = desk();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> up(-0.9, 0.9), ue(0.01, 0.3), ut(0, c.tau_max);
  int checked = 0;
  while (checked < 20) {
    const double psi = up(rng), eta = ue(rng), tau = ut(rng);
    if (!amplitude_valid(eta * 1.01, psi, c)) continue;
    const auto d = dictionary_column_derivs(psi, eta, tau, c);
    const double hp = 1e-6 * grid().psi_delta, he = 1e-6 * grid().eta_delta, ht = 1e-6 * grid().tau_delta;
    const CVec fp = (dictionary_column(psi + hp, eta, tau, c) - dictionary_column(psi - hp, eta, tau, c)) / (2 * hp);
    const CVec fe = (dictionary_column(psi, eta + he, tau, c) - dictionary_column(psi, eta - he, tau, c)) / (2 * he);
    const CVec ft = (dictionary_column(psi, eta, tau + ht, c) - dictionary_column(psi, eta, tau - ht, c)) / (2 * ht);
    CHECK((d[0] - fp).norm() / fp.norm() < 1e-5);
    CHECK((d[1] - fe).norm() / fe.norm() < 1e-5);
    CHECK((d[2] - ft).norm() / ft.norm() < 1e-5);
    ++checked;
  }
}

TEST_CASE("on-grid representability") {
  const Dictionary& D = dict();
  std::mt19937_64 rng(11);
  for (int t = 0; t < 5; ++t) {
    std::vector<int> idx;
    const auto paths = on_grid_paths(rng, grid(), D, 3, &idx);
    CVec beta = CVec::Zero(grid().K);
    for (std::size_t l = 0; l < idx.size(); ++l) beta[idx[l]] = paths[l].alpha;
    const CVec h = synthesize_channel(paths, desk());
    CHECK((h - D.U * beta).norm() < 1e-12 * h.norm());
    for (std::size_t l = 0; l < idx.size(); ++l) CHECK(nearest_index(paths[l], grid()) == idx[l]);
  }
}

TEST_CASE("memory limit rejects oversized dictionaries") {
  const ScenarioConfig f = full_scale();
  const SamplingGrid g = build_grid(f, 0.5);
  CHECK_THROWS_AS(build_dictionary(g, f, 1e6), Error);
}

TEST_CASE("cache round trip") {
  ScenarioConfig c = desk();
  c.N = 16;
  c.Np = 4;
  const SamplingGrid g = build_grid(c, 0.5);
  const auto dir = std::filesystem::temp_directory_path() / "bdce_dict_test";
  std::filesystem::remove_all(dir);
  const Dictionary a = cached_dictionary(dir.string(), g, c, 0.5);
  const Dictionary b = cached_dictionary(dir.string(), g, c, 0.5);
  CHECK(std::distance(std::filesystem::directory_iterator(dir), {}) == 1);
  CHECK((a.U - b.U).norm() == 0.0);
  CHECK((a.U_eta - b.U_eta).norm() == 0.0);
  CHECK(a.fallback == b.fallback);
  const std::string key = dictionary_cache_key(c, 0.5);
  ScenarioConfig c2 = c;
  c2.r_min = 4;
  CHECK(dictionary_cache_key(c2, 0.5) != key);
  CHECK(dictionary_cache_key(c, 0.6) != key);
  Dictionary out;
  const auto file = (dir / ("dict_" + key + ".bin")).string();
  CHECK(load_dictionary(file, key, out));
  CHECK_FALSE(load_dictionary(file, "other", out));
  std::filesystem::remove_all(dir);
}
