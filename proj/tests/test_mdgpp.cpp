#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "bdce/harness.hpp"
#include "bdce/mdgpp.hpp"

using namespace bdce;

namespace {

CMat rand_c(std::mt19937_64& rng, Eigen::Index m, Eigen::Index n) {
  std::normal_distribution<double> g;
  CMat A(m, n);
  for (Eigen::Index i = 0; i < A.size(); ++i) A.data()[i] = cd(g(rng), g(rng));
  return A;
}

// E||t - (G_rest + GD diag(x)) beta||^2 with independent beta_k of variance s2_k
double expected_misfit(const CMat& GD, const CMat& Gr, const CVec& t, const CVec& beta, const RVec& s2,
                       const RVec& x) {
  CMat Gt = Gr;
  for (Eigen::Index k = 0; k < x.size(); ++k) Gt.col(k) += x[k] * GD.col(k);
  double v = (t - Gt * beta).squaredNorm();
  for (Eigen::Index k = 0; k < x.size(); ++k) v += s2[k] * Gt.col(k).squaredNorm();
  return v;
}

struct Desk {
  ScenarioConfig cfg = desk_scale();
  SamplingGrid grid = build_grid(cfg, 0.5);
  Dictionary dict = build_dictionary(grid, cfg);
};
const Desk& desk() {
  static const Desk d;
  return d;
}

}  // namespace

TEST_CASE("prune") {
  CVec b(3);
  b << 1.0, 0.3, 0.04;
  CHECK(prune(b, 0.05) == std::vector<int>{0, 1});
  CHECK(prune(b, 1.0) == std::vector<int>{0});
  CVec z(4);
  z << 0.0, cd(0, 0.2), 0.0, -0.1;
  CHECK(prune(z, 0.0) == std::vector<int>{1, 3});
  CVec tie(3);
  tie << 0.5, cd(0, -0.5), 0.1;
  CHECK(prune(tie, 1.0) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(prune(CVec::Zero(3), 0.1), Error);
  CHECK_THROWS_AS(prune(b, 1.5), Error);
}

TEST_CASE("assemble_perturbed is the first-order model") {
  std::mt19937_64 rng(1);
  const CMat U = rand_c(rng, 10, 4), Up = rand_c(rng, 10, 4), Ue = rand_c(rng, 10, 4), Ut = rand_c(rng, 10, 4);
  Perturbations p;
  p.d_psi = p.d_eta = p.d_tau = RVec::Zero(4);
  CHECK((assemble_perturbed(U, Up, Ue, Ut, p) - U).norm() == 0.0);
  p.d_psi[2] = 0.01;
  const CMat D = assemble_perturbed(U, Up, Ue, Ut, p) - U;
  CHECK((D.col(2) - 0.01 * Up.col(2)).norm() < 1e-15);
  CHECK(D.col(0).norm() + D.col(1).norm() + D.col(3).norm() == 0.0);
}

// one family at a time; with the reference antenna at the array end the
// angle ramp reaches pi at half a cell and the linear model overshoots, so the
// angle family is checked with a centred reference
void taylor_sweep(const ScenarioConfig& cfg, Family fam, int count) {
  const SamplingGrid grid = build_grid(cfg, 0.5);
  const Dictionary dict = build_dictionary(grid, cfg);
  std::mt19937_64 rng(2 + static_cast<int>(fam));
  std::uniform_real_distribution<double> U(-0.5, 0.5);
  std::uniform_int_distribution<int> pick(0, grid.K - 1);
  int tested = 0;
  while (tested < count) {
    const int k = pick(rng);
    if (dict.fallback[k]) continue;
    double psi = grid.psi_of(k), eta = grid.eta_of(k), tau = grid.tau_of(k);
    const CVec grid_col = dict.U.col(k);
    CVec lin = grid_col;
    cd rot = 1.0;
    const double x = U(rng);
    if (fam == Family::Psi) {
      psi += x * grid.psi_delta;
      lin += x * grid.psi_delta * dict.U_psi.col(k);
    } else if (fam == Family::Eta) {
      eta += x * grid.eta_delta;
      lin += x * grid.eta_delta * dict.U_eta.col(k);
    } else {
      // the raw delay derivative carries 2 pi fc; the estimator absorbs that
      // common phase in beta, so compare after removing it
      const double dt = x * grid.tau_delta;
      tau += dt;
      rot = std::exp(cd(0, 2 * kPi * cfg.fc * dt));
      lin += dt * (dict.U_tau.col(k) + cd(0, 2 * kPi * cfg.fc) * grid_col);
    }
    if (std::abs(psi) >= 1 || !amplitude_valid(eta, psi, cfg)) continue;
    const CVec truth = rot * dictionary_column(psi, eta, tau, cfg);
    CHECK((truth - lin).norm() < (truth - grid_col).norm());
    ++tested;
  }
}

TEST_CASE("Taylor columns beat grid columns for offsets inside the cell") {
  ScenarioConfig centred = desk_scale();
  centred.n_o = centred.N / 2;
  SUBCASE("angle") { taylor_sweep(centred, Family::Psi, 300); }
  SUBCASE("slope") { taylor_sweep(desk_scale(), Family::Eta, 300); }
  SUBCASE("delay") { taylor_sweep(desk_scale(), Family::Tau, 300); }
}

TEST_CASE("build_qp matches the expected misfit expansion") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u01(0, 1);
  for (int K : {1, 2, 5}) {
    const CMat GD = rand_c(rng, 12, K), Gr = rand_c(rng, 12, K);
    const CVec t = rand_c(rng, 12, 1), beta = rand_c(rng, K, 1);
    RVec s2(K), x(K);
    for (int k = 0; k < K; ++k) {
      s2[k] = u01(rng);
      x[k] = u01(rng) - 0.5;
    }
    const QPProblem qp = build_qp(GD, Gr, t, beta, s2, 1.0);
    CHECK((qp.P - qp.P.transpose()).norm() == 0.0);
    const double f0 = expected_misfit(GD, Gr, t, beta, s2, RVec::Zero(K));
    const double fx = expected_misfit(GD, Gr, t, beta, s2, x);
    CHECK(qp_objective(qp, x) == doctest::Approx(fx - f0).epsilon(1e-10));
  }
  const CMat GD = rand_c(rng, 8, 3);
  const QPProblem z = build_qp(GD, GD, rand_c(rng, 8, 1), CVec::Zero(3), RVec::Zero(3), 1.0);
  CHECK(z.P.norm() == 0.0);
  CHECK(z.u.norm() == 0.0);
  CHECK_THROWS_AS(build_qp(GD, GD, CVec::Zero(7), CVec::Zero(3), RVec::Zero(3), 1.0), Error);
}

TEST_CASE("P is positive semidefinite") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const CMat GD = rand_c(rng, 16, 6);
    RVec s2 = RVec::Random(6).cwiseAbs();
    const QPProblem qp = build_qp(GD, GD, rand_c(rng, 16, 1), rand_c(rng, 6, 1), s2, 1.0);
    Eigen::SelfAdjointEigenSolver<RMat> es(qp.P);
    CHECK(es.eigenvalues().minCoeff() >= -1e-9 * std::max(1.0, es.eigenvalues().maxCoeff()));
  }
}

TEST_CASE("box QP") {
  SUBCASE("diagonal P gives elementwise clamp") {
    QPProblem qp;
    qp.P = RVec::Constant(4, 2.0).asDiagonal();
    qp.u = RVec(4);
    qp.u << 0.1, -5.0, 0.9, 3.0;
    qp.bound = 0.5;
    const RVec x = solve_qp_box(qp, 3);
    CHECK(x[0] == doctest::Approx(0.05).epsilon(1e-9));
    CHECK(x[1] == -0.5);
    CHECK(x[2] == doctest::Approx(0.45).epsilon(1e-9));
    CHECK(x[3] < 0.5);
    CHECK(x[3] == doctest::Approx(0.5));
  }
  SUBCASE("interior solution is the regularized solve") {
    RMat A = RMat::Random(3, 3);
    QPProblem qp;
    qp.P = A.transpose() * A + RMat::Identity(3, 3);
    qp.u = RVec::Constant(3, 0.01);
    qp.bound = 1.0;
    RMat Pr = qp.P;
    Pr.diagonal().array() += 1e-10 * qp.P.trace() / 3;
    CHECK((solve_qp_box(qp, 3) - Pr.fullPivLu().solve(qp.u)).norm() < 1e-12);
  }
  SUBCASE("coordinate passes never increase the objective and stay in the box") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (int t = 0; t < 30; ++t) {
      RMat A(6, 6);
      for (int i = 0; i < 36; ++i) A.data()[i] = g(rng);
      QPProblem qp;
      qp.P = A.transpose() * A;
      qp.u = RVec(6);
      for (int i = 0; i < 6; ++i) qp.u[i] = 4 * g(rng);
      qp.bound = 0.2;
      std::vector<double> trace;
      const RVec x = solve_qp_box(qp, 20, &trace);
      for (std::size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1] + 1e-10);
      CHECK(x.maxCoeff() < 0.2);
      CHECK(x.minCoeff() >= -0.2);
    }
  }
  SUBCASE("zero matrix returns zero") {
    QPProblem qp;
    qp.P = RMat::Zero(2, 2);
    qp.u = RVec::Ones(2);
    qp.bound = 1;
    CHECK(solve_qp_box(qp, 3).norm() == 0.0);
  }
}

TEST_CASE("two-stage pipeline") {
  const Desk& d = desk();
  std::mt19937_64 rng(trial_seed(77, 0));
  std::vector<int> idx;
  const auto paths = on_grid_paths(rng, d.grid, d.dict, d.cfg.L, &idx);
  const CVec h = synthesize_channel(paths, d.cfg);
  const HybridPrecoder F = build_precoder(rng, d.cfg);
  const CVec s = apply_measurement(h, F);
  const double sz2 = calibrate_noise(s, 30);
  const CVec y = add_noise(s, sz2, rng).y;
  const CMat G = measure_matrix(d.dict.U, F);
  const MdgppProblem pb{y, d.dict, d.grid, d.cfg, F, sz2};

  SUBCASE("on-grid refinement stays feasible and accurate") {
    const MdgppReport r = two_stage_estimate(pb, G);
    CHECK_FALSE(r.stage2_failed);
    CHECK(r.trace.size() == 30);
    CHECK(r.pert.inside());
    CHECK(nmse_ratio(r.h_hat, h) < 1e-2);
  }
  SUBCASE("E_th = 1 keeps a single atom") {
    MdgppOptions o;
    o.E_th = 1.0;
    o.T_ini = 20;
    o.T_ref = 5;
    const MdgppReport r = two_stage_estimate(pb, G, o);
    CHECK(r.support.size() == 1);
    CHECK(r.h_hat.allFinite());
    CHECK(r.pert.inside());
  }
  SUBCASE("trace csv") {
    MdgppOptions o;
    o.T_ini = 10;
    o.T_ref = 3;
    const MdgppReport r = two_stage_estimate(pb, G, o);
    const auto path = (std::filesystem::temp_directory_path() / "bdce_md_trace.csv").string();
    write_mdgpp_trace_csv(r.trace, path);
    std::ifstream f(path);
    std::string header;
    std::getline(f, header);
    CHECK(header == "iteration,nmse_proxy,max_abs_dpsi,max_abs_deta,max_abs_dtau");
    std::filesystem::remove(path);
  }
}
