#include "bdce/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>
#include <thread>

#include "bdce/baselines.hpp"
#include "bdce/channel_model.hpp"
#include "bdce/dictionary.hpp"
#include "bdce/harness.hpp"
#include "bdce/hmp.hpp"
#include "bdce/kernels.hpp"
#include "bdce/mdgpp.hpp"
#include "bdce/measurement.hpp"

namespace bdce::checks {

namespace {

using clk = std::chrono::steady_clock;

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char b[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(b, sizeof b, f, ap);
  va_end(ap);
  return b;
}

struct Timer {
  clk::time_point t0 = clk::now();
  double s() const { return std::chrono::duration<double>(clk::now() - t0).count(); }
};

CVec randn_c(std::mt19937_64& rng, Eigen::Index n, double var = 1.0) {
  std::normal_distribution<double> g(0.0, std::sqrt(var / 2));
  CVec v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double re = g(rng), im = g(rng);
    v[i] = cd(re, im);
  }
  return v;
}

CMat randn_m(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double var = 1.0) {
  CMat m(r, c);
  for (Eigen::Index j = 0; j < c; ++j) m.col(j) = randn_c(rng, r, var);
  return m;
}

}  // namespace

Result kernel_equivalence(std::uint64_t seed) {
  Timer tm;
  Result r{"kernel_equivalence", false, {}, 0};
  const kern::Table* v = kern::avx2_table();
  if (!v) {
    r.pass = true;
    r.detail = "no SIMD table on this CPU; scalar only";
    return r;
  }
  const kern::Table& s = kern::scalar_table();
  std::mt19937_64 rng(seed);
  double worst = 0;
  for (auto [m, n] : {std::pair{1, 1}, {3, 5}, {17, 9}, {512, 37}, {513, 64}}) {
    const CMat A = randn_m(rng, m, n);
    const CVec x = randn_c(rng, n), z = randn_c(rng, m);
    CVec y1(m), y2(m), w1(n), w2(n);
    s.cmv(A.data(), m, n, x.data(), y1.data());
    v->cmv(A.data(), m, n, x.data(), y2.data());
    s.cmv_h(A.data(), m, n, z.data(), w1.data());
    v->cmv_h(A.data(), m, n, z.data(), w2.data());
    worst = std::max({worst, (y1 - y2).norm() / y1.norm(), (w1 - w2).norm() / w1.norm()});
    RMat B(m, n);
    s.abs2(A.data(), A.size(), B.data());
    RMat B2(m, n);
    v->abs2(A.data(), A.size(), B2.data());
    worst = std::max(worst, (B - B2).norm() / B.norm());
    const RVec xr = x.real(), zr = z.real();
    RVec a1(m), a2(m), b1(n), b2(n);
    s.rmv(B.data(), m, n, xr.data(), a1.data());
    v->rmv(B.data(), m, n, xr.data(), a2.data());
    s.rmv_t(B.data(), m, n, zr.data(), b1.data());
    v->rmv_t(B.data(), m, n, zr.data(), b2.data());
    worst = std::max({worst, (a1 - a2).norm() / a1.norm(), (b1 - b2).norm() / b1.norm()});
  }
  r.pass = worst < 1e-13;
  r.detail = fmt("max rel diff scalar vs %s = %.2e", v->name, worst);
  r.seconds = tm.s();
  return r;
}

Result denoiser_quadrature(int n, std::uint64_t seed) {
  Timer tm;
  Result r{"denoiser_quadrature", false, {}, 0};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const int Q = 400;
  double worst = 0;
  for (int t = 0; t < n; ++t) {
    double v, lam, chi;
    cd mu;
    if (t == 0) {
      mu = 1.0;
      v = 0.5;
      lam = 0.3;
      chi = 2.0;
    } else {
      v = 0.05 + 1.95 * U(rng);
      chi = 0.1 + 4.9 * U(rng);
      lam = 0.05 + 0.9 * U(rng);
      const double rad = 2 * std::sqrt(chi + v) * U(rng), th = 2 * kPi * U(rng);
      mu = std::polar(rad, th);
    }
    const BgMoments m = bg_denoiser(mu, v, lam, chi);
    // midpoint rule over the square |Re|,|Im| <= 6 sqrt(chi+v); spike handled exactly
    const double R = 6 * std::sqrt(chi + v), h = 2 * R / Q;
    double zc = 0, e2 = 0;
    cd e1 = 0;
    for (int i = 0; i < Q; ++i) {
      const double br = -R + (i + 0.5) * h;
      for (int k = 0; k < Q; ++k) {
        const cd b(br, -R + (k + 0.5) * h);
        const double w = lam / (kPi * chi) * std::exp(-std::norm(b) / chi) / (kPi * v) *
                         std::exp(-std::norm(mu - b) / v) * h * h;
        zc += w;
        e1 += w * b;
        e2 += w * std::norm(b);
      }
    }
    const double z0 = (1 - lam) / (kPi * v) * std::exp(-std::norm(mu) / v);
    const double Z = z0 + zc;
    const cd mean = e1 / Z;
    const double var = e2 / Z - std::norm(mean), pi = zc / Z;
    worst = std::max({worst, std::abs(mean - m.mean), std::abs(var - m.var), std::abs(pi - m.pi)});
  }
  r.pass = worst <= 1e-8;
  r.detail = fmt("%d tuples, max abs moment error %.2e (tol 1e-8)", n, worst);
  r.seconds = tm.s();
  return r;
}

CVec exact_bg_mmse(const CMat& G, const CVec& y, double s2, double lam, double chi) {
  const int K = int(G.cols());
  const Eigen::Index R = G.rows();
  std::vector<double> logw;
  std::vector<CVec> means;
  for (int mask = 0; mask < (1 << K); ++mask) {
    std::vector<int> S;
    for (int k = 0; k < K; ++k)
      if (mask >> k & 1) S.push_back(k);
    CMat C = s2 * CMat::Identity(R, R);
    CMat GS(R, Eigen::Index(S.size()));
    for (std::size_t i = 0; i < S.size(); ++i) GS.col(Eigen::Index(i)) = G.col(S[i]);
    C += chi * GS * GS.adjoint();
    Eigen::LLT<CMat> llt(C);
    const CVec Ciy = llt.solve(y);
    double logdet = 0;
    for (Eigen::Index i = 0; i < R; ++i) logdet += 2 * std::log(llt.matrixL()(i, i).real());
    logw.push_back(double(S.size()) * std::log(lam) + double(K - int(S.size())) * std::log1p(-lam) - logdet -
                   y.dot(Ciy).real());
    CVec m = CVec::Zero(K);
    const CVec mS = chi * (GS.adjoint() * Ciy);
    for (std::size_t i = 0; i < S.size(); ++i) m[S[i]] = mS[Eigen::Index(i)];
    means.push_back(m);
  }
  const double mx = *std::max_element(logw.begin(), logw.end());
  double Z = 0;
  CVec out = CVec::Zero(K);
  for (std::size_t i = 0; i < logw.size(); ++i) {
    const double w = std::exp(logw[i] - mx);
    Z += w;
    out += w * means[i];
  }
  return out / Z;
}

Result toy_mmse(int n, std::uint64_t seed) {
  Timer tm;
  Result r{"toy_mmse", false, {}, 0};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pickK(2, 8), pickR(12, 32);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const double lam = 0.3, chi = 1.0, s2 = 0.1;
  double worst = 0, med_acc = 0;
  std::vector<double> errs;
  for (int t = 0; t < n; ++t) {
    const int K = pickK(rng), R = pickR(rng);
    const CMat G = randn_m(rng, R, K, 1.0 / R);
    CVec b = CVec::Zero(K);
    const CVec g = randn_c(rng, K, chi);
    for (int k = 0; k < K; ++k)
      if (U(rng) < lam) b[k] = g[k];
    const CVec y = G * b + randn_c(rng, R, s2);
    const CVec ref = exact_bg_mmse(G, y, s2, lam, chi);
    HmpOptions o;
    o.learn = false;
    o.max_iter = 3000;
    o.tol = 1e-13;
    HmpSolver s(G, y, s2, o);
    s.reset_prior({lam, RVec::Constant(K, chi)});
    s.run(o.max_iter, o.tol);
    const double e = (s.state().beta_hat - ref).norm() / std::max(ref.norm(), 1e-300);
    errs.push_back(e);
    worst = std::max(worst, e);
  }
  std::sort(errs.begin(), errs.end());
  med_acc = errs[errs.size() / 2];
  r.pass = worst <= 1e-4;
  r.detail = fmt("%d problems (K 2-8, M*Np 12-32, SNR 10 dB): median rel err %.2e, max %.2e (tol 1e-4)", n,
                 med_acc, worst);
  r.seconds = tm.s();
  return r;
}

Result on_grid_recovery(int trials, std::uint64_t seed) {
  Timer tm;
  Result r{"on_grid_recovery", false, {}, 0};
  ExperimentSpec spec;
  spec.scenario = desk_scale();
  spec.sweep_var = "snr_db";
  spec.values = {std::numeric_limits<double>::infinity()};
  spec.trials = trials;
  spec.seed = seed;
  spec.on_grid = true;
  spec.estimators = {"hmp", "oracle"};
  spec.record_wall_time = false;
  const ExperimentResult res = run_experiment(spec);
  const double h = res.records[0].nmse_db, o = res.records[1].nmse_db;
  r.pass = h <= -40 && o <= -120 && res.records[0].trials == trials && res.records[1].trials == trials;
  r.detail = fmt("noiseless on-grid, %d trials: HMP %.2f dB (<= -40), LS oracle %.2f dB (<= -120)", trials, h, o);
  r.seconds = tm.s();
  return r;
}

Result qp_oracle(int n, std::uint64_t seed) {
  Timer tm;
  Result r{"qp_oracle", false, {}, 0};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pickK(1, 6);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::normal_distribution<double> g(0.0, 1.0);
  double worst_obj = 0, worst_int = 0;
  int boxed = 0;
  for (int t = 0; t < n; ++t) {
    const int K = pickK(rng);
    RMat A(K, K);
    for (int i = 0; i < K * K; ++i) A.data()[i] = g(rng);
    QPProblem qp;
    qp.P = A.transpose() * A;
    qp.u.resize(K);
    for (int i = 0; i < K; ++i) qp.u[i] = 3 * g(rng);
    qp.bound = 0.05 + 0.5 * U(rng);
    const RVec x = solve_qp_box(qp, 2000);

    // projected-gradient reference on the same regularized objective
    RMat Pr = qp.P;
    const double eps = 1e-10 * qp.P.trace() / K;
    Pr.diagonal().array() += eps;
    const double Lc = Eigen::SelfAdjointEigenSolver<RMat>(Pr).eigenvalues().maxCoeff();
    RVec z = RVec::Zero(K);
    for (int it = 0; it < 2000000; ++it) {
      const RVec zn = (z - (Pr * z - qp.u) / Lc).cwiseMax(-qp.bound).cwiseMin(qp.bound);
      const double step = (zn - z).lpNorm<Eigen::Infinity>();
      z = zn;
      if (step < 1e-16) break;
    }
    QPProblem reg{Pr, qp.u, qp.bound};
    const double fx = qp_objective(reg, x), fz = qp_objective(reg, z);
    worst_obj = std::max(worst_obj, std::abs(fx - fz));
    boxed += (x.cwiseAbs().maxCoeff() >= qp.bound * (1 - 1e-12));
  }
  for (int t = 0; t < n; ++t) {
    const int K = pickK(rng);
    RMat A(K, K);
    for (int i = 0; i < K * K; ++i) A.data()[i] = g(rng);
    QPProblem qp;
    qp.P = A.transpose() * A + RMat::Identity(K, K);
    qp.u.resize(K);
    for (int i = 0; i < K; ++i) qp.u[i] = 0.01 * g(rng);
    qp.bound = 10.0;
    const RVec x = solve_qp_box(qp, 3);
    RMat Pr = qp.P;
    Pr.diagonal().array() += 1e-10 * qp.P.trace() / K;
    const RVec ref = Pr.fullPivLu().solve(qp.u);
    worst_int = std::max(worst_int, (x - ref).lpNorm<Eigen::Infinity>());
  }
  r.pass = worst_obj <= 1e-6 && worst_int <= 1e-8;
  r.detail = fmt("%d boxed (%d active at bound): max |obj - PG| %.2e (1e-6); %d interior: max |x - P^-1 u| %.2e (1e-8)",
                 n, boxed, worst_obj, n, worst_int);
  r.seconds = tm.s();
  return r;
}

Result degeneration(int draws, std::uint64_t seed) {
  Timer tm;
  Result r{"degeneration", false, {}, 0};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  ScenarioConfig cfg = desk_scale();
  double far = 0, flat = 0, norm_err = 0, mod_err = 0;
  for (int t = 0; t < draws; ++t) {
    const double psi = -1 + 2 * U(rng);
    const double f = pilot_frequency(int(U(rng) * cfg.Np), cfg);
    // far field: eta = 0 against the classical ULA response
    const CVec c0 = beam_steering(0.0, psi, f, cfg);
    for (int n = 0; n < cfg.N; ++n) {
      const double ph = -2 * kPi * f * n * cfg.d_spacing * psi / kLight;
      far = std::max(far, std::abs(c0[n] - std::polar(1.0 / std::sqrt(double(cfg.N)), ph)));
    }
    // random valid near-field draw
    PathParams p;
    do {
      p.psi = -1 + 2 * U(rng);
      p.eta = U(rng) * cfg.eta_max();
    } while (!amplitude_valid(p.eta, p.psi, cfg));
    p.tau = U(rng) * cfg.tau_max;
    const CVec c = beam_steering(p.eta, p.psi, f, cfg);
    norm_err = std::max(norm_err, std::abs(c.norm() - 1));
    const CVec a = phase_steering(p.eta, p.psi, f, cfg), d = delay_steering(p.tau, cfg);
    for (int n = 0; n < cfg.N; ++n) mod_err = std::max(mod_err, std::abs(std::abs(a[n]) - 1));
    for (int q = 0; q < cfg.Np; ++q) mod_err = std::max(mod_err, std::abs(std::abs(d[q]) - 1));
    // no squint: every subcarrier block equals block 0 up to the delay phase
    ScenarioConfig flatc = cfg;
    flatc.beam_squint = false;
    const CVec h = synthesize_channel({p}, flatc);
    const CVec b0 = h.segment(0, cfg.N) / d[0];
    for (int q = 1; q < cfg.Np; ++q)
      flat = std::max(flat, (h.segment(Eigen::Index(q) * cfg.N, cfg.N) / d[q] - b0).cwiseAbs().maxCoeff());
  }
  r.pass = far <= 1e-10 && flat <= 1e-10 && norm_err <= 1e-12 && mod_err <= 1e-12;
  r.detail = fmt("%d draws: far-field %.1e, frequency-flat %.1e, |norm-1| %.1e, |mod-1| %.1e", draws, far, flat,
                 norm_err, mod_err);
  r.seconds = tm.s();
  return r;
}

Result derivatives(int cols, std::uint64_t seed) {
  Timer tm;
  Result r{"derivatives", false, {}, 0};
  const ScenarioConfig cfg = desk_scale();
  const SamplingGrid grid = build_grid(cfg);
  const Dictionary D = build_dictionary(grid, cfg);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, grid.K - 1);
  double worst[3] = {0, 0, 0};
  for (int t = 0; t < cols; ++t) {
    const int k = pick(rng);
    const double psi = grid.psi_of(k), eta = grid.eta_of(k), tau = grid.tau_of(k);
    const double hs[3] = {1e-6 * grid.psi_delta, 1e-6 * grid.eta_delta, 1e-6 * grid.tau_delta};
    const CMat* an[3] = {&D.U_psi, &D.U_eta, &D.U_tau};
    for (int f = 0; f < 3; ++f) {
      double p[3] = {psi, eta, tau}, m[3] = {psi, eta, tau};
      p[f] += hs[f];
      m[f] -= hs[f];
      const CVec fd = (dictionary_column(p[0], p[1], p[2], cfg) - dictionary_column(m[0], m[1], m[2], cfg)) /
                      (2 * hs[f]);
      const CVec a = an[f]->col(k);
      worst[f] = std::max(worst[f], (a - fd).norm() / a.norm());
    }
  }
  r.pass = worst[0] <= 1e-5 && worst[1] <= 1e-5 && worst[2] <= 1e-5;
  r.detail = fmt("%d columns, max rel err psi %.2e eta %.2e tau %.2e (tol 1e-5)", cols, worst[0], worst[1], worst[2]);
  r.seconds = tm.s();
  return r;
}

Result flop_scaling(std::uint64_t seed) {
  Timer tm;
  Result r{"flop_scaling", false, {}, 0};
  const ScenarioConfig cfg = desk_scale();
  const SamplingGrid grid = build_grid(cfg);
  const Dictionary D = build_dictionary(grid, cfg);
  std::mt19937_64 rng(seed);
  const auto paths = sample_paths(rng, cfg);
  const CVec h = synthesize_channel(paths, cfg);
  const HybridPrecoder F = build_precoder(rng, cfg);
  const CVec s = apply_measurement(h, F);
  const double sz2 = calibrate_noise(s, 15.0);
  const ReceivedSignal rx = add_noise(s, sz2, rng);
  const CMat G = measure_matrix(D.U, F);

  MdgppOptions opt;
  HmpSolver s1(G, rx.y, sz2, opt.hmp);
  s1.run(opt.T_ini, opt.hmp.tol);
  std::vector<int> order(grid.K);
  for (int k = 0; k < grid.K; ++k) order[k] = k;
  const CVec& b = s1.state().beta_hat;
  std::stable_sort(order.begin(), order.end(), [&](int a, int c) { return std::abs(b[a]) > std::abs(b[c]); });

  const std::vector<double> Ks{4, 8, 16, 32};
  std::vector<double> fl;
  const MdgppProblem pb{rx.y, D, grid, cfg, F, sz2};
  for (double Kr : Ks) {
    std::vector<int> S(order.begin(), order.begin() + int(Kr));
    std::sort(S.begin(), S.end());
    const MdgppReport rep = refine_on_support(pb, S, &s1, opt);
    fl.push_back(double(rep.refine_flops) / opt.T_ref);
  }
  // least-squares quadratic a K^2 + b K + c
  RMat A(4, 3);
  RVec f(4);
  for (int i = 0; i < 4; ++i) {
    A(i, 0) = Ks[i] * Ks[i];
    A(i, 1) = Ks[i];
    A(i, 2) = 1;
    f[i] = fl[i];
  }
  const RVec c = A.colPivHouseholderQr().solve(f);
  const RVec fit = A * c;
  double dev = 0;
  for (int i = 0; i < 4; ++i) dev = std::max(dev, std::abs(fit[i] - f[i]) / f[i]);
  const double MN = double(cfg.M()) * cfg.Np;
  const double slope = std::log(fl[3] / fl[2]) / std::log(2.0);
  r.pass = dev <= 0.15 && c[0] > 0;
  r.detail = fmt("flops/iter K=4,8,16,32: %.3g %.3g %.3g %.3g; fit a=%.1f*MN b=%.1f*MN c=%.3g; max dev %.2f%% "
                 "(<=15%%); log2 ratio 32/16 = %.2f",
                 fl[0], fl[1], fl[2], fl[3], c[0] / MN, c[1] / MN, c[2], 100 * dev, slope);
  r.seconds = tm.s();
  return r;
}

Result determinism(int trials, std::uint64_t seed) {
  Timer tm;
  Result r{"determinism", false, {}, 0};
  ExperimentSpec spec;
  spec.sweep_var = "snr_db";
  spec.values = {5, 15};
  spec.trials = trials;
  spec.seed = seed;
  spec.estimators = {"hmp", "mdgpp", "somp", "oracle"};
  spec.record_wall_time = false;
  spec.hmp.max_iter = 40;
  spec.mdgpp.T_ini = 20;
  spec.mdgpp.T_ref = 5;
  spec.threads = 1;
  const std::string a = csv_string(run_experiment(spec).records);
  const int many = int(std::max(4u, std::thread::hardware_concurrency()));
  spec.threads = many;
  const std::string b = csv_string(run_experiment(spec).records);
  r.pass = a == b;
  r.detail = fmt("%d trials x 2 values x 4 estimators; threads 1 vs %d: CSV %s (%zu bytes)", trials, many,
                 a == b ? "identical" : "DIFFERENT", a.size());
  r.seconds = tm.s();
  return r;
}

std::vector<Result> fast_suite() {
  return {kernel_equivalence(7), denoiser_quadrature(100, 11), qp_oracle(50, 13), degeneration(1000, 17),
          derivatives(50, 19)};
}

}  // namespace bdce::checks
