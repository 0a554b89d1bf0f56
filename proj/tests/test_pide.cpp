#include <gtest/gtest.h>

#include <cmath>
#include <complex>
#include <random>

#include <cumjump/experiments.hpp>
#include <cumjump/pide.hpp>

#include "oracles.hpp"

using namespace cumjump;
using cd = std::complex<double>;

namespace {

GammaMixture baseline_marks() { return GammaMixture::make({0.6, 0.4}, {2.0, 6.0}, {4.0, 2.5}); }

std::vector<std::vector<double>> dense(const TriDiag& A) {
  const std::size_t n = A.size();
  std::vector<std::vector<double>> M(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    M[i][i] = A.diag[i];
    if (i > 0) M[i][i - 1] = A.sub[i - 1];
    if (i + 1 < n) M[i][i + 1] = A.super[i];
  }
  return M;
}

double sup_diff(const std::vector<cd>& a, const std::vector<cd>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

std::vector<cd> random_vector(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> U(-1, 1);
  std::vector<cd> v(n);
  for (auto& z : v) z = {U(rng), U(rng)};
  return v;
}

}  // namespace

TEST(SolverGrid, TilesHorizon) {
  const double T = 150.0 / 365.0;
  const auto g = SolverGrid::make(0, 450, 600, T, 1.0 / 365.0);
  EXPECT_EQ(g.N_t, 150);
  EXPECT_NEAR(g.N_t * g.dt, T, 1e-15);
  const auto g91 = SolverGrid::make(0, 450, 600, T, 1.0 / 91.0);
  EXPECT_EQ(g91.N_t, 37);
  EXPECT_NEAR(g91.N_t * g91.dt, T, 1e-15);
  EXPECT_EQ(g.size(), 601u);
  EXPECT_DOUBLE_EQ(g.node(600), 450.0);
  EXPECT_THROW(SolverGrid::make(1, 1, 10, T, 0.01), Error);
  EXPECT_THROW(SolverGrid::make(0, 1, 1, T, 0.01), Error);
}

TEST(ImplicitMatrix, DriftFreeIsScaledIdentity) {
  ModelParams m;
  m.kappa = 0.0;  // matrix assembly does not require a valid model
  m.r = 0.02;
  SolverGrid g = SolverGrid::make(0, 10, 20, 1.0, 1.0 / 365.0);
  g.dt = 1.0 / 365.0;
  const auto A = build_implicit_matrix(g, m);
  for (double d : A.diag) EXPECT_DOUBLE_EQ(d, 1.0 + 0.02 / 365.0);
  for (double s : A.sub) EXPECT_EQ(s, 0.0);
  for (double s : A.super) EXPECT_EQ(s, 0.0);
}

TEST(ImplicitMatrix, UpwindSignsBelowMeanLevel) {
  ModelParams m;
  const auto g = SolverGrid::make(0, 450, 600, m.T, 1.0 / 365.0);
  const auto A = build_implicit_matrix(g, m);
  // lambda = 1 is not a node at h = 0.75; use the node 0.75 < lambda_bar and also check lambda_i = 1 on a finer grid
  const auto g2 = SolverGrid::make(0, 10, 40, m.T, 1.0 / 365.0);
  const auto A2 = build_implicit_matrix(g2, m);
  const std::size_t i = 4;  // lambda = 1
  ASSERT_DOUBLE_EQ(g2.node(i), 1.0);
  const double mu = m.kappa * (m.lambda_bar - 1.0);
  EXPECT_NEAR(A2.super[i], -g2.dt * mu / g2.h(), 1e-15);
  EXPECT_LT(A2.super[i], 0.0);
  EXPECT_EQ(A2.sub[i - 1], 0.0);
  EXPECT_LT(A.super[1], 0.0);
  EXPECT_EQ(A.sub[0], 0.0);
}

TEST(ImplicitMatrix, ZMatrixWithExactDominanceMargin) {
  ModelParams m;
  for (double dt : {1.0 / 365.0, 1.0 / 52.0, 0.1})
    for (int N : {10, 50, 600}) {
      auto g = SolverGrid::make(0, 450, N, m.T, dt);
      const auto A = build_implicit_matrix(g, m);
      for (std::size_t i = 0; i < A.size(); ++i) {
        const double lo = i > 0 ? A.sub[i - 1] : 0.0;
        const double hi = i + 1 < A.size() ? A.super[i] : 0.0;
        EXPECT_LE(lo, 0.0);
        EXPECT_LE(hi, 0.0);
        EXPECT_NEAR(A.diag[i] - std::abs(lo) - std::abs(hi), 1.0 + g.dt * m.r, 1e-12);
      }
    }
}

TEST(ImplicitMatrix, VarahBoundOnDenseInverse) {
  ModelParams m;
  for (double dt : {1.0 / 365.0, 1.0 / 12.0, 0.4})
    for (int N : {5, 20, 49})
      for (double lmax : {5.0, 50.0, 450.0}) {
        const auto g = SolverGrid::make(0, lmax, N, m.T, dt);
        const auto inv = oracle::dense_inverse(dense(build_implicit_matrix(g, m)));
        double norm = 0.0;
        for (const auto& row : inv) {
          double s = 0.0;
          for (double v : row) {
            s += std::abs(v);
            EXPECT_GE(v, -1e-14);  // M-matrix: nonnegative inverse
          }
          norm = std::max(norm, s);
        }
        EXPECT_LE(norm, 1.0 / (1.0 + g.dt * m.r) * (1 + 1e-12));
      }
}

TEST(Thomas, IdentityAndConstructedSolution) {
  TriDiag I{{0, 0, 0}, {1, 1, 1, 1}, {0, 0, 0}};
  const std::vector<cd> rhs{{1, 2}, {3, 4}, {5, 6}, {7, 8}};
  EXPECT_EQ(thomas_solve<cd>(I, rhs), rhs);
  ModelParams m;
  const auto g = SolverGrid::make(0, 450, 600, m.T, 1.0 / 365.0);
  const auto A = build_implicit_matrix(g, m);
  const std::vector<double> ones(A.size(), 1.0);
  const auto b = A.multiply<double>(ones);
  const auto x = thomas_solve<double>(A, b);
  for (double v : x) EXPECT_NEAR(v, 1.0, 1e-13);
}

TEST(Thomas, MatchesDenseEliminationOnRandomDominantSystems) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int t = 0; t < 100; ++t) {
    TriDiag A;
    const int n = 5;
    A.sub.resize(n - 1);
    A.super.resize(n - 1);
    A.diag.resize(n);
    for (int i = 0; i < n - 1; ++i) {
      A.sub[i] = -std::abs(U(rng));
      A.super[i] = -std::abs(U(rng));
    }
    for (int i = 0; i < n; ++i) {
      double off = (i > 0 ? std::abs(A.sub[i - 1]) : 0) + (i + 1 < n ? std::abs(A.super[i]) : 0);
      A.diag[i] = off + 0.1 + std::abs(U(rng));
    }
    const auto rhs = random_vector(rng, n);
    const auto x = thomas_solve<cd>(A, rhs);
    std::vector<std::vector<cd>> M(n, std::vector<cd>(n, 0.0));
    const auto D = dense(A);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) M[i][j] = D[i][j];
    const auto ref = oracle::dense_solve(M, rhs);
    EXPECT_LE(sup_diff(x, ref), 1e-12);
    const auto back = A.multiply<cd>(x);
    EXPECT_LE(sup_diff(back, rhs), 1e-12 * 2.0);
  }
}

TEST(Thomas, ZeroPivotIsReported) {
  TriDiag A{{1.0}, {0.0, 1.0}, {1.0}};
  try {
    ThomasFactor f(A);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SingularMatrix);
  }
}

TEST(ImexStep, ConstantDataAtZeroFrequencyIsDiscounted) {
  ModelParams m;
  const auto marks = baseline_marks();
  const auto rules = make_component_rules(marks, 24);
  const auto g = SolverGrid::make(0, 60, 120, m.T, 1.0 / 365.0);
  ModalSolver solver(g, m, marks, rules);
  const cd c(0.7, -0.2);
  ModalSurface next{0.0, std::vector<cd>(g.size(), c), 5};
  const auto out = solver.step(next);
  EXPECT_EQ(out.time_index, 4);
  for (const cd& v : out.values) EXPECT_LE(std::abs(v - c / (1.0 + g.dt * m.r)), 1e-14);
}

TEST(ImexStep, MatchesManualAssembly) {
  ModelParams m;
  const auto marks = esscher_tilt(baseline_marks(), 0.2);
  const auto rules = make_component_rules(marks, 16);
  const auto g = SolverGrid::make(0, 30, 60, m.T, 1.0 / 365.0);
  std::mt19937_64 rng(1);
  const auto F = random_vector(rng, g.size());
  const cd eta(0.3, 11.0);
  for (auto mode : {InterpMode::linear, InterpMode::pchip}) {
    ModalOptions opts;
    opts.interp = mode;
    const auto out = imex_step({eta, F, 3}, g, m, marks, rules, opts).values;
    const auto nodes = g.nodes();
    const auto Fi = Interpolant<cd>::build(nodes, F, mode, Boundary::clamp);
    std::vector<cd> rhs(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double a = g.dt * nodes[i];
      rhs[i] = (1.0 - a) * F[i] + a * jump_gain(Fi, nodes[i], eta, m.beta, marks, rules);
    }
    EXPECT_EQ(rhs[0], F[0]);  // lambda = 0 row carries no jump contribution
    const auto ref = thomas_solve<cd>(build_implicit_matrix(g, m), rhs);
    EXPECT_LE(sup_diff(out, ref), 1e-13);
  }
  EXPECT_THROW(imex_step({eta, F, 0}, g, m, marks, rules), Error);
}

TEST(ImexStep, OneStepContraction) {
  ModelParams m;
  const auto marks = baseline_marks();
  const auto rules = make_component_rules(marks, 24);
  const auto g = SolverGrid::make(0, 20, 40, m.T, 1.0 / 365.0);
  const double delta = 0.3;
  const double L = lipschitz_constant(g.nodes(), delta, marks, rules);
  ASSERT_LT(g.dt * L, 1.0);
  ModalSolver solver(g, m, marks, rules);
  std::mt19937_64 rng(17);
  const double factor = (1.0 + g.dt * L) / (1.0 + g.dt * m.r);
  for (int t = 0; t < 100; ++t) {
    const cd eta(delta, 0.5 * t);
    const auto F = random_vector(rng, g.size()), G = random_vector(rng, g.size());
    const auto Fn = solver.step({eta, F, 1}).values, Gn = solver.step({eta, G, 1}).values;
    EXPECT_LE(sup_diff(Fn, Gn), factor * sup_diff(F, G) * (1 + 1e-12));
  }
}

TEST(ImexStep, GlobalStability) {
  ModelParams m;
  const auto marks = baseline_marks();
  const auto rules = make_component_rules(marks, 24);
  const auto g = SolverGrid::make(0, 20, 40, m.T, 1.0 / 365.0);
  const double L = lipschitz_constant(g.nodes(), 0.3, marks, rules);
  ModalSolver solver(g, m, marks, rules);
  std::mt19937_64 rng(5);
  for (int t = 0; t < 10; ++t) {
    const cd eta(0.3, 3.0 * t);
    ModalSurface F{eta, random_vector(rng, g.size()), g.N_t}, G{eta, random_vector(rng, g.size()), g.N_t};
    const double d0 = sup_diff(F.values, G.values);
    while (F.time_index > 0) {
      F = solver.step(F);
      G = solver.step(G);
    }
    EXPECT_LE(sup_diff(F.values, G.values), std::exp(L * m.T) * d0);
  }
}

TEST(SolveModal, ZeroFrequencyIsZeroCouponBond) {
  ModelParams m;
  const auto marks = baseline_marks();
  const auto rules = make_component_rules(marks, 24);
  const auto g = SolverGrid::make(0, 450, 600, m.T, 1.0 / 365.0);
  for (auto mode : {InterpMode::linear, InterpMode::pchip}) {
    ModalOptions o;
    o.interp = mode;
    const auto s = solve_modal(0.0, g, m, marks, rules, o);
    EXPECT_EQ(s.time_index, 0);
    for (const cd& v : s.values) EXPECT_LE(std::abs(v - std::exp(-m.r * m.T)), 1e-10);
  }
  ModelParams m0 = m;
  m0.r = 0.0;
  for (const cd& v : solve_modal(0.0, g, m0, marks, rules).values) EXPECT_LE(std::abs(v - 1.0), 1e-12);
}

TEST(SolveModal, RealDampedModeIsPositiveAndBounded) {
  ModelParams m;
  const auto marks = baseline_marks();
  const auto rules = make_component_rules(marks, 24);
  const auto g = SolverGrid::make(0, 450, 600, m.T, 1.0 / 365.0);
  const auto s = solve_modal(0.3, g, m, marks, rules);
  const double bound = mode_bound(g, m, marks, 0.3, 0.0);
  for (const cd& v : s.values) {
    EXPECT_GT(v.real(), 0.0);
    EXPECT_LE(std::abs(v.imag()), 1e-14 * v.real());
    EXPECT_LE(std::abs(v), bound);
  }
  // complex frequencies obey the same bound
  for (double y : {1.0, 10.0, 100.0})
    for (const cd& v : solve_modal({0.3, y}, g, m, marks, rules).values) EXPECT_LE(std::abs(v), bound);
  EXPECT_THROW(solve_modal({2.6, 0.0}, g, m, marks, rules), Error);
}

TEST(SolveModal, FirstOrderInTime) {
  ModelParams m;
  const auto marks = baseline_marks();
  const auto rules = make_component_rules(marks, 24);
  const cd eta(0.3, 2.0);
  auto value = [&](double dt) {
    const auto g = SolverGrid::make(0, 60, 120, m.T, dt);
    const auto v = solve_modal(eta, g, m, marks, rules).values;
    return std::make_pair(g.dt, v[5]);  // lambda = 2.5
  };
  std::vector<double> dts{1.0 / 91, 1.0 / 182, 1.0 / 365, 1.0 / 730}, used, err;
  const cd ref = value(dts.back() / 8).second;
  for (double dt : dts) {
    const auto [d, v] = value(dt);
    used.push_back(d);
    err.push_back(std::abs(v - ref));
  }
  const double slope = fit_loglog_slope(used, err);
  EXPECT_GE(slope, 0.8);
  EXPECT_LE(slope, 1.2);
}

TEST(Lipschitz, Examples) {
  const auto marks = baseline_marks();
  const auto rules = make_component_rules(marks, 24);
  const std::vector<double> zero{0.0};
  EXPECT_EQ(lipschitz_constant(zero, 0.3, marks, rules), 0.0);
  const auto g = SolverGrid::make(0, 450, 600, 150.0 / 365, 1.0 / 365.0);
  EXPECT_NEAR(lipschitz_constant(g.nodes(), 0.0, marks, rules), 2 * 450.0, 1e-9 * 900);
  const double L = lipschitz_constant(g.nodes(), 0.3, marks, rules);
  EXPECT_NEAR(L, 450.0 * (mgf(marks, 0.3) + 1.0), 1e-9 * L);
  const auto cfl = check_cfl(g, 0.3, marks, rules);
  EXPECT_FALSE(cfl.satisfied);
  EXPECT_GT(cfl.dt_times_lipschitz, 1.0);
  EXPECT_THROW(lipschitz_constant(g.nodes(), 2.5, marks, rules), Error);
}
