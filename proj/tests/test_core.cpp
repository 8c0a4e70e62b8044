#include <gtest/gtest.h>

#include "overlqr/presets.hpp"
#include "support.hpp"

using namespace overlqr;
using overlqr::testing::random_instance;

namespace {

Matrix m1(double v) { return Matrix::Constant(1, 1, v); }

Plant scalar_plant(double a, double q = 1.0, double r = 1.0) {
  return Plant(m1(a), m1(1.0), m1(q), m1(r));
}

template <class F>
ErrorKind kind_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no overlqr::Error thrown";
  return ErrorKind::InvalidArgument;
}

}  // namespace

// lyapunov

TEST(Lyapunov, ScalarAndDiagonalExamples) {
  EXPECT_NEAR(solve_lyapunov(m1(-1.0), m1(1.0))(0, 0), 0.5, 1e-15);
  const Matrix X = solve_lyapunov(-Matrix::Identity(2, 2), Matrix::Identity(2, 2));
  EXPECT_LT((X - 0.5 * Matrix::Identity(2, 2)).norm(), 1e-15);
  EXPECT_NEAR(solve_lyapunov(m1(-1.5), m1(1.25))(0, 0), 1.25 / 3.0, 1e-15);
}

TEST(Lyapunov, RejectsNonHurwitzAndSingular) {
  EXPECT_EQ(kind_of([] { solve_lyapunov(m1(0.0), m1(1.0)); }), ErrorKind::NotHurwitz);
  EXPECT_EQ(kind_of([] { solve_lyapunov(m1(2.0), m1(1.0)); }), ErrorKind::NotHurwitz);
  // Eigenvalue sums -2 and -2e-20: Hurwitz, but the Kronecker system is singular.
  Matrix near(2, 2);
  near << -1.0, 0.0, 0.0, -1e-20;
  EXPECT_EQ(kind_of([&] { solve_lyapunov(near, Matrix::Identity(2, 2)); }), ErrorKind::SingularSolve);
  EXPECT_EQ(kind_of([] { solve_lyapunov(-Matrix::Identity(2, 2), Matrix::Identity(3, 3)); }),
            ErrorKind::DimensionMismatch);
}

TEST(Lyapunov, ResidualOnRandomHurwitzInstances) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = overlqr::testing::uniform_int(rng, 1, 10);
    const Matrix A = overlqr::testing::hurwitz_shift(gaussian_matrix(n, n, rng));
    const Matrix W = overlqr::testing::random_spd(n, rng);
    const Matrix X = solve_lyapunov(A, W);
    ASSERT_LE((A.transpose() * X + X * A + W).norm(), 1e-10 * (1.0 + W.norm())) << "trial " << trial;
    ASSERT_TRUE(is_symmetric(X, 1e-12));
    ASSERT_GT(min_eigenvalue(X), 0.0) << "trial " << trial;
    // Dual form against the transpose.
    const Matrix Y = LyapunovSolver(A).solve_dual(W);
    ASSERT_LE((A * Y + Y * A.transpose() + W).norm(), 1e-10 * (1.0 + W.norm()));
  }
}

TEST(Lyapunov, HurwitzExamples) {
  auto t = is_hurwitz(m1(-1.0));
  EXPECT_TRUE(t.hurwitz);
  EXPECT_DOUBLE_EQ(t.spectral_abscissa, -1.0);
  Matrix A(2, 2);
  A << 0, 1, -1, -1;
  t = is_hurwitz(A);
  EXPECT_TRUE(t.hurwitz);
  EXPECT_NEAR(t.spectral_abscissa, -0.5, 1e-14);
  t = is_hurwitz(m1(0.0));
  EXPECT_FALSE(t.hurwitz);
  EXPECT_EQ(t.spectral_abscissa, 0.0);
}

TEST(Svd, Examples) {
  EXPECT_LT((svd_full(Matrix::Identity(2, 2)).sigma - Vector::Ones(2)).norm(), 1e-15);
  const Svd z = svd_full(Matrix::Zero(2, 3));
  ASSERT_EQ(z.sigma.size(), 2);
  EXPECT_EQ(z.sigma.norm(), 0.0);
  Matrix D(2, 2);
  D << 3, 0, 0, -4;
  const Svd s = svd_full(D);
  EXPECT_NEAR(s.sigma(0), 4.0, 1e-14);
  EXPECT_NEAR(s.sigma(1), 3.0, 1e-14);
}

TEST(Svd, ReconstructionAndOrthogonality) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const int r = overlqr::testing::uniform_int(rng, 1, 10), c = overlqr::testing::uniform_int(rng, 1, 10);
    const Matrix M = gaussian_matrix(r, c, rng, overlqr::testing::uniform(rng, 0.1, 10.0));
    const Svd s = svd_full(M);
    const Matrix S = rectangular_diagonal(s.sigma, r, c);
    ASSERT_LE((M - s.U * S * s.V.transpose()).norm(), 1e-10 * (1.0 + M.norm()));
    ASSERT_LE((s.U.transpose() * s.U - Matrix::Identity(r, r)).norm(), 1e-10);
    ASSERT_LE((s.V.transpose() * s.V - Matrix::Identity(c, c)).norm(), 1e-10);
    for (Eigen::Index i = 1; i < s.sigma.size(); ++i) ASSERT_GE(s.sigma(i - 1), s.sigma(i));
    ASSERT_GE(s.sigma.minCoeff(), 0.0);
  }
}

TEST(Svd, NumericalRank) {
  Vector s(3);
  s << 1.0, 1e-3, 1e-12;
  EXPECT_EQ(numerical_rank(s), 2);
  EXPECT_EQ(numerical_rank(Vector::Zero(3)), 0);
}

TEST(RandomOrthogonal, Examples) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix G = random_orthogonal(1, seed);
    EXPECT_EQ(std::abs(G(0, 0)), 1.0);
  }
  for (int k : {2, 5, 10, 17}) {
    const Matrix G = random_orthogonal(k, 42);
    EXPECT_LE((G.transpose() * G - Matrix::Identity(k, k)).norm(), 1e-10);
  }
  EXPECT_GT((random_orthogonal(10, 1) - random_orthogonal(10, 2)).norm(), 1e-6);
  EXPECT_EQ((random_orthogonal(10, 7) - random_orthogonal(10, 7)).norm(), 0.0);
  EXPECT_EQ(kind_of([] { random_orthogonal(0, 1); }), ErrorKind::InvalidArgument);
}

TEST(RandomOrthogonal, FirstColumnMeanIsZero) {
  // Entries of a Haar column have mean 0 and variance 1/k.
  const int k = 4, samples = 10000;
  Vector mean = Vector::Zero(k);
  for (int s = 0; s < samples; ++s) mean += random_orthogonal(k, static_cast<std::uint64_t>(s)).col(0);
  mean /= samples;
  const double sigma = std::sqrt(1.0 / k / samples);
  for (int i = 0; i < k; ++i) EXPECT_LT(std::abs(mean(i)), 3.0 * sigma) << "entry " << i;
}

// lqr

TEST(Lqr, ClosedLoopExamples) {
  const Plant p = scalar_plant(-1.0);
  EXPECT_EQ(closed_loop(p, m1(0.0))(0, 0), -1.0);
  EXPECT_EQ(closed_loop(p, m1(-0.5))(0, 0), -1.5);
  const Plant big = presets::paper5x5();
  EXPECT_EQ((closed_loop(big, Matrix::Zero(3, 5)) - big.A()).norm(), 0.0);
  EXPECT_EQ(kind_of([&] { closed_loop(big, Matrix::Zero(5, 3)); }), ErrorKind::DimensionMismatch);
}

TEST(Lqr, CertificatesAndCostExamples) {
  const Plant p = scalar_plant(-1.0);
  const LyapunovPair c = certificates(p, m1(-0.5));
  EXPECT_NEAR(c.P(0, 0), 1.25 / 3.0, 1e-14);
  EXPECT_NEAR(c.L(0, 0), 1.0 / 3.0, 1e-14);
  const LyapunovPair c0 = certificates(p, m1(0.0));
  EXPECT_NEAR(c0.P(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(c0.L(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(cost(p, m1(-0.5)), 0.41667, 1e-5);
  EXPECT_NEAR(cost(p, m1(0.0)), 0.5, 1e-15);
  EXPECT_NEAR(cost(p, m1(1.0 - std::sqrt(2.0))), std::sqrt(2.0) - 1.0, 1e-14);
  EXPECT_EQ(kind_of([&] { cost(p, m1(1.0)); }), ErrorKind::NotStabilizing);
  EXPECT_EQ(kind_of([&] { certificates(p, m1(2.0)); }), ErrorKind::NotStabilizing);
  EXPECT_FALSE(try_cost(p, m1(1.5)).has_value());
}

TEST(Lqr, CertificatesPositiveDefiniteOnReferencePlant) {
  const Plant p = presets::paper5x5();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 50; ++i) {
    const Matrix K = gaussian_matrix(3, 5, rng, 0.5);
    if (spectral_abscissa(closed_loop(p, K)) >= -1e-6) continue;
    const LyapunovPair c = certificates(p, K);
    EXPECT_GT(min_eigenvalue(c.P), 0.0);
    EXPECT_GT(min_eigenvalue(c.L), 0.0);
  }
}

TEST(Lqr, GradientExamples) {
  const Plant p = scalar_plant(-1.0);
  EXPECT_NEAR(grad(p, m1(-0.5))(0, 0), -0.055556, 1e-6);
  EXPECT_NEAR(grad(p, m1(-0.5))(0, 0), 2.0 * (1.25 / 3.0 - 0.5) / 3.0, 1e-14);
  const double h = 1e-6;
  const double fd = (cost(p, m1(-0.5 + h)) - cost(p, m1(-0.5 - h))) / (2 * h);
  EXPECT_LT(std::abs(fd - grad(p, m1(-0.5))(0, 0)) / std::abs(fd), 1e-5);
}

TEST(Lqr, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = random_instance(rng, 5, 3, 1);
    const Matrix K = inst.policy.product();
    const Matrix g = grad(inst.plant, K);
    const double h = 1e-6 * (1.0 + K.norm());
    Matrix fd(K.rows(), K.cols());
    for (Eigen::Index i = 0; i < K.size(); ++i) {
      Matrix Kp = K, Km = K;
      Kp.data()[i] += h;
      Km.data()[i] -= h;
      fd.data()[i] = (cost(inst.plant, Kp) - cost(inst.plant, Km)) / (2 * h);
    }
    ASSERT_LE((fd - g).norm() / g.norm(), 1e-5) << "trial " << trial;
  }
}

TEST(Lqr, RiccatiExamples) {
  const auto s = riccati_optimal(scalar_plant(-1.0), m1(0.0));
  EXPECT_NEAR(s.K(0, 0), 1.0 - std::sqrt(2.0), 1e-12);
  const auto u = riccati_optimal(scalar_plant(1.0), m1(-2.0));
  EXPECT_NEAR(u.K(0, 0), -1.0 - std::sqrt(2.0), 1e-12);
  const Plant big = presets::paper5x5();
  const auto b = riccati_optimal(big);
  EXPECT_LE(grad(big, b.K).norm(), 1e-8);
  EXPECT_EQ(kind_of([] { riccati_optimal(scalar_plant(1.0), m1(0.0)); }), ErrorKind::NotStabilizing);
  EXPECT_EQ(kind_of([] { riccati_optimal(scalar_plant(1.0), m1(-2.0), 1); }), ErrorKind::NoConvergence);
}

TEST(Lqr, RiccatiOptimalityAndMonotonicity) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const auto inst = random_instance(rng, 5, 3, 1, 8, true);
    const auto s = riccati_optimal(inst.plant, inst.policy.product());
    ASSERT_LE(grad(inst.plant, s.K).norm(), 1e-8);
    for (std::size_t j = 1; j < s.trace_history.size(); ++j) {
      ASSERT_LE(s.trace_history[j], s.trace_history[j - 1] + 1e-10) << "trial " << trial << " iterate " << j;
    }
    const double Jstar = cost(inst.plant, s.K);
    for (int probe = 0; probe < 10; ++probe) {
      const Matrix K = s.K + gaussian_matrix(s.K.rows(), s.K.cols(), rng, 0.3);
      if (const auto J = try_cost(inst.plant, K)) ASSERT_GE(*J, Jstar - 1e-12);
    }
    ASSERT_GE(cost(inst.plant, inst.policy.product()), Jstar - 1e-12);
  }
}

TEST(Lqr, PlantValidation) {
  EXPECT_EQ(kind_of([] { Plant(m1(-1), m1(1), m1(-1), m1(1)); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { Plant(Matrix::Zero(2, 3), Matrix::Zero(2, 1), Matrix::Identity(2, 2), m1(1)); }),
            ErrorKind::DimensionMismatch);
  EXPECT_EQ(kind_of([] { Plant(m1(-1), m1(1), m1(0), m1(1), m1(1), m1(1)); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { riccati_optimal(Plant(m1(-1), m1(1), m1(2), m1(1), m1(1), m1(1)), m1(0)); }),
            ErrorKind::InvalidArgument);
}

TEST(Lqr, ReferencePlantShape) {
  const Plant p = presets::paper5x5();
  EXPECT_EQ(p.n(), 5);
  EXPECT_EQ(p.m(), 3);
  EXPECT_TRUE(is_symmetric(p.A(), 0.0));
  EXPECT_TRUE(is_hurwitz(p.A()).hurwitz);
  EXPECT_EQ(p.B().sum(), 3.0);
  EXPECT_EQ(p.B()(2, 0) + p.B()(3, 1) + p.B()(4, 2), 3.0);
}

// netpolicy

TEST(NetPolicy, ProductExamples) {
  const Matrix K = Matrix::Random(3, 5);
  EXPECT_EQ((LayeredPolicy::single(K).product() - K).norm(), 0.0);
  EXPECT_EQ((LayeredPolicy::two_layer(Matrix::Identity(2, 2), Matrix::Identity(2, 2)).product() -
             Matrix::Identity(2, 2)).norm(), 0.0);
  Matrix k1(2, 1), k2(1, 2);
  k1 << 1, 2;
  k2 << 3, 4;
  EXPECT_EQ(LayeredPolicy::two_layer(k1, k2).product()(0, 0), 11.0);
  EXPECT_EQ(kind_of([] { LayeredPolicy::two_layer(Matrix::Zero(4, 2), Matrix::Zero(1, 3)); }),
            ErrorKind::DimensionMismatch);
  // Hidden widths below max(m, n) are rejected.
  EXPECT_EQ(kind_of([] { LayeredPolicy::two_layer(Matrix::Zero(2, 5), Matrix::Zero(3, 2)); }),
            ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([] { LayeredPolicy(std::vector<Matrix>{}); }), ErrorKind::InvalidArgument);
}

TEST(NetPolicy, ParameterRoundTrip) {
  std::mt19937_64 rng(1);
  const auto inst = random_instance(rng, 4, 3, 3);
  const Vector v = inst.policy.flatten();
  EXPECT_EQ((inst.policy.with_parameters(v).flatten() - v).norm(), 0.0);
  EXPECT_EQ(v.size(), inst.policy.parameter_count());
  EXPECT_EQ(kind_of([&] { inst.policy.with_parameters(Vector::Zero(1)); }), ErrorKind::DimensionMismatch);
}

TEST(NetPolicy, LayerGradExamples) {
  const Plant p = scalar_plant(-1.0);
  const auto single = layer_grads(p, LayeredPolicy::single(m1(-0.5)));
  EXPECT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0](0, 0), grad(p, m1(-0.5))(0, 0));
  const auto g = layer_grads(p, LayeredPolicy::two_layer(m1(1.0), m1(-0.5)));
  EXPECT_NEAR(g[0](0, 0), 0.027778, 1e-6);
  EXPECT_NEAR(g[1](0, 0), -0.055556, 1e-6);

  const Plant big = presets::paper5x5();
  std::mt19937_64 rng(9);
  const auto z = layer_grads(big, LayeredPolicy::two_layer(gaussian_matrix(10, 5, rng), Matrix::Zero(3, 10)));
  EXPECT_EQ(z[0].norm(), 0.0);
  EXPECT_GT(z[1].norm(), 0.0);
  EXPECT_EQ(kind_of([&] { layer_grads(p, LayeredPolicy::single(m1(2.0))); }), ErrorKind::NotStabilizing);
}

TEST(NetPolicy, LayerGradsMatchFiniteDifferences) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    auto inst = random_instance(rng, 5, 3, 3);
    if (inst.policy.depth() == 1) continue;
    const auto g = layer_grads(inst.plant, inst.policy);
    const auto fd = overlqr::testing::fd_layer_grads(inst.plant, inst.policy);
    ASSERT_LE(overlqr::testing::relative_error(fd, g), 1e-5) << "trial " << trial;
  }
}

TEST(NetPolicy, SingleLayerReducesToLqrGradient) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto inst = random_instance(rng, 5, 3, 1);
    const Matrix K = inst.policy.product();
    ASSERT_LE((layer_grads(inst.plant, inst.policy)[0] - grad(inst.plant, K)).norm(),
              1e-12 * (1.0 + grad(inst.plant, K).norm()));
  }
}

TEST(NetPolicy, FactoredAndExplicitGradientsAgree) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = random_instance(rng, 5, 3, 4);
    const auto a = layer_grads(inst.plant, inst.policy);
    const auto b = layer_grads_explicit(inst.plant, inst.policy);
    for (std::size_t i = 0; i < a.size(); ++i) {
      ASSERT_LE((a[i] - b[i]).norm(), 1e-10 * (1.0 + b[i].norm())) << "trial " << trial << " layer " << i;
    }
  }
}

TEST(NetPolicy, ChainIdentity) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto inst = random_instance(rng, 5, 3, 4);
    const auto g = layer_grads(inst.plant, inst.policy);
    for (std::size_t i = 0; i + 1 < g.size(); ++i) {
      const Matrix lhs = g[i] * inst.policy.layer(i).transpose();
      const Matrix rhs = inst.policy.layer(i + 1).transpose() * g[i + 1];
      ASSERT_LE((lhs - rhs).norm(), 1e-10 * (1.0 + lhs.norm())) << "trial " << trial;
    }
  }
}

TEST(NetPolicy, ConservationExamples) {
  std::mt19937_64 rng(4);
  const Matrix K1 = gaussian_matrix(4, 3, rng);
  const auto bal = conservation(LayeredPolicy::two_layer(K1, Matrix(K1.transpose())));
  EXPECT_LT(bal.C[0].norm(), 1e-14);
  EXPECT_NEAR(*bal.imbalance, 0.0, 1e-12);

  Matrix k1(2, 1), k2(1, 2);
  k1 << 2, 0;
  k2 << 0, 0;
  const auto r = conservation(LayeredPolicy::two_layer(k1, k2));
  Matrix expect = Matrix::Zero(2, 2);
  expect(0, 0) = 4.0;
  EXPECT_EQ((r.C[0] - expect).norm(), 0.0);
  EXPECT_EQ(*r.imbalance, 16.0);

  k1 << 1, 1;
  k2 << 1, 1;
  const auto z = conservation(LayeredPolicy::two_layer(k1, k2));
  EXPECT_EQ(z.C[0].norm(), 0.0);
  EXPECT_EQ(*z.imbalance, 0.0);

  EXPECT_EQ(kind_of([] { conservation(LayeredPolicy::single(m1(1.0))); }), ErrorKind::SingleLayer);
  const auto deep = conservation(LayeredPolicy(std::vector<Matrix>{Matrix::Ones(2, 1), Matrix::Ones(2, 2),
                                                                   Matrix::Ones(1, 2)}));
  EXPECT_EQ(deep.C.size(), 2u);
  EXPECT_FALSE(deep.imbalance.has_value());
}

TEST(NetPolicy, InitEtaMuExamples) {
  const Plant p = presets::paper5x5();
  const Matrix Ks = riccati_optimal(p).K;
  const auto one = init_eta_mu(Ks, InitSpec{1.0, 1.0, 3, 10, false});
  EXPECT_LE((one.product() - Ks).norm(), 1e-12);
  EXPECT_LT(conservation(one).C[0].norm(), 1e-12);
  for (double mu : {0.3, 1.0, 10.0, 100.0}) {
    const auto five = init_eta_mu(Ks, InitSpec{5.0, mu, 4, 10, false});
    EXPECT_LE((five.product() - 5.0 * Ks).norm(), 1e-10 * (1.0 + Ks.norm()));
  }
  const auto imb = init_eta_mu(Ks, InitSpec{1.0, 10.0, 5, 10, false});
  const Matrix C = imb.layer(0) * imb.layer(0).transpose() - imb.layer(1).transpose() * imb.layer(1);
  EXPECT_NEAR(*conservation(imb).imbalance, 2.0 * (C * C).trace() - C.trace() * C.trace(), 1e-9 * C.squaredNorm());
  EXPECT_GT(std::abs(*conservation(imb).imbalance), 1.0);
  EXPECT_NEAR(imb.layer(0).norm() / imb.layer(1).norm(), 100.0, 1e-9);
  const auto neg = init_eta_mu(Ks, InitSpec{-20.0, 1.0, 6, 10, false});
  EXPECT_LE((neg.product() + 20.0 * Ks).norm(), 1e-10 * 20.0);
  EXPECT_EQ(init_eta_mu(Ks, InitSpec{0.0, 1.0, 1, 10, false}).product().norm(), 0.0);
  EXPECT_EQ(kind_of([&] { init_eta_mu(Ks, InitSpec{0.0, 1.0, 1, 10, true}); }), ErrorKind::DegenerateEta);
  EXPECT_EQ(kind_of([&] { init_eta_mu(Ks, InitSpec{1.0, 0.0, 1, 10, false}); }), ErrorKind::InvalidArgument);
  EXPECT_EQ(kind_of([&] { init_eta_mu(Ks, InitSpec{1.0, 1.0, 1, 4, false}); }), ErrorKind::InvalidArgument);
}

TEST(NetPolicy, InitPerSvExamples) {
  const Plant p = presets::paper5x5();
  const Matrix Ks = riccati_optimal(p).K;
  const Svd s = svd_full(Ks);
  for (double eta : {0.5, -2.0, 7.0}) {
    const auto a = init_per_sv(Ks, {eta, eta, eta}, 3.0, 9, 10);
    const auto b = init_eta_mu(Ks, InitSpec{eta, 3.0, 9, 10, false});
    EXPECT_LE((a.layer(0) - b.layer(0)).norm(), 1e-13);
    EXPECT_LE((a.layer(1) - b.layer(1)).norm(), 1e-13);
  }
  EXPECT_LE((init_per_sv(Ks, {1, 1, 1}, 1.0, 2, 10).product() - Ks).norm(), 1e-12);

  const auto mixed = init_per_sv(Ks, {20.0, 0.1, -20.0}, 1.0, 2, 10);
  Vector d(3);
  d << 20.0, 0.1, -20.0;
  const Matrix expect = s.U * rectangular_diagonal(d.cwiseProduct(s.sigma), 3, 5) * s.V.transpose();
  EXPECT_LE((mixed.product() - expect).norm(), 1e-10);
  const Vector ps = svd_full(mixed.product()).sigma;
  EXPECT_NEAR(ps(0), 20.0 * s.sigma(0), 1e-10);
  EXPECT_NEAR(ps(1), 20.0 * s.sigma(2), 1e-10);
  EXPECT_NEAR(ps(2), 0.1 * s.sigma(1), 1e-10);
  // One sign flip: the product has negative determinant relative to K* in the
  // shared singular basis.
  const Matrix core = s.U.transpose() * mixed.product() * s.V;
  EXPECT_LT(core(2, 2), 0.0);
  EXPECT_GT(core(0, 0), 0.0);
  EXPECT_EQ(kind_of([&] { init_per_sv(Ks, {1.0, 2.0}, 1.0, 2, 10); }), ErrorKind::DimensionMismatch);
}
