#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "lkb/agent_kernel.hpp"
#include "lkb/error.hpp"
#include "lkb/kernel.hpp"

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::span<const double> sp(const VectorXd& v) {
  return {v.data(), static_cast<std::size_t>(v.size())};
}

MatrixXd random_points(int rows, int cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  MatrixXd x(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int c = 0; c < cols; ++c) x(i, c) = normal(rng);
  }
  return x;
}

double min_eigenvalue(const MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues()(0);
}

TEST(BaseKernel, SquaredExponentialValues) {
  const auto k = lkb::BaseKernel::squared_exponential(1.0);
  VectorXd x(2), y(2);
  x << 1.0, 0.0;
  y << 0.0, 1.0;
  EXPECT_EQ(k(sp(x), sp(x)), 1.0);
  EXPECT_NEAR(k(sp(x), sp(y)), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(k(sp(x), sp(y)), 0.367879441171442, 1e-12);
  EXPECT_EQ(k(sp(x), sp(y)), k(sp(y), sp(x)));
}

TEST(BaseKernel, LinearOrthogonalIsZero) {
  const auto k = lkb::BaseKernel::linear();
  VectorXd x(3), y(3);
  x << 1, 0, 0;
  y << 0, 1, 0;
  EXPECT_EQ(lkb::eval_base(k, sp(x), sp(y)), 0.0);
  EXPECT_EQ(lkb::eval_base(k, sp(x), sp(x)), 1.0);
}

TEST(BaseKernel, Errors) {
  EXPECT_THROW(lkb::BaseKernel::squared_exponential(0.0), lkb::ParameterError);
  VectorXd x(2), y(3);
  x.setZero();
  y.setZero();
  EXPECT_THROW(lkb::eval_base(lkb::BaseKernel::linear(), sp(x), sp(y)), lkb::ParameterError);
}

TEST(BaseKernel, MedianPairwiseDistance) {
  MatrixXd p(3, 1);
  p << 0.0, 1.0, 3.0;  // distances 1, 2, 3
  EXPECT_DOUBLE_EQ(lkb::median_pairwise_distance(p), 2.0);
}

TEST(MultiUserKernel, EmptyGraphUnitRhoSeparatesUsers) {
  const lkb::LaplacianSpectrum s(lkb::UserGraph::empty(3), 1.0);
  const auto k = lkb::MultiUserKernel::laplacian(lkb::BaseKernel::squared_exponential(1.0), s);
  VectorXd x(2), y(2);
  x << 0.1, 0.2;
  y << -0.3, 0.5;
  const double kx = lkb::eval_base(k.base(), sp(x), sp(y));
  EXPECT_DOUBLE_EQ(lkb::eval_multi(k, sp(x), 0, sp(y), 0), kx);
  EXPECT_EQ(lkb::eval_multi(k, sp(x), 0, sp(y), 1), 0.0);
}

TEST(MultiUserKernel, EmptyGraphRhoTwoDiagonalIsHalf) {
  const lkb::LaplacianSpectrum s(lkb::UserGraph::empty(2), 2.0);
  const auto k = lkb::MultiUserKernel::laplacian(lkb::BaseKernel::squared_exponential(1.0), s);
  VectorXd x(2);
  x << 0.3, -0.7;
  EXPECT_DOUBLE_EQ(k(sp(x), 1, sp(x), 1), 0.5);
}

TEST(MultiUserKernel, CompleteGraphCrossUserMatchesDenseInverse) {
  const lkb::UserGraph g = lkb::UserGraph::complete(3);
  const lkb::LaplacianSpectrum s(g, 1.0);
  const auto k = lkb::MultiUserKernel::laplacian(lkb::BaseKernel::squared_exponential(1.0), s);
  const MatrixXd dense = (g.laplacian() + MatrixXd::Identity(3, 3)).inverse();
  VectorXd x(2);
  x << 0.5, 0.5;
  EXPECT_NEAR(k(sp(x), 0, sp(x), 1), dense(0, 1), 1e-14);
  EXPECT_NEAR(dense(0, 1), 1.0 / 3.0 - 1.0 / 12.0, 1e-14);
}

TEST(MultiUserKernel, RejectsBadUserIndex) {
  const lkb::LaplacianSpectrum s(lkb::UserGraph::complete(3), 1.0);
  const auto k = lkb::MultiUserKernel::laplacian(lkb::BaseKernel::linear(), s);
  VectorXd x = VectorXd::Ones(2);
  EXPECT_THROW(k(sp(x), 3, sp(x), 0), lkb::ParameterError);
  EXPECT_THROW(k(sp(x), 0, sp(x), -1), lkb::ParameterError);
}

TEST(MultiUserKernel, KMaxIsGridDiagonalMaximum) {
  const lkb::LaplacianSpectrum s(lkb::UserGraph::star(6), 0.1);
  const auto k = lkb::MultiUserKernel::laplacian(lkb::BaseKernel::squared_exponential(1.0), s);
  const lkb::GridKernel grid(k, random_points(7, 3, 1));
  EXPECT_NEAR(grid.full().diagonal().maxCoeff(), k.k_max(), 1e-12);
}

TEST(Gram, SinglePairAndDuplicate) {
  const lkb::LaplacianSpectrum s(lkb::UserGraph::complete(2), 0.5);
  const auto k = lkb::MultiUserKernel::laplacian(lkb::BaseKernel::squared_exponential(1.0), s);
  std::vector<lkb::ContextUserPair> pairs{{VectorXd::Constant(2, 0.3), 1}};
  const MatrixXd g1 = lkb::gram(k, pairs);
  ASSERT_EQ(g1.rows(), 1);
  EXPECT_DOUBLE_EQ(g1(0, 0), s.inv_reg()(1, 1));
  pairs.push_back(pairs.front());
  const MatrixXd g2 = lkb::gram(k, pairs);
  EXPECT_NEAR(g2.determinant(), 0.0, 1e-14);
}

TEST(Gram, RegularDesignIsKroneckerProduct) {
  const lkb::LaplacianSpectrum s(lkb::gen_erdos_renyi(4, 0.5, 2), 0.3);
  const auto k = lkb::MultiUserKernel::laplacian(lkb::BaseKernel::squared_exponential(0.8), s);
  const MatrixXd pool = random_points(5, 3, 3);
  std::vector<lkb::ContextUserPair> pairs;
  for (int u = 0; u < 4; ++u) {
    for (int i = 0; i < 5; ++i) pairs.push_back({pool.row(i).transpose(), u});
  }
  const MatrixXd g = lkb::gram(k, pairs);
  // Explicit Kronecker oracle, written out entrywise.
  const MatrixXd kx = lkb::base_gram(k.base(), pool);
  for (int a = 0; a < 20; ++a) {
    for (int b = 0; b < 20; ++b) {
      EXPECT_NEAR(g(a, b), s.inv_reg()(a / 5, b / 5) * kx(a % 5, b % 5), 1e-14);
    }
  }
  EXPECT_LE((lkb::GridKernel(k, pool).full() - g).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Gram, KroneckerEigenvaluesArePairwiseProducts) {
  const lkb::LaplacianSpectrum s(lkb::gen_erdos_renyi(6, 0.4, 8), 0.2);
  const MatrixXd kx = lkb::base_gram(lkb::BaseKernel::squared_exponential(1.0), random_points(5, 2, 4));
  const VectorXd a = Eigen::SelfAdjointEigenSolver<MatrixXd>(s.inv_reg()).eigenvalues();
  const VectorXd b = Eigen::SelfAdjointEigenSolver<MatrixXd>(kx).eigenvalues();
  std::vector<double> products;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    for (Eigen::Index j = 0; j < b.size(); ++j) products.push_back(a(i) * b(j));
  }
  std::sort(products.begin(), products.end());
  const VectorXd joint =
      Eigen::SelfAdjointEigenSolver<MatrixXd>(lkb::kronecker(s.inv_reg(), kx)).eigenvalues();
  for (std::size_t i = 0; i < products.size(); ++i) {
    EXPECT_NEAR(joint(static_cast<Eigen::Index>(i)), products[i], 1e-8);
  }
}

TEST(Gram, RandomPairSetsArePsd) {
  const lkb::LaplacianSpectrum s(lkb::gen_rbf_graph(8, 4, 0.1, 0.1, 1), 0.1);
  const auto k = lkb::MultiUserKernel::laplacian(lkb::BaseKernel::squared_exponential(1.0), s);
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> user(0, 7);
  for (int rep = 0; rep < 5; ++rep) {
    const MatrixXd x = random_points(40, 3, 100 + static_cast<std::uint64_t>(rep));
    std::vector<lkb::ContextUserPair> pairs;
    for (int i = 0; i < 40; ++i) pairs.push_back({x.row(i).transpose(), user(rng)});
    const MatrixXd g = lkb::gram(k, pairs);
    EXPECT_LE((g - g.transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_GE(min_eigenvalue(g), -1e-8 * g.trace());
  }
}

TEST(GridKernel, IndexingRoundTrips) {
  const lkb::LaplacianSpectrum s(lkb::UserGraph::complete(3), 1.0);
  const lkb::GridKernel grid(lkb::MultiUserKernel::laplacian(lkb::BaseKernel::linear(), s),
                             random_points(4, 2, 1));
  EXPECT_EQ(grid.size(), 12);
  for (int g = 0; g < grid.size(); ++g) EXPECT_EQ(grid.index(grid.point(g)), g);
  EXPECT_EQ(grid.index({1, 2}), 9);
  EXPECT_FALSE(grid.contains({4, 0}));
  EXPECT_FALSE(grid.contains({0, 3}));
}

TEST(JointPenalty, MatchesMultiUserNorm) {
  const lkb::UserGraph g = lkb::gen_erdos_renyi(4, 0.6, 3);
  const double rho = 0.7;
  const lkb::LaplacianSpectrum s(g, rho);
  const MatrixXd kx = lkb::base_gram(lkb::BaseKernel::squared_exponential(1.0), random_points(6, 2, 2));
  const MatrixXd alpha = random_points(4, 6, 9);  // users x arms
  // f_i = sum_{v,k} [L_rho^{-1}]_{iv} alpha(v,k) K_x(., x_k)
  const MatrixXd coeffs = s.inv_reg() * alpha;
  VectorXd a(24);
  for (int u = 0; u < 4; ++u) {
    for (int k = 0; k < 6; ++k) a(u * 6 + k) = alpha(u, k);
  }
  const double norm = a.dot(lkb::kronecker(s.inv_reg(), kx) * a);
  EXPECT_NEAR(lkb::joint_penalty(g, rho, coeffs, kx), norm, 1e-10 * std::abs(norm));
}

TEST(AgentKernel, HeatAtZeroIsIdentity) {
  const lkb::LaplacianSpectrum s(lkb::gen_erdos_renyi(5, 0.5, 1), 0.1);
  lkb::AgentKernel a;
  a.kind = lkb::AgentKernel::Kind::heat;
  a.tau = 0.0;
  EXPECT_LE((lkb::agent_kernel_matrix(a, s) - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff(),
            1e-12);
}

TEST(AgentKernel, HeatComposes) {
  const lkb::LaplacianSpectrum s(lkb::gen_erdos_renyi(6, 0.5, 2), 0.1);
  EXPECT_LE((s.heat_kernel(0.3) * s.heat_kernel(0.9) - s.heat_kernel(1.2)).norm(), 1e-8);
}

TEST(AgentKernel, AllOnes) {
  const lkb::LaplacianSpectrum s(lkb::UserGraph::empty(3), 1.0);
  lkb::AgentKernel a;
  a.kind = lkb::AgentKernel::Kind::all_ones;
  const MatrixXd k = lkb::agent_kernel_matrix(a, s);
  EXPECT_TRUE(k.isApprox(MatrixXd::Ones(3, 3)));
  const VectorXd ev = Eigen::SelfAdjointEigenSolver<MatrixXd>(k).eigenvalues();
  EXPECT_NEAR(ev(0), 0.0, 1e-12);
  EXPECT_NEAR(ev(2), 3.0, 1e-12);
}

TEST(AgentKernel, LaplacianInverseUsesItsOwnRho) {
  const lkb::LaplacianSpectrum s(lkb::gen_erdos_renyi(5, 0.5, 4), 1.0);
  lkb::AgentKernel a;
  a.kind = lkb::AgentKernel::Kind::laplacian_inv;
  a.rho = 0.1;
  EXPECT_LE((lkb::agent_kernel_matrix(a, s) - s.regularized_inverse(0.1)).cwiseAbs().maxCoeff(),
            0.0);
}

TEST(AgentKernel, SpectralRbf) {
  const lkb::LaplacianSpectrum s(lkb::gen_erdos_renyi(10, 0.4, 6), 0.1);
  lkb::AgentKernel a;
  a.kind = lkb::AgentKernel::Kind::spectral_rbf;
  a.k = 3;
  const MatrixXd k = lkb::agent_kernel_matrix(a, s);
  EXPECT_LE((k - k.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GE(min_eigenvalue(k), -1e-8);
  for (int i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(k(i, i), 1.0);
  a.k = 10;
  EXPECT_THROW(lkb::agent_kernel_matrix(a, s), lkb::ParameterError);
}

TEST(AgentKernel, LearnedMmdIdenticalHistoriesGiveOne) {
  const auto base = lkb::BaseKernel::squared_exponential(1.0);
  lkb::MeanEmbeddings emb(base, 3, 3, 256, 42);
  const MatrixXd x = random_points(6, 3, 8);
  for (int rep = 0; rep < 6; ++rep) {
    const VectorXd row = x.row(rep).transpose();
    emb.observe(0, sp(row));
    emb.observe(1, sp(row));
    const VectorXd other = x.row((rep + 2) % 6).transpose() * 2.0;
    emb.observe(2, sp(other));
  }
  const lkb::LaplacianSpectrum s(lkb::UserGraph::empty(3), 1.0);
  lkb::AgentKernel a;  // learned_mmd by default
  double bw = 0.0;
  const MatrixXd k = lkb::agent_kernel_matrix(a, s, &emb, &bw);
  EXPECT_DOUBLE_EQ(k(0, 1), 1.0);
  for (int i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(k(i, i), 1.0);
  EXPECT_LT(k(0, 2), 1.0);
  EXPECT_GT(bw, 0.0);
  EXPECT_GE(min_eigenvalue(k), -1e-8);
}

TEST(AgentKernel, LearnedMmdIgnoresRareUsers) {
  const auto base = lkb::BaseKernel::squared_exponential(1.0);
  lkb::MeanEmbeddings emb(base, 2, 2, 64, 1);
  const VectorXd x = VectorXd::Constant(2, 0.5);
  for (int i = 0; i < 4; ++i) {
    emb.observe(0, sp(x));
    emb.observe(1, sp(x));
  }
  const MatrixXd k = emb.similarity(5, 0.0);
  EXPECT_EQ(k(0, 1), 0.0);
  EXPECT_EQ(k(0, 0), 1.0);
  EXPECT_THROW(lkb::agent_kernel_matrix(lkb::AgentKernel{}, lkb::LaplacianSpectrum(
                                                                lkb::UserGraph::empty(2), 1.0)),
               lkb::ParameterError);
}

TEST(AgentKernel, RandomFeaturesApproximateBaseKernel) {
  const auto base = lkb::BaseKernel::squared_exponential(1.0);
  const lkb::MeanEmbeddings emb(base, 3, 1, 4096, 5);
  const MatrixXd x = random_points(5, 3, 3) * 0.5;
  for (int i = 0; i < 5; ++i) {
    for (int j = 0; j < 5; ++j) {
      const VectorXd a = x.row(i).transpose();
      const VectorXd b = x.row(j).transpose();
      EXPECT_NEAR(emb.features(sp(a)).dot(emb.features(sp(b))), base(sp(a), sp(b)), 0.08);
    }
  }
}

}  // namespace
