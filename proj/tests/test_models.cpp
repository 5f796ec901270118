#include "oracles.hpp"

#include <gtest/gtest.h>

using namespace tnjet;

namespace {

std::int64_t shape_sum(const std::vector<Shape>& shapes) {
  std::int64_t total = 0;
  for (const auto& s : shapes) total += shape_size(s);
  return total;
}

}  // namespace

TEST(MpsParams, PublishedConfigurations) {
  EXPECT_EQ(param_count(build_mps(8, 7, 10, 5, 0)), 6678);
  EXPECT_EQ(param_count(build_mps(16, 7, 10, 5, 0)), 12278);
  EXPECT_EQ(param_count(build_mps(32, 7, 10, 5, 0)), 23478);
  EXPECT_EQ(param_count(build_mps(2, 2, 1, 1, 0)), 4);
}

TEST(MpsParams, ShapeSumOracle) {
  for (int n : {4, 8, 16, 32}) {
    const MpsModel m = build_mps(n, n == 4 ? 3 : 7, n == 4 ? 5 : 10, 5, 0);
    std::vector<Shape> shapes;
    for (int k = 0; k < n; ++k) {
      Index left = 1, right = 1;
      for (int i = 0; i < k; ++i) left = std::min<Index>(left * m.phys_dim(), 1 << 20);
      for (int i = 0; i < n - k - 1; ++i) right = std::min<Index>(right * m.phys_dim(), 1 << 20);
      const Index bl = k == 0 ? 1 : std::min({left, right * m.phys_dim(), Index{m.bond_cap()}});
      const Index br = k == n - 1 ? 1 : std::min({left * m.phys_dim(), right, Index{m.bond_cap()}});
      Shape s{bl, m.phys_dim(), br};
      if (k == m.label_site()) s.push_back(5);
      EXPECT_EQ(m.site(k).shape(), s) << "site " << k;
      shapes.push_back(s);
    }
    EXPECT_EQ(param_count(m), shape_sum(shapes));
  }
}

TEST(TtnParams, PublishedConfigurations) {
  EXPECT_EQ(param_count(build_ttn(8, 7, 10, 5, 0)), 4460);
  EXPECT_EQ(param_count(build_ttn(16, 7, 10, 5, 0)), 10420);
  EXPECT_EQ(param_count(build_ttn(32, 7, 10, 5, 0)), 22340);
  EXPECT_EQ(4 * (7 * 7 * 10) + 2 * (10 * 10 * 10) + 1 * (10 * 10 * 5), 4460);
  EXPECT_THROW(build_ttn(6, 7, 10, 5, 0), std::invalid_argument);
}

TEST(MpsForward, ZeroModelGivesZero) {
  MpsModel m = build_mps(4, 2, 2, 5, 1);
  for (auto& t : m.tensors()) t.values().setZero();
  std::mt19937_64 gen(1);
  EXPECT_EQ(forward_mps(m, oracle::random_input(4, 2, gen)), Eigen::VectorXd::Zero(5));
}

TEST(MpsForward, MatchesDenseOracle) {
  std::mt19937_64 gen(2);
  for (int l = 0; l < 4; ++l) {
    const MpsModel m = oracle::randomized(build_mps(4, 2, 2, 5, l, 3), 10 + static_cast<std::uint64_t>(l));
    const auto x = oracle::random_input(4, 2, gen);
    const Eigen::VectorXd dense = oracle::dense_scores(m, x);
    EXPECT_LT((forward_mps(m, x) - dense).norm() / dense.norm(), 1e-10) << "label site " << l;
  }
}

TEST(MpsForward, LinearInSiteVector) {
  std::mt19937_64 gen(3);
  const MpsModel m = oracle::randomized(build_mps(5, 3, 4, 5, 0), 4);
  auto x = oracle::random_input(5, 3, gen);
  const Eigen::VectorXd base = forward_mps(m, x);
  x.sites[3] *= -2.5;
  EXPECT_LT((forward_mps(m, x) + 2.5 * base).norm(), 1e-12 * base.norm());
}

TEST(MpsForward, RejectsWrongInput) {
  const MpsModel m = build_mps(4, 2, 2, 5, 0);
  std::mt19937_64 gen(4);
  EXPECT_THROW(forward_mps(m, oracle::random_input(3, 2, gen)), ShapeError);
  EXPECT_THROW(forward_mps(m, oracle::random_input(4, 3, gen)), ShapeError);
}

TEST(MpsGradient, ZeroUpstream) {
  std::mt19937_64 gen(5);
  const MpsModel m = oracle::randomized(build_mps(4, 2, 2, 5, 0), 6);
  for (const auto& g : grad_mps(m, oracle::random_input(4, 2, gen), Eigen::VectorXd::Zero(5))) {
    EXPECT_EQ(g.values().cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(MpsGradient, FiniteDifferences) {
  std::mt19937_64 gen(7);
  for (int l : {0, 2, 3}) {
    const AnyModel m = oracle::randomized(build_mps(4, 2, 2, 5, l, 0), 8);
    const auto x = oracle::random_input(4, 2, gen);
    Eigen::VectorXd u = Eigen::VectorXd::Random(5);
    const auto fd = oracle::finite_difference(m, [&](const AnyModel& w) { return u.dot(forward(w, x)); });
    EXPECT_LT(oracle::gradient_error(gradient(m, x, u), fd), 1e-4) << "label site " << l;
  }
}

TEST(MpsGradient, LabelTensorIsOuterProductOfEnvironment) {
  std::mt19937_64 gen(9);
  const MpsModel m = oracle::randomized(build_mps(3, 2, 2, 5, 1, 0), 10);
  const auto x = oracle::random_input(3, 2, gen);
  const Eigen::VectorXd u = Eigen::VectorXd::Random(5);
  const auto g = grad_mps(m, x, u);
  const Tensor left = contract(m.site(0), Tensor::from_vector(x.sites[0]), ContractionSpec::single(1, 0));
  const Tensor right = contract(m.site(2), Tensor::from_vector(x.sites[2]), ContractionSpec::single(1, 0));
  const Eigen::VectorXd lv = left.values(), rv = right.values();
  for (Index i = 0; i < 2; ++i)
    for (Index s = 0; s < 2; ++s)
      for (Index j = 0; j < 2; ++j)
        for (Index c = 0; c < 5; ++c) EXPECT_NEAR(g[1](i, s, j, c), lv[i] * x.sites[1][s] * rv[j] * u[c], 1e-14);
}

TEST(Canonicalize, PreservesScoresAndMakesIsometries) {
  std::mt19937_64 gen(11);
  for (int n : {2, 5, 8}) {
    const MpsModel m = oracle::randomized(build_mps(n, 3, 4, 5, 0), 12 + static_cast<std::uint64_t>(n));
    const MpsModel c = canonicalize(m);
    EXPECT_LT(isometry_error(c), 1e-8);
    for (int t = 0; t < 5; ++t) {
      const auto x = oracle::random_input(n, 3, gen);
      const Eigen::VectorXd a = forward_mps(m, x), b = forward_mps(c, x);
      EXPECT_LT((a - b).norm() / a.norm(), 1e-8);
    }
    const MpsModel cc = canonicalize(c);
    const auto x = oracle::random_input(n, 3, gen);
    EXPECT_LT((forward_mps(cc, x) - forward_mps(c, x)).norm(), 1e-10 * forward_mps(c, x).norm());
  }
}

TEST(TtnForward, ZeroModelGivesZero) {
  TtnModel m = build_ttn(4, 2, 4, 5, 0);
  for (auto& t : m.tensors()) t.values().setZero();
  std::mt19937_64 gen(13);
  EXPECT_EQ(forward_ttn(m, oracle::random_input(4, 2, gen)), Eigen::VectorXd::Zero(5));
}

TEST(TtnForward, MatchesDenseOracle) {
  std::mt19937_64 gen(14);
  const TtnModel m = oracle::randomized(build_ttn(4, 2, 4, 5, 0), 15);
  for (int t = 0; t < 5; ++t) {
    const auto x = oracle::random_input(4, 2, gen);
    const Eigen::VectorXd dense = oracle::dense_scores(m, x);
    EXPECT_LT((forward_ttn(m, x) - dense).norm() / dense.norm(), 1e-10);
  }
}

TEST(TtnForward, SiblingSwapSymmetry) {
  std::mt19937_64 gen(16);
  const TtnModel m = oracle::randomized(build_ttn(4, 2, 3, 5, 0), 17);
  auto x = oracle::random_input(4, 2, gen);
  TtnModel swapped = m;
  // Swap the two subtrees under the root: exchange leaf nodes and the root's child axes.
  std::swap(swapped.node(1, 0), swapped.node(1, 1));
  swapped.node(0, 0) = permute(m.node(0, 0), {1, 0, 2});
  auto xs = x;
  std::swap(xs.sites[0], xs.sites[2]);
  std::swap(xs.sites[1], xs.sites[3]);
  EXPECT_LT((forward_ttn(swapped, xs) - forward_ttn(m, x)).norm(), 1e-12 * forward_ttn(m, x).norm());
  // Swap the two leaves of one leaf node.
  TtnModel leaf = m;
  leaf.node(1, 0) = permute(m.node(1, 0), {1, 0, 2});
  auto xl = x;
  std::swap(xl.sites[0], xl.sites[1]);
  EXPECT_LT((forward_ttn(leaf, xl) - forward_ttn(m, x)).norm(), 1e-12 * forward_ttn(m, x).norm());
}

TEST(TtnForward, ProbabilitiesFromOverlaps) {
  auto v = [](std::initializer_list<double> l) {
    Eigen::VectorXd e(static_cast<Index>(l.size()));
    Index i = 0;
    for (double x : l) e[i++] = x;
    return e;
  };
  EXPECT_EQ(probabilities_ttn(v({1, 0, 0, 0, 0})), v({1, 0, 0, 0, 0}));
  EXPECT_LT((probabilities_ttn(v({1, 1, 1, 1, 1})) - Eigen::VectorXd::Constant(5, 0.2)).norm(), 1e-15);
  EXPECT_LT((probabilities_ttn(v({3, 4, 0, 0, 0})) - v({0.36, 0.64, 0, 0, 0})).norm(), 1e-15);
  std::mt19937_64 gen(18);
  const auto p = probabilities_ttn(oracle::random_input(1, 5, gen).sites[0]);
  EXPECT_GE(p.minCoeff(), 0.0);
  EXPECT_NEAR(p.sum(), 1.0, 1e-12);
  EXPECT_THROW(probabilities_ttn(Eigen::VectorXd::Zero(5)), std::domain_error);
}

TEST(TtnGradient, ZeroUpstream) {
  std::mt19937_64 gen(19);
  const TtnModel m = oracle::randomized(build_ttn(4, 2, 2, 5, 0), 20);
  for (const auto& g : grad_ttn(m, oracle::random_input(4, 2, gen), Eigen::VectorXd::Zero(5))) {
    EXPECT_EQ(g.values().cwiseAbs().maxCoeff(), 0.0);
  }
}

TEST(TtnGradient, FiniteDifferences) {
  std::mt19937_64 gen(21);
  const AnyModel m = oracle::randomized(build_ttn(4, 2, 2, 5, 0), 22);
  const auto x = oracle::random_input(4, 2, gen);
  const Eigen::VectorXd u = Eigen::VectorXd::Random(5);
  const auto fd = oracle::finite_difference(m, [&](const AnyModel& w) { return u.dot(forward(w, x)); });
  EXPECT_LT(oracle::gradient_error(gradient(m, x, u), fd), 1e-4);
}

TEST(TtnGradient, RootIsOuterProductOfChildMessages) {
  std::mt19937_64 gen(23);
  const TtnModel m = oracle::randomized(build_ttn(4, 3, 4, 5, 0), 24);
  const auto x = oracle::random_input(4, 3, gen);
  const Eigen::VectorXd u = Eigen::VectorXd::Random(5);
  const auto g = grad_ttn(m, x, u);
  auto message = [&](int j) {
    const Tensor& t = m.node(1, j);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(t.dim(2));
    for (Index a = 0; a < 3; ++a)
      for (Index b = 0; b < 3; ++b)
        for (Index p = 0; p < t.dim(2); ++p) v[p] += t(a, b, p) * x.sites[2 * j][a] * x.sites[2 * j + 1][b];
    return v;
  };
  const Eigen::VectorXd left = message(0), right = message(1);
  for (Index a = 0; a < left.size(); ++a)
    for (Index b = 0; b < right.size(); ++b)
      for (Index c = 0; c < 5; ++c) EXPECT_NEAR(g[0](a, b, c), left[a] * right[b] * u[c], 1e-12);
}

TEST(TtnInit, NonRootNodesAreIsometries) {
  const TtnModel m = build_ttn(8, 3, 4, 5, 25);
  for (int l = 1; l < m.n_layers(); ++l) {
    for (int j = 0; j < (1 << l); ++j) {
      const Tensor& t = m.node(l, j);
      const Tensor gram = contract(t, t, ContractionSpec{{0, 1}, {0, 1}});
      const auto g = gram.matrix_view(gram.dim(0));
      EXPECT_LT((g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}
