#include "tnjet/tensor.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace tnjet;

namespace {

Tensor vec(std::initializer_list<double> v) {
  Eigen::VectorXd e(static_cast<Index>(v.size()));
  Index i = 0;
  for (double x : v) e[i++] = x;
  return Tensor::from_vector(e);
}

}  // namespace

TEST(Contract, IdentityTimesVector) {
  const Tensor id = Tensor::from_matrix(Eigen::Matrix2d::Identity());
  const Tensor r = contract(id, vec({3, 4}), ContractionSpec::single(1, 0));
  EXPECT_EQ(r.shape(), Shape{2});
  EXPECT_DOUBLE_EQ(r[0], 3);
  EXPECT_DOUBLE_EQ(r[1], 4);
}

TEST(Contract, DotProductIsScalar) {
  const Tensor r = contract(vec({1, 2}), vec({3, 4}), ContractionSpec::single(0, 0));
  EXPECT_EQ(r.rank(), 0);
  EXPECT_DOUBLE_EQ(r[0], 11);
}

TEST(Contract, MatchesTripleLoop) {
  std::mt19937_64 gen(1);
  const Tensor a = Tensor::random_normal({3, 4, 5}, gen, 1.0);
  const Tensor b = Tensor::random_normal({5, 4}, gen, 1.0);
  const Tensor r = contract(a, b, ContractionSpec{{1, 2}, {1, 0}});
  ASSERT_EQ(r.shape(), Shape{3});
  for (Index i = 0; i < 3; ++i) {
    double acc = 0;
    for (Index j = 0; j < 4; ++j) {
      for (Index k = 0; k < 5; ++k) acc += a(i, j, k) * b(k, j);
    }
    EXPECT_NEAR(r[i], acc, 1e-12);
  }
}

TEST(Contract, OutputAxisOrderIsFreeOfAThenFreeOfB) {
  std::mt19937_64 gen(2);
  const Tensor a = Tensor::random_normal({2, 3, 4}, gen, 1.0);
  const Tensor b = Tensor::random_normal({5, 3, 6}, gen, 1.0);
  const Tensor r = contract(a, b, ContractionSpec::single(1, 1));
  ASSERT_EQ(r.shape(), (Shape{2, 4, 5, 6}));
  for (Index i = 0; i < 2; ++i)
    for (Index k = 0; k < 4; ++k)
      for (Index p = 0; p < 5; ++p)
        for (Index q = 0; q < 6; ++q) {
          double acc = 0;
          for (Index j = 0; j < 3; ++j) acc += a(i, j, k) * b(p, j, q);
          EXPECT_NEAR(r(i, k, p, q), acc, 1e-12);
        }
}

TEST(Contract, ShapeMismatchNamesAxisPair) {
  const Tensor a({2, 3});
  const Tensor b({4, 2});
  try {
    contract(a, b, ContractionSpec::single(1, 0));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("(1,0)"), std::string::npos) << e.what();
  }
  EXPECT_THROW(contract(a, b, ContractionSpec{{0, 0}, {0, 1}}), ShapeError);
  EXPECT_THROW(contract(a, b, ContractionSpec{{0}, {0, 1}}), ShapeError);
  EXPECT_THROW(contract(a, b, ContractionSpec::single(2, 0)), ShapeError);
}

TEST(Contract, Bilinear) {
  std::mt19937_64 gen(3);
  const Tensor a = Tensor::random_normal({3, 4}, gen, 1.0);
  const Tensor b = Tensor::random_normal({4, 2}, gen, 1.0);
  const double alpha = 1.7;
  const auto spec = ContractionSpec::single(1, 0);
  EXPECT_LT(relative_error(contract(alpha * a, b, spec), alpha * contract(a, b, spec)), 1e-14);
  EXPECT_LT(relative_error(contract(a, alpha * b, spec), alpha * contract(a, b, spec)), 1e-14);
}

TEST(Contract, ChainOrderIndependent) {
  std::mt19937_64 gen(4);
  const Tensor a = Tensor::random_normal({3, 4}, gen, 1.0);
  const Tensor b = Tensor::random_normal({4, 5, 2}, gen, 1.0);
  const Tensor c = Tensor::random_normal({5, 6}, gen, 1.0);
  const Tensor lr = contract(contract(a, b, ContractionSpec::single(1, 0)), c, ContractionSpec::single(1, 0));
  const Tensor bc = contract(b, c, ContractionSpec::single(1, 0));  // (4, 2, 6)
  const Tensor rl = contract(a, bc, ContractionSpec::single(1, 0));  // (3, 2, 6)
  EXPECT_LT(relative_error(lr, rl), 1e-10);
}

TEST(Contract, OuterProduct) {
  const Tensor r = outer(vec({1, 2}), vec({3, 4, 5}));
  ASSERT_EQ(r.shape(), (Shape{2, 3}));
  EXPECT_DOUBLE_EQ(r(1, 2), 10);
}

TEST(Contract, CountsMultiplications) {
  ScopedOpCounter counter;
  contract(Tensor({3, 4}), Tensor({4, 5}), ContractionSpec::single(1, 0));
  EXPECT_EQ(counter.count().mults, 60);
  EXPECT_EQ(counter.count().adds, 45);
  EXPECT_EQ(counter.count().contractions, 1);
}

TEST(TensorType, RejectsLengthMismatch) {
  EXPECT_THROW(Tensor(Shape{2, 2}, Eigen::VectorXd::Zero(3)), ShapeError);
  Tensor t({2, 2});
  EXPECT_THROW(t.set_labels({"a"}), ShapeError);
  t.set_labels({"row", "col"});
  EXPECT_EQ(t.labels()[1], "col");
}

TEST(TensorType, PermuteMovesAxes) {
  std::mt19937_64 gen(5);
  const Tensor t = Tensor::random_normal({2, 3, 4}, gen, 1.0);
  const Tensor p = permute(t, {2, 0, 1});
  ASSERT_EQ(p.shape(), (Shape{4, 2, 3}));
  EXPECT_DOUBLE_EQ(p(3, 1, 2), t(1, 2, 3));
  EXPECT_THROW(permute(t, {0, 0, 1}), ShapeError);
}

TEST(Norm, Examples) {
  EXPECT_EQ(norm(Tensor({3, 3})), 0.0);
  EXPECT_DOUBLE_EQ(norm(vec({3, 4})), 5.0);
  std::mt19937_64 gen(6);
  const Tensor t = Tensor::random_normal({3, 3}, gen, 1.0);
  double acc = 0;
  for (Index i = 0; i < 3; ++i)
    for (Index j = 0; j < 3; ++j) acc += t(i, j) * t(i, j);
  EXPECT_NEAR(norm(t), std::sqrt(acc), 1e-14);
}

TEST(Qr, IdentityMatrix) {
  const Tensor id = Tensor::from_matrix(Eigen::Matrix2d::Identity());
  const auto [q, r] = qr_split(id, {0}, {1});
  EXPECT_LT(relative_error(contract(q, r, ContractionSpec::single(1, 0)), id), 1e-15);
  const Tensor qtq = contract(q, q, ContractionSpec::single(0, 0));
  EXPECT_LT(relative_error(qtq, id), 1e-15);
}

TEST(Qr, WideMatrixIsOrthogonal) {
  std::mt19937_64 gen(7);
  const Tensor t = Tensor::random_normal({4, 6}, gen, 1.0);
  const auto [q, r] = qr_split(t, {0}, {1});
  const Tensor qtq = contract(q, q, ContractionSpec::single(0, 0));
  const auto g = qtq.matrix_view(4);
  EXPECT_LT((g - Eigen::MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_LT(relative_error(contract(q, r, ContractionSpec::single(1, 0)), t), 1e-12);
}

TEST(Qr, RankThreeReconstruction) {
  std::mt19937_64 gen(8);
  const Tensor t = Tensor::random_normal({2, 3, 4}, gen, 1.0);
  const auto [q, r] = qr_split(t, {0, 1}, {2});
  EXPECT_EQ(q.shape(), (Shape{2, 3, 4}));
  EXPECT_LT(relative_error(contract(q, r, ContractionSpec::single(2, 0)), t), 1e-12);
}

TEST(Qr, RankDeficientIsFine) {
  const Tensor zero({3, 3});
  const auto [q, r] = qr_split(zero, {0}, {1});
  EXPECT_LT(norm(contract(q, r, ContractionSpec::single(1, 0))), 1e-15);
}

TEST(Qr, NonPartitionIsError) {
  const Tensor t({2, 3, 4});
  EXPECT_THROW(qr_split(t, {0}, {1}), ShapeError);
  EXPECT_THROW(qr_split(t, {0, 1}, {1}), ShapeError);
}

TEST(Qr, RandomSplitsReconstruct) {
  std::mt19937_64 gen(9);
  std::uniform_int_distribution<int> rank_dist(1, 4), len_dist(1, 8);
  for (int trial = 0; trial < 100; ++trial) {
    const int rank = rank_dist(gen);
    Shape shape;
    for (int a = 0; a < rank; ++a) shape.push_back(len_dist(gen));
    const Tensor t = Tensor::random_normal(shape, gen, 1.0);
    std::vector<int> axes(static_cast<std::size_t>(rank));
    std::iota(axes.begin(), axes.end(), 0);
    std::shuffle(axes.begin(), axes.end(), gen);
    const int split = std::uniform_int_distribution<int>(0, rank)(gen);
    const std::vector<int> rows(axes.begin(), axes.begin() + split), cols(axes.begin() + split, axes.end());
    const auto [q, r] = qr_split(t, rows, cols);
    Tensor back = contract(q, r, ContractionSpec::single(q.rank() - 1, 0));
    std::vector<int> inverse(static_cast<std::size_t>(rank));
    for (int k = 0; k < rank; ++k) inverse[static_cast<std::size_t>(axes[static_cast<std::size_t>(k)])] = k;
    back = permute(back, inverse);
    EXPECT_LT(relative_error(back, t), 1e-10) << "trial " << trial;
  }
}
