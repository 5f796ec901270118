#include "oracles.hpp"
#include "tnjet/parallel.hpp"

#include <gtest/gtest.h>

using namespace tnjet;

namespace {

double fd_loss_error(LossKind kind, const Eigen::VectorXd& x, int label) {
  const LossValue lv = score_loss(kind, x, label);
  double worst = 0.0;
  for (Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd up = x, down = x;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    const double fd = (score_loss(kind, up, label).loss - score_loss(kind, down, label).loss) / 2e-6;
    worst = std::max(worst, std::abs(fd - lv.grad[i]));
  }
  return worst;
}

}  // namespace

TEST(Loss, CrossEntropyExamples) {
  EXPECT_NEAR(softmax_ce(Eigen::VectorXd::Constant(5, 0.3), 2).loss, std::log(5.0), 1e-12);
  Eigen::VectorXd big = Eigen::VectorXd::Zero(5);
  big[1] = 60;
  EXPECT_LT(softmax_ce(big, 1).loss, 1e-20);
  std::mt19937_64 gen(1);
  for (int t = 0; t < 10; ++t) {
    const Eigen::VectorXd s = oracle::random_input(1, 5, gen).sites[0];
    EXPECT_LT(fd_loss_error(LossKind::CrossEntropy, s, t % 5), 1e-6);
  }
}

TEST(Loss, MeanSquaredExamples) {
  Eigen::VectorXd onehot = Eigen::VectorXd::Zero(5);
  onehot[3] = 1;
  EXPECT_EQ(mse_loss(onehot, 3).loss, 0.0);
  for (int c = 0; c < 5; ++c) EXPECT_NEAR(mse_loss(Eigen::VectorXd::Constant(5, 0.2), c).loss, 0.16, 1e-15);
  std::mt19937_64 gen(2);
  for (int t = 0; t < 10; ++t) {
    const Eigen::VectorXd p = oracle::random_input(1, 5, gen).sites[0].cwiseAbs();
    const LossValue lv = mse_loss(p, t % 5);
    for (Index i = 0; i < 5; ++i) {
      Eigen::VectorXd up = p, down = p;
      up[i] += 1e-6;
      down[i] -= 1e-6;
      EXPECT_NEAR((mse_loss(up, t % 5).loss - mse_loss(down, t % 5).loss) / 2e-6, lv.grad[i], 1e-6);
    }
    EXPECT_LT(fd_loss_error(LossKind::MeanSquared, oracle::random_input(1, 5, gen).sites[0], t % 5), 1e-6);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  std::vector<Tensor> p{Tensor::constant({3}, 0.5)};
  const std::vector<Tensor> g{Tensor({3})};
  AdamState s;
  adam_step(p, g, s, TrainConfig{});
  EXPECT_EQ(p[0], Tensor::constant({3}, 0.5));
}

TEST(Adam, SingleStepMatchesReference) {
  TrainConfig cfg;
  cfg.learning_rate = 0.1;
  std::vector<Tensor> p{Tensor::constant({1}, 0.0)};
  AdamState s;
  adam_step(p, {Tensor::constant({1}, 1.0)}, s, cfg);
  // m = 0.1, v = 0.001; bias-corrected m_hat = 1, v_hat = 1.
  const double m_hat = (0.1 * 1.0) / (1 - 0.9), v_hat = (0.001 * 1.0) / (1 - 0.999);
  EXPECT_NEAR(p[0][0], -0.1 * m_hat / (std::sqrt(v_hat) + cfg.adam_eps), 1e-15);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  std::vector<Tensor> p{Tensor::constant({2}, 0.0)};
  Tensor g({2});
  g[0] = 3.0;
  g[1] = -0.2;
  AdamState s;
  for (int i = 0; i < 200; ++i) adam_step(p, {g}, s, cfg);
  const Tensor before = p[0];
  adam_step(p, {g}, s, cfg);
  EXPECT_NEAR(p[0][0] - before[0], -0.01, 1e-8);
  EXPECT_NEAR(p[0][1] - before[1], 0.01, 1e-8);
}

TEST(Auc, Examples) {
  Eigen::MatrixXd s(4, 2);
  s << 0.9, 0.1, 0.8, 0.2, 0.3, 0.7, 0.1, 0.9;
  const std::vector<int> labels{0, 0, 1, 1};
  const auto auc = auc_ovr(s, labels);
  EXPECT_DOUBLE_EQ(auc[0], 1.0);
  EXPECT_DOUBLE_EQ(auc[1], 1.0);
  const auto flat = auc_ovr(Eigen::MatrixXd::Constant(4, 2, 0.5), labels);
  EXPECT_DOUBLE_EQ(flat[0], 0.5);
  EXPECT_THROW(auc_ovr(s, std::vector<int>{0, 0, 0, 0}), std::domain_error);
}

TEST(Auc, MatchesPairwiseOracleAndIsMonotoneInvariant) {
  std::mt19937_64 gen(3);
  std::uniform_int_distribution<int> cls(0, 4), coarse(0, 9);
  Eigen::MatrixXd s(100, 5);
  std::vector<int> labels(100);
  for (int i = 0; i < 100; ++i) {
    labels[static_cast<std::size_t>(i)] = i < 5 ? i : cls(gen);
    for (int c = 0; c < 5; ++c) s(i, c) = coarse(gen) * 0.1;  // plenty of ties
  }
  const auto fast = auc_ovr(s, labels);
  const auto slow = oracle::pairwise_auc(s, labels);
  for (int c = 0; c < 5; ++c) EXPECT_NEAR(fast[static_cast<std::size_t>(c)], slow[static_cast<std::size_t>(c)], 1e-12);
  const Eigen::MatrixXd warped = s.array().exp() * 3.0 - 1.0;
  const auto again = auc_ovr(warped, labels);
  for (int c = 0; c < 5; ++c) EXPECT_NEAR(again[static_cast<std::size_t>(c)], fast[static_cast<std::size_t>(c)], 1e-12);
}

TEST(ModelGradient, BothLossesBothArchitectures) {
  std::mt19937_64 gen(4);
  const std::vector<AnyModel> models{oracle::randomized(build_mps(4, 2, 2, 5, 0), 5, 0.7),
                                     oracle::randomized(build_ttn(4, 2, 2, 5, 0), 6, 0.7)};
  for (const auto& m : models) {
    for (LossKind kind : {LossKind::CrossEntropy, LossKind::MeanSquared}) {
      const auto x = oracle::random_input(4, 2, gen);
      const int label = 2;
      const auto lv = score_loss(kind, forward(m, x), label);
      const auto analytic = gradient(m, x, lv.grad);
      const auto fd =
          oracle::finite_difference(m, [&](const AnyModel& w) { return score_loss(kind, forward(w, x), label).loss; });
      EXPECT_LT(oracle::gradient_error(analytic, fd), 1e-4) << to_string(architecture_of(m)) << " " << to_string(kind);
    }
  }
}

TEST(Training, ZeroEpochsReturnsInitialModel) {
  const LabeledSet data = oracle::planted_task(64, 7);
  TrainConfig cfg;
  cfg.epochs = 0;
  const AnyModel m = build_mps(4, 7, 4, 2, 8);
  const auto result = train_model(m, data, data, cfg);
  EXPECT_EQ(tensors(result.model), tensors(m));
  EXPECT_TRUE(result.metrics.loss_curve.empty());
}

TEST(Training, PlantedToyReachesHighAccuracy) {
  const LabeledSet train = oracle::planted_task(2000, 9);
  const LabeledSet test = oracle::planted_task(500, 10009);
  TrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 64;
  cfg.learning_rate = 1e-2;
  cfg.seed = 11;
  const auto result = train_model(build_mps(4, 7, 4, 2, 12), train, test, cfg);
  EXPECT_GE(result.metrics.accuracy, 0.95);
  for (double l : result.metrics.loss_curve) EXPECT_TRUE(std::isfinite(l));
}

TEST(Training, DeterministicAcrossRunsAndThreadCounts) {
  const LabeledSet data = oracle::planted_task(300, 13);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 100;
  cfg.learning_rate = 1e-2;
  cfg.seed = 5;
  std::vector<std::vector<double>> curves;
  for (int threads : {1, 1, 3}) {
    cfg.threads = threads;
    curves.push_back(train_model(build_mps(4, 7, 4, 2, 14), data, data, cfg).metrics.loss_curve);
  }
  EXPECT_EQ(curves[0], curves[1]);
  EXPECT_EQ(curves[0], curves[2]);
  cfg.loss = LossKind::MeanSquared;
  cfg.threads = 1;
  const auto a = train_model(build_ttn(4, 7, 4, 2, 15), data, data, cfg);
  cfg.threads = 4;
  const auto b = train_model(build_ttn(4, 7, 4, 2, 15), data, data, cfg);
  EXPECT_EQ(a.metrics.loss_curve, b.metrics.loss_curve);
  EXPECT_EQ(tensors(a.model), tensors(b.model));
}

TEST(Training, CrossValidationFolds) {
  const LabeledSet data = oracle::planted_task(200, 16);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 50;
  cfg.folds = 4;
  const auto cv = cross_validate([](int f) { return AnyModel(build_mps(4, 7, 4, 2, 17 + f)); }, data, cfg);
  EXPECT_EQ(cv.folds.size(), 4u);
  EXPECT_GT(cv.mean_accuracy, 0.0);
  EXPECT_GE(cv.std_accuracy, 0.0);
}

TEST(Training, RejectsBadConfig) {
  TrainConfig cfg;
  cfg.batch_size = 0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = {};
  cfg.learning_rate = -1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

TEST(Parallel, EveryIndexOnceAndExceptionsPropagate) {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; }, 4);
  EXPECT_EQ(std::count(hits.begin(), hits.end(), 1), 1000);
  EXPECT_THROW(parallel_for(10, [](std::size_t i) { if (i == 7) throw std::runtime_error("boom"); }, 3),
               std::runtime_error);
  {
    ScopedWorkerLimit limit(2);
    EXPECT_EQ(worker_count(), 2);
  }
}
