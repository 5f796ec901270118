#pragma once

// Mini-batch Adam training, losses, and evaluation metrics.

#include "tnjet/model.hpp"

#include <functional>
#include <span>
#include <stdexcept>

namespace tnjet {

enum class LossKind { CrossEntropy, MeanSquared };

std::string to_string(LossKind loss);
LossKind default_loss(Architecture arch);
OutputRule output_rule_for(LossKind loss);

struct TrainConfig {
  int batch_size = 512;
  double learning_rate = 1e-3;
  int epochs = 50;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  LossKind loss = LossKind::CrossEntropy;
  int folds = 1;
  /// Samples per gradient work unit; fixes the summation tree independent of thread count.
  int chunk_size = 32;
  /// 0 = worker_count().
  int threads = 0;

  void validate() const;
};

struct LossValue {
  double loss = 0.0;
  Eigen::VectorXd grad;  // d loss / d input vector
};

Eigen::VectorXd softmax(const Eigen::VectorXd& scores);

/// -log softmax(scores)[label]; grad = softmax - onehot.
LossValue softmax_ce(const Eigen::VectorXd& scores, int label);

/// (1/C) * sum_c (probs_c - onehot_c)^2.
LossValue mse_loss(const Eigen::VectorXd& probs, int label);

/// mse_loss of the squared-overlap probabilities, differentiated back to the overlaps.
LossValue overlap_mse_loss(const Eigen::VectorXd& overlaps, int label);

/// Loss of raw model scores with the gradient taken w.r.t. those scores.
LossValue score_loss(LossKind kind, const Eigen::VectorXd& scores, int label);

struct AdamState {
  std::vector<Tensor> first_moment;
  std::vector<Tensor> second_moment;
  std::int64_t step = 0;

  void reset();
};

void adam_step(std::vector<Tensor>& params, const Gradients& grads, AdamState& state, const TrainConfig& config);

/// One-vs-rest ROC AUC per class (rank statistic with tie averaging).
/// Throws std::domain_error when a class has no positives or no negatives.
std::vector<double> auc_ovr(const Eigen::MatrixXd& scores, std::span<const int> labels);

struct LabeledSet {
  std::vector<EmbeddedJet> inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  LabeledSet subset(std::span<const std::size_t> indices) const;
};

LabeledSet embed_batch(const JetBatch& batch, const EmbeddingSpec& spec);

struct Evaluation {
  Eigen::MatrixXd probabilities;  // B x C
  std::vector<int> predictions;
  double accuracy = 0.0;
  std::vector<double> auc;  // empty when some class is absent and `require_auc` is false
};

Evaluation evaluate(const AnyModel& model, const LabeledSet& data, OutputRule rule, bool require_auc = true);

struct Metrics {
  double accuracy = 0.0;
  std::vector<double> auc;
  std::vector<double> loss_curve;
};

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainResult {
  AnyModel model;
  Metrics metrics;
};

/// Shuffled mini-batch Adam on `train`, metrics on `test`. MPS models are
/// brought to canonical form before the first epoch and after every epoch.
TrainResult train_model(AnyModel model, const LabeledSet& train, const LabeledSet& test, const TrainConfig& config);

/// Mean training loss over `data` with the current weights.
double mean_loss(const AnyModel& model, const LabeledSet& data, LossKind loss);

struct CrossValidation {
  std::vector<Metrics> folds;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::vector<double> mean_auc;
};

/// k-fold cross-validation over contiguous shards of one seeded shuffle.
CrossValidation cross_validate(const std::function<AnyModel(int fold)>& make_model, const LabeledSet& data,
                               const TrainConfig& config);

}  // namespace tnjet
