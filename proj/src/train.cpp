#include "tnjet/train.hpp"

#include "tnjet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace tnjet {

namespace {

std::mt19937_64 epoch_rng(std::uint64_t seed, std::uint64_t epoch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32)};
  return std::mt19937_64(seq);
}

void add_into(Gradients& acc, const Gradients& g) {
  if (acc.empty()) {
    acc = g;
    return;
  }
  for (std::size_t i = 0; i < acc.size(); ++i) acc[i].values() += g[i].values();
}

struct ChunkResult {
  Gradients grads;
  double loss = 0.0;
};

// Pairwise reduction in a fixed order.
ChunkResult tree_reduce(std::vector<ChunkResult> parts) {
  while (parts.size() > 1) {
    std::vector<ChunkResult> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2) {
      ChunkResult merged = std::move(parts[i]);
      add_into(merged.grads, parts[i + 1].grads);
      merged.loss += parts[i + 1].loss;
      next.push_back(std::move(merged));
    }
    if (parts.size() % 2) next.push_back(std::move(parts.back()));
    parts = std::move(next);
  }
  return parts.empty() ? ChunkResult{} : std::move(parts.front());
}

void check_finite(double loss, int epoch, std::size_t batch_start) {
  if (!std::isfinite(loss)) {
    throw TrainingDiverged("non-finite training loss at epoch " + std::to_string(epoch) + ", batch starting at sample " +
                           std::to_string(batch_start));
  }
}

}  // namespace

std::string to_string(LossKind loss) { return loss == LossKind::CrossEntropy ? "cross-entropy" : "mse"; }

LossKind default_loss(Architecture arch) {
  return arch == Architecture::Mps ? LossKind::CrossEntropy : LossKind::MeanSquared;
}

OutputRule output_rule_for(LossKind loss) {
  return loss == LossKind::CrossEntropy ? OutputRule::Softmax : OutputRule::SquaredOverlap;
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0) || !(adam_beta2 > 0.0 && adam_beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in (0, 1)");
  }
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (epochs < 0) throw std::invalid_argument("epoch count must be non-negative");
  if (folds < 1) throw std::invalid_argument("fold count must be >= 1");
  if (chunk_size < 1) throw std::invalid_argument("chunk size must be >= 1");
}

Eigen::VectorXd softmax(const Eigen::VectorXd& scores) {
  const Eigen::ArrayXd e = (scores.array() - scores.maxCoeff()).exp();
  return e / e.sum();
}

LossValue softmax_ce(const Eigen::VectorXd& scores, int label) {
  const double shift = scores.maxCoeff();
  const Eigen::ArrayXd shifted = scores.array() - shift;
  const double log_sum = std::log(shifted.exp().sum());
  LossValue out;
  out.loss = log_sum - shifted(label);
  out.grad = (shifted - log_sum).exp().matrix();
  out.grad(label) -= 1.0;
  return out;
}

LossValue mse_loss(const Eigen::VectorXd& probs, int label) {
  Eigen::VectorXd diff = probs;
  diff(label) -= 1.0;
  const double c = static_cast<double>(probs.size());
  return {diff.squaredNorm() / c, (2.0 / c) * diff};
}

LossValue overlap_mse_loss(const Eigen::VectorXd& overlaps, int label) {
  const double total = overlaps.squaredNorm();
  if (!(total > 0.0)) {
    // All-zero overlaps: uniform prediction, no gradient signal through the normalization.
    return {mse_loss(Eigen::VectorXd::Constant(overlaps.size(), 1.0 / static_cast<double>(overlaps.size())), label).loss,
            Eigen::VectorXd::Zero(overlaps.size())};
  }
  const Eigen::VectorXd probs = overlaps.array().square() / total;
  const LossValue on_probs = mse_loss(probs, label);
  // dp_c/do_k = 2 o_k (delta_ck - p_c) / S
  const double weighted = on_probs.grad.dot(probs);
  LossValue out;
  out.loss = on_probs.loss;
  out.grad = (2.0 / total) * overlaps.cwiseProduct((on_probs.grad.array() - weighted).matrix());
  return out;
}

LossValue score_loss(LossKind kind, const Eigen::VectorXd& scores, int label) {
  return kind == LossKind::CrossEntropy ? softmax_ce(scores, label) : overlap_mse_loss(scores, label);
}

void AdamState::reset() {
  first_moment.clear();
  second_moment.clear();
  step = 0;
}

void adam_step(std::vector<Tensor>& params, const Gradients& grads, AdamState& state, const TrainConfig& config) {
  if (grads.size() != params.size()) throw ShapeError("gradient count does not match parameter count");
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.shape());
      state.second_moment.emplace_back(p.shape());
    }
  }
  state.step += 1;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i].shape()) throw ShapeError("gradient shape mismatch in adam_step");
    auto& m = state.first_moment[i].values();
    auto& v = state.second_moment[i].values();
    const auto& g = grads[i].values();
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    params[i].values().array() -=
        config.learning_rate * (m.array() / correction1) / ((v.array() / correction2).sqrt() + config.adam_eps);
  }
}

std::vector<double> auc_ovr(const Eigen::MatrixXd& scores, std::span<const int> labels) {
  const auto n = static_cast<std::size_t>(scores.rows());
  if (labels.size() != n) throw std::invalid_argument("score and label counts differ");
  std::vector<double> out;
  std::vector<std::size_t> order(n);
  std::vector<double> ranks(n);
  for (Index c = 0; c < scores.cols(); ++c) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores(static_cast<Index>(a), c) < scores(static_cast<Index>(b), c);
    });
    // Average 1-based ranks over tied groups.
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && scores(static_cast<Index>(order[j + 1]), c) == scores(static_cast<Index>(order[i]), c)) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
      i = j + 1;
    }
    double pos = 0.0, rank_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (labels[i] == c) {
        pos += 1.0;
        rank_sum += ranks[i];
      }
    }
    const double neg = static_cast<double>(n) - pos;
    if (pos == 0.0 || neg == 0.0) {
      throw std::domain_error("AUC undefined for class " + std::to_string(c) + ": one-vs-rest split is degenerate");
    }
    out.push_back((rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg));
  }
  return out;
}

LabeledSet LabeledSet::subset(std::span<const std::size_t> indices) const {
  LabeledSet out;
  out.inputs.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    out.inputs.push_back(inputs.at(i));
    out.labels.push_back(labels.at(i));
  }
  return out;
}

LabeledSet embed_batch(const JetBatch& batch, const EmbeddingSpec& spec) {
  LabeledSet out;
  out.inputs.reserve(static_cast<std::size_t>(batch.size()));
  for (Index b = 0; b < batch.size(); ++b) out.inputs.push_back(embed_jet(batch.jet(b), spec));
  out.labels = batch.labels;
  return out;
}

Evaluation evaluate(const AnyModel& model, const LabeledSet& data, OutputRule rule, bool require_auc) {
  const int classes = n_classes(model);
  Evaluation ev;
  ev.probabilities.resize(static_cast<Index>(data.size()), classes);
  ev.predictions.resize(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    const Eigen::VectorXd scores = forward(model, data.inputs[i]);
    ev.probabilities.row(static_cast<Index>(i)) = class_probabilities(scores, rule).transpose();
    ev.predictions[i] = predict(scores, rule);
  });
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) correct += ev.predictions[i] == data.labels[i];
  ev.accuracy = data.size() ? static_cast<double>(correct) / static_cast<double>(data.size()) : 0.0;
  if (data.size() > 0) {
    try {
      ev.auc = auc_ovr(ev.probabilities, data.labels);
    } catch (const std::domain_error&) {
      if (require_auc) throw;
    }
  }
  return ev;
}

double mean_loss(const AnyModel& model, const LabeledSet& data, LossKind loss) {
  std::vector<double> losses(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    losses[i] = score_loss(loss, forward(model, data.inputs[i]), data.labels[i]).loss;
  });
  double total = 0.0;
  for (double l : losses) total += l;
  return data.size() ? total / static_cast<double>(data.size()) : 0.0;
}

TrainResult train_model(AnyModel model, const LabeledSet& train, const LabeledSet& test, const TrainConfig& config) {
  config.validate();
  if (config.epochs > 0 && train.size() == 0) throw std::invalid_argument("training data is empty");
  const bool is_mps = std::holds_alternative<MpsModel>(model);
  const OutputRule rule = output_rule_for(config.loss);
  Metrics metrics;

  if (config.epochs > 0 && is_mps) model = canonicalize(std::get<MpsModel>(std::move(model)));

  AdamState adam;
  std::vector<std::size_t> order(train.size());
  const auto chunk = static_cast<std::size_t>(config.chunk_size);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = epoch_rng(config.seed, static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), rng);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const std::size_t n_chunks = (stop - start + chunk - 1) / chunk;
      std::vector<ChunkResult> parts(n_chunks);
      parallel_for(
          n_chunks,
          [&](std::size_t c) {
            ChunkResult& part = parts[c];
            const std::size_t lo = start + c * chunk;
            const std::size_t hi = std::min(stop, lo + chunk);
            for (std::size_t pos = lo; pos < hi; ++pos) {
              const std::size_t i = order[pos];
              const Eigen::VectorXd scores = forward(model, train.inputs[i]);
              const LossValue lv = score_loss(config.loss, scores, train.labels[i]);
              part.loss += lv.loss;
              add_into(part.grads, gradient(model, train.inputs[i], lv.grad));
            }
          },
          config.threads);
      ChunkResult total = tree_reduce(std::move(parts));
      check_finite(total.loss, epoch, start);
      const double scale = 1.0 / static_cast<double>(stop - start);
      for (auto& g : total.grads) g.values() *= scale;
      adam_step(tensors(model), total.grads, adam, config);
      epoch_loss += total.loss;
    }
    metrics.loss_curve.push_back(epoch_loss / static_cast<double>(train.size()));

    if (is_mps) {
      // The gauge change invalidates the moment estimates.
      model = canonicalize(std::get<MpsModel>(std::move(model)));
      adam.reset();
    }
  }

  if (test.size() > 0) {
    const Evaluation ev = evaluate(model, test, rule, false);
    metrics.accuracy = ev.accuracy;
    metrics.auc = ev.auc;
  }
  return {std::move(model), std::move(metrics)};
}

CrossValidation cross_validate(const std::function<AnyModel(int fold)>& make_model, const LabeledSet& data,
                               const TrainConfig& config) {
  config.validate();
  const auto k = static_cast<std::size_t>(config.folds);
  if (k < 2) throw std::invalid_argument("cross-validation needs at least 2 folds");
  if (data.size() < k) throw std::invalid_argument("fewer samples than folds");
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = epoch_rng(config.seed, ~std::uint64_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  CrossValidation cv;
  for (std::size_t f = 0; f < k; ++f) {
    const std::size_t lo = f * data.size() / k;
    const std::size_t hi = (f + 1) * data.size() / k;
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < order.size(); ++i) (i >= lo && i < hi ? test_idx : train_idx).push_back(order[i]);
    TrainConfig fold_config = config;
    fold_config.seed = config.seed + f;
    auto result = train_model(make_model(static_cast<int>(f)), data.subset(train_idx), data.subset(test_idx), fold_config);
    cv.folds.push_back(std::move(result.metrics));
  }
  double sum = 0.0, sq = 0.0;
  for (const auto& m : cv.folds) {
    sum += m.accuracy;
    sq += m.accuracy * m.accuracy;
  }
  const double kd = static_cast<double>(k);
  cv.mean_accuracy = sum / kd;
  cv.std_accuracy = std::sqrt(std::max(0.0, sq / kd - cv.mean_accuracy * cv.mean_accuracy));
  const std::size_t classes = cv.folds.front().auc.size();
  cv.mean_auc.assign(classes, 0.0);
  for (const auto& m : cv.folds) {
    for (std::size_t c = 0; c < std::min(classes, m.auc.size()); ++c) cv.mean_auc[c] += m.auc[c] / kd;
  }
  return cv;
}

}  // namespace tnjet
