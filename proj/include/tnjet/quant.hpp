#pragma once

// Post-training fixed-point quantization and emulated fixed-point inference.

#include "tnjet/train.hpp"

#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace tnjet {

/// Signed fixed point with 2 integer bits (sign included): range [-2, 2 - 2^-FB].
struct FxpFormat {
  int frac_bits = 14;

  static constexpr int kIntBits = 2;
  static constexpr int kMaxFracBits = 30;

  explicit FxpFormat(int fb = 14);
  double resolution() const { return std::ldexp(1.0, -frac_bits); }
  double min_value() const { return -2.0; }
  double max_value() const { return 2.0 - resolution(); }
  int word_bits() const { return kIntBits + frac_bits; }
};

/// Round half to even onto the 2^-FB grid, then saturate.
double quantize_value(double x, const FxpFormat& f);
Tensor quantize_tensor(const Tensor& t, const FxpFormat& f);
Eigen::VectorXd quantize_vector(const Eigen::VectorXd& v, const FxpFormat& f);

enum class QuantMode { Fpop, Qop };
enum class QopGranularity { PerContraction, PerMac };

std::string to_string(QuantMode mode);
QuantMode parse_quant_mode(const std::string& text);

struct QuantizedModel {
  AnyModel base;  // every weight on the grid
  FxpFormat format;
  QuantMode mode = QuantMode::Qop;
  QopGranularity granularity = QopGranularity::PerContraction;
};

QuantizedModel quantize_model(const AnyModel& model, const FxpFormat& f, QuantMode mode = QuantMode::Qop);

/// Fraction of weights that hit a saturation bound when quantized.
double saturated_fraction(const AnyModel& model, const FxpFormat& f);

/// Power-of-two exponent per model tensor (model order).
struct RangeCalibration {
  std::vector<int> shifts;
};

/// Chooses per-tensor power-of-two scales from calibration data so that every
/// pairwise contraction result stays below `activation_target` in magnitude and
/// every weight below `weight_limit`. Tensors are visited in inference order;
/// each one is scaled as far up (or down) as its own outputs allow.
/// Positive rescaling leaves argmax predictions and squared-overlap
/// probabilities unchanged, and power-of-two factors are exact in floating point.
RangeCalibration calibrate_ranges(const AnyModel& model, const LabeledSet& calib, double activation_target = 1.75,
                                  double weight_limit = 1.75);
AnyModel apply_calibration(const AnyModel& model, const RangeCalibration& cal);

/// Largest |result| of each pairwise contraction, in schedule order, over the data.
std::vector<double> activation_maxima(const AnyModel& model, const LabeledSet& data);

/// Fixed-point contraction: full-precision accumulation, result re-quantized.
/// With PerMac every product and every partial sum is re-quantized instead.
Tensor quantized_contract(const Tensor& a, const Tensor& b, const ContractionSpec& spec, const FxpFormat& f,
                          QopGranularity granularity = QopGranularity::PerContraction);

/// fpop: quantized weights, full-precision inputs and operations.
/// qop: inputs quantized, every pairwise contraction result re-quantized.
Eigen::VectorXd forward_quantized(const QuantizedModel& qm, const EmbeddedJet& x);

struct SweepRow {
  Architecture arch = Architecture::Mps;
  int n_sites = 0;
  int frac_bits = 0;
  QuantMode mode = QuantMode::Qop;
  double accuracy = 0.0;
};

struct SweepResult {
  double reference_accuracy = 0.0;  // unquantized model
  std::vector<SweepRow> rows;       // ordered by FB, then mode
};

SweepResult ptq_sweep(const AnyModel& model, const LabeledSet& data, std::span<const int> fb_list,
                      std::span<const QuantMode> modes, OutputRule rule);

/// Largest FB whose accuracy drop from the reference exceeds `threshold`, or 0 if none does.
int find_knee(const SweepResult& sweep, QuantMode mode, double threshold = 0.02);

/// Fraction of samples where the two models predict the same class.
double prediction_agreement(const QuantizedModel& a, const QuantizedModel& b, const LabeledSet& data, OutputRule rule);

std::string sweep_csv(const SweepResult& sweep);

}  // namespace tnjet
