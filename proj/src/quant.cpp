#include "tnjet/quant.hpp"

#include "tnjet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace tnjet {

FxpFormat::FxpFormat(int fb) : frac_bits(fb) {
  if (fb < 1 || fb > kMaxFracBits) {
    throw std::invalid_argument("fractional bits must lie in [1, " + std::to_string(kMaxFracBits) + "], got " +
                                std::to_string(fb));
  }
}

double quantize_value(double x, const FxpFormat& f) {
  // nearbyint honours the default round-to-nearest-even mode.
  const double scaled = std::nearbyint(std::ldexp(x, f.frac_bits));
  return std::clamp(std::ldexp(scaled, -f.frac_bits), f.min_value(), f.max_value());
}

Tensor quantize_tensor(const Tensor& t, const FxpFormat& f) {
  Tensor out = t;
  for (Index i = 0; i < out.size(); ++i) out[i] = quantize_value(out[i], f);
  return out;
}

Eigen::VectorXd quantize_vector(const Eigen::VectorXd& v, const FxpFormat& f) {
  return v.unaryExpr([&](double x) { return quantize_value(x, f); });
}

std::string to_string(QuantMode mode) { return mode == QuantMode::Fpop ? "fpop" : "qop"; }

QuantMode parse_quant_mode(const std::string& text) {
  if (text == "fpop") return QuantMode::Fpop;
  if (text == "qop") return QuantMode::Qop;
  throw std::invalid_argument("unknown quantization mode '" + text + "'");
}

QuantizedModel quantize_model(const AnyModel& model, const FxpFormat& f, QuantMode mode) {
  QuantizedModel qm{model, f, mode, QopGranularity::PerContraction};
  for (auto& t : tensors(qm.base)) t = quantize_tensor(t, f);
  return qm;
}

double saturated_fraction(const AnyModel& model, const FxpFormat& f) {
  std::int64_t saturated = 0, total = 0;
  const double half = 0.5 * f.resolution();
  for (const auto& t : tensors(model)) {
    for (Index i = 0; i < t.size(); ++i) {
      saturated += (t[i] < f.min_value() - half || t[i] >= f.max_value() + half) ? 1 : 0;
    }
    total += t.size();
  }
  return total ? static_cast<double>(saturated) / static_cast<double>(total) : 0.0;
}

Tensor quantized_contract(const Tensor& a, const Tensor& b, const ContractionSpec& spec, const FxpFormat& f,
                          QopGranularity granularity) {
  if (granularity == QopGranularity::PerContraction) return quantize_tensor(contract(a, b, spec), f);

  validate_contraction(a, b, spec);
  const auto a_free = detail::free_axes(a.rank(), spec.left_axes);
  const auto b_free = detail::free_axes(b.rank(), spec.right_axes);
  std::vector<int> a_perm = a_free, b_perm = spec.right_axes;
  a_perm.insert(a_perm.end(), spec.left_axes.begin(), spec.left_axes.end());
  b_perm.insert(b_perm.end(), b_free.begin(), b_free.end());
  Index inner = 1;
  for (int ax : spec.left_axes) inner *= a.dim(ax);
  Shape out_shape;
  for (int ax : a_free) out_shape.push_back(a.dim(ax));
  for (int ax : b_free) out_shape.push_back(b.dim(ax));
  const Tensor ap = permute(a, a_perm);
  const Tensor bp = permute(b, b_perm);
  const Index rows = ap.size() / inner;
  const Index cols = bp.size() / inner;
  const auto am = ap.matrix_view(rows);
  const auto bm = bp.matrix_view(inner);
  Tensor out(out_shape);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      double acc = 0.0;
      for (Index k = 0; k < inner; ++k) acc = quantize_value(acc + quantize_value(am(i, k) * bm(k, j), f), f);
      out[i * cols + j] = acc;
    }
  }
  record_contraction(rows * cols, inner);
  return out;
}

Eigen::VectorXd forward_quantized(const QuantizedModel& qm, const EmbeddedJet& x) {
  if (qm.mode == QuantMode::Fpop) return forward(qm.base, x);
  const FxpFormat f = qm.format;
  const QopGranularity g = qm.granularity;
  const ContractFn fn = [f, g](const Tensor& a, const Tensor& b, const ContractionSpec& spec) {
    return quantized_contract(a, b, spec, f, g);
  };
  const SiteFn site = [f](const Eigen::VectorXd& v) { return quantize_vector(v, f); };
  return forward(qm.base, x, fn, site);
}

namespace {

// Tensor visiting order and, per tensor, the contraction calls (schedule
// positions) whose results first depend on it.
struct CallOwnership {
  std::vector<std::size_t> order;
  std::vector<std::vector<std::size_t>> calls;
};

CallOwnership ownership(const AnyModel& model) {
  CallOwnership own;
  if (const auto* m = std::get_if<MpsModel>(&model)) {
    const int n = m->n_sites();
    const int l = m->label_site();
    own.calls.resize(static_cast<std::size_t>(n));
    std::size_t call = 0;
    for (int k = 0; k < n; ++k) own.calls[static_cast<std::size_t>(k)].push_back(call++);
    for (int k = 1; k < l; ++k) own.calls[static_cast<std::size_t>(k)].push_back(call++);
    for (int k = n - 2; k > l; --k) own.calls[static_cast<std::size_t>(k)].push_back(call++);
    if (l > 0) own.calls[static_cast<std::size_t>(l)].push_back(call++);
    if (l < n - 1) own.calls[static_cast<std::size_t>(l)].push_back(call++);
    for (int k = 0; k < l; ++k) own.order.push_back(static_cast<std::size_t>(k));
    for (int k = n - 1; k > l; --k) own.order.push_back(static_cast<std::size_t>(k));
    own.order.push_back(static_cast<std::size_t>(l));
    return own;
  }
  const auto& t = std::get<TtnModel>(model);
  own.calls.resize(t.tensors().size());
  std::size_t call = 0;
  for (int l = t.n_layers() - 1; l >= 0; --l) {
    for (int j = 0; j < (1 << l); ++j) {
      const std::size_t idx = TtnModel::node_index(l, j);
      own.calls[idx] = {call, call + 1};
      call += 2;
      own.order.push_back(idx);
    }
  }
  return own;
}

}  // namespace

std::vector<double> activation_maxima(const AnyModel& model, const LabeledSet& data) {
  std::vector<std::vector<double>> per_sample(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    auto& rec = per_sample[i];
    const ContractFn fn = [&rec](const Tensor& a, const Tensor& b, const ContractionSpec& spec) {
      Tensor t = contract(a, b, spec);
      rec.push_back(t.size() ? t.values().cwiseAbs().maxCoeff() : 0.0);
      return t;
    };
    forward(model, data.inputs[i], fn);
  });
  std::vector<double> out;
  for (const auto& rec : per_sample) {
    if (out.size() < rec.size()) out.resize(rec.size(), 0.0);
    for (std::size_t c = 0; c < rec.size(); ++c) out[c] = std::max(out[c], rec[c]);
  }
  return out;
}

RangeCalibration calibrate_ranges(const AnyModel& model, const LabeledSet& calib, double activation_target,
                                  double weight_limit) {
  if (!(activation_target > 0.0) || !(weight_limit > 0.0)) throw std::invalid_argument("calibration limits must be positive");
  const CallOwnership own = ownership(model);
  RangeCalibration cal;
  cal.shifts.assign(tensors(model).size(), 0);
  AnyModel work = model;
  for (std::size_t idx : own.order) {
    Tensor& t = tensors(work)[idx];
    const double w = t.size() ? t.values().cwiseAbs().maxCoeff() : 0.0;
    if (!(w > 0.0)) continue;
    int shift = static_cast<int>(std::floor(std::log2(weight_limit / w)));
    if (std::ldexp(w, shift) >= weight_limit) --shift;
    if (calib.size() > 0) {
      const auto maxima = activation_maxima(work, calib);
      double act = 0.0;
      for (std::size_t c : own.calls[idx]) act = std::max(act, maxima.at(c));
      if (act > 0.0) {
        int a_shift = static_cast<int>(std::floor(std::log2(activation_target / act)));
        if (std::ldexp(act, a_shift) >= activation_target) --a_shift;
        shift = std::min(shift, a_shift);
      }
    }
    t.values() *= std::ldexp(1.0, shift);
    cal.shifts[idx] = shift;
  }
  return cal;
}

AnyModel apply_calibration(const AnyModel& model, const RangeCalibration& cal) {
  AnyModel out = model;
  auto& ts = tensors(out);
  if (cal.shifts.size() != ts.size()) throw std::invalid_argument("calibration does not match the model");
  for (std::size_t i = 0; i < ts.size(); ++i) ts[i].values() *= std::ldexp(1.0, cal.shifts[i]);
  return out;
}

namespace {

double quantized_accuracy(const QuantizedModel& qm, const LabeledSet& data, OutputRule rule) {
  std::vector<int> hit(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    hit[i] = predict(forward_quantized(qm, data.inputs[i]), rule) == data.labels[i];
  });
  std::size_t correct = 0;
  for (int h : hit) correct += static_cast<std::size_t>(h);
  return data.size() ? static_cast<double>(correct) / static_cast<double>(data.size()) : 0.0;
}

}  // namespace

SweepResult ptq_sweep(const AnyModel& model, const LabeledSet& data, std::span<const int> fb_list,
                      std::span<const QuantMode> modes, OutputRule rule) {
  SweepResult out;
  out.reference_accuracy = evaluate(model, data, rule, false).accuracy;
  std::vector<int> fbs(fb_list.begin(), fb_list.end());
  std::sort(fbs.begin(), fbs.end());
  fbs.erase(std::unique(fbs.begin(), fbs.end()), fbs.end());
  for (int fb : fbs) {
    for (QuantMode mode : modes) {
      const QuantizedModel qm = quantize_model(model, FxpFormat(fb), mode);
      out.rows.push_back({architecture_of(model), n_sites(model), fb, mode, quantized_accuracy(qm, data, rule)});
    }
  }
  return out;
}

int find_knee(const SweepResult& sweep, QuantMode mode, double threshold) {
  int knee = 0;
  for (const auto& row : sweep.rows) {
    if (row.mode == mode && sweep.reference_accuracy - row.accuracy > threshold) knee = std::max(knee, row.frac_bits);
  }
  return knee;
}

double prediction_agreement(const QuantizedModel& a, const QuantizedModel& b, const LabeledSet& data, OutputRule rule) {
  std::vector<int> same(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    same[i] = predict(forward_quantized(a, data.inputs[i]), rule) == predict(forward_quantized(b, data.inputs[i]), rule);
  });
  std::size_t count = 0;
  for (int s : same) count += static_cast<std::size_t>(s);
  return data.size() ? static_cast<double>(count) / static_cast<double>(data.size()) : 1.0;
}

std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed;
  out << "arch,N,FB,mode,accuracy\n";
  for (const auto& r : sweep.rows) {
    out << to_string(r.arch) << ',' << r.n_sites << ',' << r.frac_bits << ',' << to_string(r.mode) << ','
        << r.accuracy << '\n';
  }
  return out.str();
}

}  // namespace tnjet
