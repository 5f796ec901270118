#pragma once

// Pieces shared by the MPS and TTN classifiers.

#include "tnjet/embedding.hpp"
#include "tnjet/tensor.hpp"

#include <functional>
#include <vector>

namespace tnjet {

/// Replacement for `contract` used by inference schedules, e.g. to emulate
/// fixed-point arithmetic. An empty function means plain `contract`.
using ContractFn = std::function<Tensor(const Tensor&, const Tensor&, const ContractionSpec&)>;

inline Tensor run_contract(const ContractFn& fn, const Tensor& a, const Tensor& b, const ContractionSpec& spec) {
  return fn ? fn(a, b, spec) : contract(a, b, spec);
}

/// Optional transformation applied to each input site vector before inference.
using SiteFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

/// min(base^exp, cap) without overflow.
inline Index capped_power(Index base, Index exp, Index cap) {
  Index value = 1;
  for (Index i = 0; i < exp; ++i) {
    if (value >= cap) return cap;
    value *= base;
  }
  return std::min(value, cap);
}

/// One gradient tensor per model tensor, in model order.
using Gradients = std::vector<Tensor>;

}  // namespace tnjet
