#pragma once

// Matrix product state classifier.
//
// Site k holds a tensor of shape (b_k, d, b_{k+1}); the label site carries an
// extra trailing class axis, (b_l, d, b_{l+1}, C). Bond dimensions are capped
// from both ends, b_k = min(d^k, d^(N-k), D), with b_0 = b_N = 1.
//
// Inference follows the two-chain schedule: every site tensor is first
// contracted with its input vector, then a left chain and a right chain of
// matrix-vector products run toward the label site, and finally the two
// messages are merged through the label tensor.

#include "tnjet/network.hpp"

#include <cstdint>

namespace tnjet {

class MpsModel {
 public:
  MpsModel() = default;
  MpsModel(int n_sites, int phys_dim, int bond_cap, int n_classes, int label_site, std::uint64_t seed,
           std::vector<Tensor> tensors);

  int n_sites() const { return n_sites_; }
  int phys_dim() const { return phys_dim_; }
  int bond_cap() const { return bond_cap_; }
  int n_classes() const { return n_classes_; }
  int label_site() const { return label_site_; }
  std::uint64_t seed() const { return seed_; }

  /// Bond dimension b_k for k in [0, n_sites].
  Index bond(int k) const;
  /// Expected shape of site k's tensor.
  Shape site_shape(int k) const;

  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  const Tensor& site(int k) const { return tensors_[static_cast<std::size_t>(k)]; }

 private:
  int n_sites_ = 0;
  int phys_dim_ = 0;
  int bond_cap_ = 0;
  int n_classes_ = 0;
  int label_site_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<Tensor> tensors_;
};

/// b_0..b_n with b_k = min(d^k, d^(n-k), cap).
std::vector<Index> mps_bond_dims(int n, int d, int bond_cap);

inline int default_label_site(int n) { return n / 2; }

/// Entries i.i.d. Normal(0, 0.01^2), deterministic in `seed`.
MpsModel build_mps(int n, int d, int bond_cap, int n_classes, int label_site, std::uint64_t seed);
MpsModel build_mps(int n, int d, int bond_cap, int n_classes, std::uint64_t seed);

std::int64_t param_count(const MpsModel& m);

/// QR sweeps from both ends toward the label site.
MpsModel canonicalize(MpsModel m);

/// Largest deviation from identity over all non-label isometries.
double isometry_error(const MpsModel& m);

/// Class scores. `site_fn` transforms each input vector before it is used.
Eigen::VectorXd forward_mps(const MpsModel& m, const EmbeddedJet& x, const ContractFn& contract_fn = {},
                            const SiteFn& site_fn = {});

/// Gradient of <upstream, forward_mps(m, x)> with respect to every site tensor.
Gradients grad_mps(const MpsModel& m, const EmbeddedJet& x, const Eigen::VectorXd& upstream);

}  // namespace tnjet
