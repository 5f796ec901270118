#pragma once

// Binary tree tensor network classifier over N = 2^L input sites.
//
// Node [l, j] (layer l in 0..L-1, j in 0..2^l-1) has shape
// (left child, right child, parent). Leaf-layer children are the physical
// inputs of dimension d; virtual child legs of layer l have dimension
// D_l = min(d^(2^(L-l-1)), chi). The root [0, 0] carries the class axis as its
// parent leg.

#include "tnjet/network.hpp"

#include <cstdint>

namespace tnjet {

class TtnModel {
 public:
  TtnModel() = default;
  TtnModel(int n_leaves, int phys_dim, int chi, int n_classes, std::uint64_t seed, std::vector<Tensor> tensors);

  int n_leaves() const { return n_leaves_; }
  int phys_dim() const { return phys_dim_; }
  int chi() const { return chi_; }
  int n_classes() const { return n_classes_; }
  int n_layers() const { return n_layers_; }
  std::uint64_t seed() const { return seed_; }

  /// Dimension of the child legs of nodes in layer l.
  Index child_dim(int layer) const;
  /// Dimension of the parent leg of nodes in layer l (class count for the root).
  Index parent_dim(int layer) const;
  Shape node_shape(int layer) const;

  /// Flat position of node [l, j]: layers are stored root first.
  static std::size_t node_index(int layer, int j) { return (std::size_t{1} << layer) - 1 + static_cast<std::size_t>(j); }

  const Tensor& node(int layer, int j) const { return tensors_[node_index(layer, j)]; }
  Tensor& node(int layer, int j) { return tensors_[node_index(layer, j)]; }

  std::vector<Tensor>& tensors() { return tensors_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }

 private:
  int n_leaves_ = 0;
  int phys_dim_ = 0;
  int chi_ = 0;
  int n_classes_ = 0;
  int n_layers_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<Tensor> tensors_;
};

Index ttn_child_dim(int n_layers, int d, int chi, int layer);
Shape ttn_node_shape(int n_layers, int d, int chi, int n_classes, int layer);

/// Non-root nodes are random isometries (children -> parent); the root is Normal(0, 0.01^2).
TtnModel build_ttn(int n, int d, int chi, int n_classes, std::uint64_t seed);

std::int64_t param_count(const TtnModel& m);

/// Class overlaps from the layer-by-layer schedule (leaves to root).
Eigen::VectorXd forward_ttn(const TtnModel& m, const EmbeddedJet& x, const ContractFn& contract_fn = {},
                            const SiteFn& site_fn = {});

/// p_c = o_c^2 / sum_k o_k^2.
Eigen::VectorXd probabilities_ttn(const Eigen::VectorXd& overlaps);

/// Gradient of <upstream, forward_ttn(m, x)> with respect to every node.
Gradients grad_ttn(const TtnModel& m, const EmbeddedJet& x, const Eigen::VectorXd& upstream);

}  // namespace tnjet
