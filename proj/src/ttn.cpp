#include "tnjet/ttn.hpp"

#include <bit>
#include <random>
#include <stdexcept>

namespace tnjet {

namespace {

constexpr double kRootStddev = 1e-2;

void check_input(const TtnModel& m, const EmbeddedJet& x) {
  if (static_cast<int>(x.sites.size()) != m.n_leaves()) {
    throw ShapeError("TTN has " + std::to_string(m.n_leaves()) + " leaves, input has " +
                     std::to_string(x.sites.size()));
  }
  for (std::size_t k = 0; k < x.sites.size(); ++k) {
    if (x.sites[k].size() != m.phys_dim()) {
      throw ShapeError("input site " + std::to_string(k) + " has dimension " + std::to_string(x.sites[k].size()) +
                       ", TTN physical dimension is " + std::to_string(m.phys_dim()));
    }
  }
}

// One node's merge: contract left child into the node, then the right child.
Tensor merge(const ContractFn& fn, const Tensor& node, const Tensor& left, const Tensor& right) {
  const Tensor partial = run_contract(fn, left, node, ContractionSpec::single(0, 0));  // (right, parent)
  return run_contract(fn, right, partial, ContractionSpec::single(0, 0));             // (parent)
}

// messages[l][j] is the output of node [l, j]; messages[L] holds the inputs.
std::vector<std::vector<Tensor>> upward(const TtnModel& m, const EmbeddedJet& x, const ContractFn& fn,
                                        const SiteFn& site_fn) {
  check_input(m, x);
  const int L = m.n_layers();
  std::vector<std::vector<Tensor>> msgs(static_cast<std::size_t>(L + 1));
  auto& inputs = msgs[static_cast<std::size_t>(L)];
  for (const auto& v : x.sites) inputs.push_back(Tensor::from_vector(site_fn ? site_fn(v) : v));
  for (int l = L - 1; l >= 0; --l) {
    const auto& below = msgs[static_cast<std::size_t>(l + 1)];
    auto& level = msgs[static_cast<std::size_t>(l)];
    for (int j = 0; j < (1 << l); ++j) {
      level.push_back(merge(fn, m.node(l, j), below[static_cast<std::size_t>(2 * j)],
                            below[static_cast<std::size_t>(2 * j + 1)]));
    }
  }
  return msgs;
}

}  // namespace

TtnModel::TtnModel(int n_leaves, int phys_dim, int chi, int n_classes, std::uint64_t seed, std::vector<Tensor> tensors)
    : n_leaves_(n_leaves), phys_dim_(phys_dim), chi_(chi), n_classes_(n_classes), seed_(seed), tensors_(std::move(tensors)) {
  if (n_leaves < 2 || !std::has_single_bit(static_cast<unsigned>(n_leaves))) {
    throw std::invalid_argument("TTN leaf count must be a power of two >= 2");
  }
  if (phys_dim < 1 || chi < 1 || n_classes < 1) throw std::invalid_argument("TTN dimensions must be positive");
  n_layers_ = std::countr_zero(static_cast<unsigned>(n_leaves));
  if (tensors_.size() != static_cast<std::size_t>(n_leaves - 1)) throw ShapeError("TTN needs N - 1 node tensors");
  for (int l = 0; l < n_layers_; ++l) {
    for (int j = 0; j < (1 << l); ++j) {
      if (node(l, j).shape() != node_shape(l)) {
        throw ShapeError("TTN node [" + std::to_string(l) + "," + std::to_string(j) + "] has shape " +
                         shape_string(node(l, j).shape()) + ", expected " + shape_string(node_shape(l)));
      }
    }
  }
}

Index ttn_child_dim(int n_layers, int d, int chi, int layer) {
  if (layer == n_layers - 1) return d;
  return capped_power(d, Index{1} << (n_layers - layer - 1), chi);
}

Shape ttn_node_shape(int n_layers, int d, int chi, int n_classes, int layer) {
  const Index child = ttn_child_dim(n_layers, d, chi, layer);
  const Index parent = layer == 0 ? Index{n_classes} : ttn_child_dim(n_layers, d, chi, layer - 1);
  return {child, child, parent};
}

Index TtnModel::child_dim(int layer) const { return ttn_child_dim(n_layers_, phys_dim_, chi_, layer); }

Index TtnModel::parent_dim(int layer) const { return layer == 0 ? Index{n_classes_} : child_dim(layer - 1); }

Shape TtnModel::node_shape(int layer) const { return ttn_node_shape(n_layers_, phys_dim_, chi_, n_classes_, layer); }

TtnModel build_ttn(int n, int d, int chi, int n_classes, std::uint64_t seed) {
  if (n < 4 || !std::has_single_bit(static_cast<unsigned>(n))) {
    throw std::invalid_argument("TTN leaf count must be a power of two >= 4, got " + std::to_string(n));
  }
  if (d < 1 || chi < 1 || n_classes < 1) throw std::invalid_argument("TTN dimensions must be positive");
  const int layers = std::countr_zero(static_cast<unsigned>(n));
  std::mt19937_64 gen(seed);
  std::vector<Tensor> tensors;
  for (int l = 0; l < layers; ++l) {
    for (int j = 0; j < (1 << l); ++j) {
      const Shape shape = ttn_node_shape(layers, d, chi, n_classes, l);
      if (l == 0) {
        tensors.push_back(Tensor::random_normal(shape, gen, kRootStddev));
      } else {
        const Tensor gaussian = Tensor::random_normal(shape, gen, 1.0);
        tensors.push_back(qr_split(gaussian, {0, 1}, {2}).q);
      }
    }
  }
  return TtnModel(n, d, chi, n_classes, seed, std::move(tensors));
}

std::int64_t param_count(const TtnModel& m) {
  std::int64_t total = 0;
  for (const auto& t : m.tensors()) total += t.size();
  return total;
}

Eigen::VectorXd forward_ttn(const TtnModel& m, const EmbeddedJet& x, const ContractFn& contract_fn,
                            const SiteFn& site_fn) {
  return upward(m, x, contract_fn, site_fn)[0][0].values();
}

Eigen::VectorXd probabilities_ttn(const Eigen::VectorXd& overlaps) {
  const double total = overlaps.squaredNorm();
  if (!(total > 0.0)) throw std::domain_error("class overlaps are all zero");
  return overlaps.array().square() / total;
}

Gradients grad_ttn(const TtnModel& m, const EmbeddedJet& x, const Eigen::VectorXd& upstream) {
  if (upstream.size() != m.n_classes()) throw ShapeError("upstream gradient has wrong class count");
  const auto msgs = upward(m, x, {}, {});
  const int L = m.n_layers();
  Gradients grads(m.tensors().size());

  // env[j] for the current layer: derivative of the objective w.r.t. node [l, j]'s output.
  std::vector<Tensor> env{Tensor::from_vector(upstream)};
  for (int l = 0; l < L; ++l) {
    const auto& below = msgs[static_cast<std::size_t>(l + 1)];
    std::vector<Tensor> next_env;
    next_env.reserve(env.size() * 2);
    for (int j = 0; j < (1 << l); ++j) {
      const Tensor& e = env[static_cast<std::size_t>(j)];
      const Tensor& node = m.node(l, j);
      const Tensor& u = below[static_cast<std::size_t>(2 * j)];
      const Tensor& v = below[static_cast<std::size_t>(2 * j + 1)];
      grads[TtnModel::node_index(l, j)] = outer(outer(u, v), e);
      if (l + 1 < L) {
        const Tensor node_e = contract(node, e, ContractionSpec::single(2, 0));  // (left, right)
        next_env.push_back(contract(node_e, v, ContractionSpec::single(1, 0)));
        next_env.push_back(contract(u, node_e, ContractionSpec::single(0, 0)));
      }
    }
    env = std::move(next_env);
  }
  return grads;
}

}  // namespace tnjet
