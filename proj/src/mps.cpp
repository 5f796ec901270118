#include "tnjet/mps.hpp"

#include <random>
#include <stdexcept>

namespace tnjet {

namespace {

constexpr double kInitStddev = 1e-2;

Tensor ones(Index n) { return Tensor::constant(Shape{n}, 1.0); }

void check_input(const MpsModel& m, const EmbeddedJet& x) {
  if (static_cast<int>(x.sites.size()) != m.n_sites()) {
    throw ShapeError("MPS has " + std::to_string(m.n_sites()) + " sites, input has " +
                     std::to_string(x.sites.size()));
  }
  for (std::size_t k = 0; k < x.sites.size(); ++k) {
    if (x.sites[k].size() != m.phys_dim()) {
      throw ShapeError("input site " + std::to_string(k) + " has dimension " + std::to_string(x.sites[k].size()) +
                       ", MPS physical dimension is " + std::to_string(m.phys_dim()));
    }
  }
}

// Cached messages of one forward pass.
struct Chain {
  std::vector<Tensor> site_vectors;  // phi_k as rank-1 tensors
  std::vector<Tensor> transfer;      // M_k = A_k . phi_k: (b_k, b_{k+1}) or (b_l, b_{l+1}, C)
  std::vector<Tensor> left;          // left[k], k < l: message on bond k+1
  std::vector<Tensor> right;         // right[k], k > l: message on bond k
  Eigen::VectorXd scores;
};

Chain run_chain(const MpsModel& m, const EmbeddedJet& x, const ContractFn& fn, const SiteFn& site_fn) {
  check_input(m, x);
  const int n = m.n_sites();
  const int l = m.label_site();
  const auto un = static_cast<std::size_t>(n);
  Chain c;
  c.site_vectors.reserve(un);
  c.transfer.reserve(un);
  c.left.resize(un);
  c.right.resize(un);

  for (int k = 0; k < n; ++k) {
    const auto& v = x.sites[static_cast<std::size_t>(k)];
    c.site_vectors.push_back(Tensor::from_vector(site_fn ? site_fn(v) : v));
    c.transfer.push_back(run_contract(fn, m.site(k), c.site_vectors.back(), ContractionSpec::single(1, 0)));
  }

  for (int k = 0; k < l; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    if (k == 0) {
      c.left[uk] = reshape(c.transfer[0], Shape{m.bond(1)});
    } else {
      c.left[uk] = run_contract(fn, c.left[uk - 1], c.transfer[uk], ContractionSpec::single(0, 0));
    }
  }
  for (int k = n - 1; k > l; --k) {
    const auto uk = static_cast<std::size_t>(k);
    if (k == n - 1) {
      c.right[uk] = reshape(c.transfer[uk], Shape{m.bond(k)});
    } else {
      c.right[uk] = run_contract(fn, c.transfer[uk], c.right[uk + 1], ContractionSpec::single(1, 0));
    }
  }

  const auto ul = static_cast<std::size_t>(l);
  Tensor center;
  if (l > 0) {
    center = run_contract(fn, c.left[ul - 1], c.transfer[ul], ContractionSpec::single(0, 0));
  } else {
    center = reshape(c.transfer[ul], Shape{m.bond(l + 1), m.n_classes()});
  }
  if (l < n - 1) {
    center = run_contract(fn, c.right[ul + 1], center, ContractionSpec::single(0, 0));
  } else {
    center = reshape(std::move(center), Shape{m.n_classes()});
  }
  c.scores = center.values();
  return c;
}

}  // namespace

MpsModel::MpsModel(int n_sites, int phys_dim, int bond_cap, int n_classes, int label_site, std::uint64_t seed,
                   std::vector<Tensor> tensors)
    : n_sites_(n_sites),
      phys_dim_(phys_dim),
      bond_cap_(bond_cap),
      n_classes_(n_classes),
      label_site_(label_site),
      seed_(seed),
      tensors_(std::move(tensors)) {
  if (n_sites < 1 || phys_dim < 1 || bond_cap < 1 || n_classes < 1) {
    throw std::invalid_argument("MPS dimensions must be positive");
  }
  if (label_site < 0 || label_site >= n_sites) {
    throw std::invalid_argument("label site " + std::to_string(label_site) + " outside [0, " +
                                std::to_string(n_sites) + ")");
  }
  if (static_cast<int>(tensors_.size()) != n_sites) throw ShapeError("MPS needs one tensor per site");
  for (int k = 0; k < n_sites; ++k) {
    if (tensors_[static_cast<std::size_t>(k)].shape() != site_shape(k)) {
      throw ShapeError("MPS site " + std::to_string(k) + " has shape " +
                       shape_string(tensors_[static_cast<std::size_t>(k)].shape()) + ", expected " +
                       shape_string(site_shape(k)));
    }
  }
}

Index MpsModel::bond(int k) const {
  if (k <= 0 || k >= n_sites_) return 1;
  return std::min({capped_power(phys_dim_, k, bond_cap_), capped_power(phys_dim_, n_sites_ - k, bond_cap_),
                   Index{bond_cap_}});
}

Shape MpsModel::site_shape(int k) const {
  Shape s{bond(k), phys_dim_, bond(k + 1)};
  if (k == label_site_) s.push_back(n_classes_);
  return s;
}

std::vector<Index> mps_bond_dims(int n, int d, int bond_cap) {
  std::vector<Index> bonds(static_cast<std::size_t>(n + 1), 1);
  for (int k = 1; k < n; ++k) {
    bonds[static_cast<std::size_t>(k)] =
        std::min({capped_power(d, k, bond_cap), capped_power(d, n - k, bond_cap), Index{bond_cap}});
  }
  return bonds;
}

MpsModel build_mps(int n, int d, int bond_cap, int n_classes, int label_site, std::uint64_t seed) {
  if (n < 1 || d < 1 || bond_cap < 1 || n_classes < 1) throw std::invalid_argument("MPS dimensions must be positive");
  if (label_site < 0 || label_site >= n) throw std::invalid_argument("label site outside the chain");
  const auto bonds = mps_bond_dims(n, d, bond_cap);
  std::mt19937_64 gen(seed);
  std::vector<Tensor> tensors;
  for (int k = 0; k < n; ++k) {
    Shape s{bonds[static_cast<std::size_t>(k)], d, bonds[static_cast<std::size_t>(k + 1)]};
    if (k == label_site) s.push_back(n_classes);
    tensors.push_back(Tensor::random_normal(s, gen, kInitStddev));
  }
  return MpsModel(n, d, bond_cap, n_classes, label_site, seed, std::move(tensors));
}

MpsModel build_mps(int n, int d, int bond_cap, int n_classes, std::uint64_t seed) {
  return build_mps(n, d, bond_cap, n_classes, default_label_site(n), seed);
}

std::int64_t param_count(const MpsModel& m) {
  std::int64_t total = 0;
  for (const auto& t : m.tensors()) total += t.size();
  return total;
}

MpsModel canonicalize(MpsModel m) {
  auto& ts = m.tensors();
  const int n = m.n_sites();
  const int l = m.label_site();
  for (int k = 0; k < l; ++k) {
    auto& a = ts[static_cast<std::size_t>(k)];
    auto [q, r] = qr_split(a, {0, 1}, {2});
    if (q.shape() != a.shape()) throw ShapeError("canonicalize: left QR changed a bond dimension");
    a = std::move(q);
    auto& next = ts[static_cast<std::size_t>(k + 1)];
    next = contract(r, next, ContractionSpec::single(1, 0));
  }
  for (int k = n - 1; k > l; --k) {
    auto& a = ts[static_cast<std::size_t>(k)];
    auto [q, r] = qr_split(a, {1, 2}, {0});  // q: (d, b_right, b_left'), r: (b_left', b_left)
    Tensor q_site = permute(q, {2, 0, 1});
    if (q_site.shape() != a.shape()) throw ShapeError("canonicalize: right QR changed a bond dimension");
    a = std::move(q_site);
    auto& prev = ts[static_cast<std::size_t>(k - 1)];
    Tensor merged = contract(prev, r, ContractionSpec::single(2, 1));
    prev = (prev.rank() == 4) ? permute(merged, {0, 1, 3, 2}) : std::move(merged);
  }
  return m;
}

double isometry_error(const MpsModel& m) {
  double worst = 0.0;
  for (int k = 0; k < m.n_sites(); ++k) {
    if (k == m.label_site()) continue;
    const auto& a = m.site(k);
    const Tensor gram = k < m.label_site() ? contract(a, a, ContractionSpec{{0, 1}, {0, 1}})
                                           : contract(a, a, ContractionSpec{{1, 2}, {1, 2}});
    const auto g = gram.matrix_view(gram.dim(0));
    worst = std::max(worst, (g - Eigen::MatrixXd::Identity(g.rows(), g.cols())).cwiseAbs().maxCoeff());
  }
  return worst;
}

Eigen::VectorXd forward_mps(const MpsModel& m, const EmbeddedJet& x, const ContractFn& contract_fn,
                            const SiteFn& site_fn) {
  return run_chain(m, x, contract_fn, site_fn).scores;
}

Gradients grad_mps(const MpsModel& m, const EmbeddedJet& x, const Eigen::VectorXd& upstream) {
  if (upstream.size() != m.n_classes()) throw ShapeError("upstream gradient has wrong class count");
  const Chain c = run_chain(m, x, {}, {});
  const int n = m.n_sites();
  const int l = m.label_site();
  const auto ul = static_cast<std::size_t>(l);
  const Tensor u = Tensor::from_vector(upstream);

  const Tensor left_msg = l > 0 ? c.left[ul - 1] : ones(1);
  const Tensor right_msg = l < n - 1 ? c.right[ul + 1] : ones(1);

  Gradients grads(static_cast<std::size_t>(n));
  grads[ul] = outer(outer(outer(left_msg, c.site_vectors[ul]), right_msg), u);

  // Label transfer matrix projected on the upstream class weights: (b_l, b_{l+1}).
  const Tensor projected = contract(c.transfer[ul], u, ContractionSpec::single(2, 0));

  // Sites left of the label: env on bond k+1.
  Tensor env = contract(projected, right_msg, ContractionSpec::single(1, 0));
  for (int k = l - 1; k >= 0; --k) {
    const auto uk = static_cast<std::size_t>(k);
    const Tensor lhs = k > 0 ? c.left[uk - 1] : ones(1);
    grads[uk] = outer(outer(lhs, c.site_vectors[uk]), env);
    if (k > 0) env = contract(c.transfer[uk], env, ContractionSpec::single(1, 0));
  }

  // Sites right of the label: env on bond k.
  env = contract(left_msg, projected, ContractionSpec::single(0, 0));
  for (int k = l + 1; k < n; ++k) {
    const auto uk = static_cast<std::size_t>(k);
    const Tensor rhs = k < n - 1 ? c.right[uk + 1] : ones(1);
    grads[uk] = outer(outer(env, c.site_vectors[uk]), rhs);
    if (k < n - 1) env = contract(env, c.transfer[uk], ContractionSpec::single(0, 0));
  }
  return grads;
}

}  // namespace tnjet
