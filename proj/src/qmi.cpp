#include "tnjet/qmi.hpp"

#include "tnjet/parallel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace tnjet {

namespace {

constexpr double kZeroEigen = 1e-12;
constexpr double kNegativeTolerance = 1e-8;

bool is_open(std::span<const int> sites, int k) { return std::find(sites.begin(), sites.end(), k) != sites.end(); }

// env (P, b, P', b') absorbs ket and bra copies of site tensor a (b, d, b2).
Tensor absorb_site(const Tensor& env, const Tensor& a, bool open) {
  const Tensor t = contract(env, a, ContractionSpec::single(1, 0));  // (P, P', b', d, b2)
  if (!open) {
    const Tensor u = contract(t, a, ContractionSpec{{2, 3}, {0, 1}});  // (P, P', b2, b2')
    return permute(u, {0, 2, 1, 3});
  }
  const Tensor u = contract(t, a, ContractionSpec::single(2, 0));  // (P, P', d, b2, d', b2')
  const Tensor v = permute(u, {0, 2, 3, 1, 4, 5});                 // (P, d, b2, P', d', b2')
  return reshape(v, Shape{v.dim(0) * v.dim(1), v.dim(2), v.dim(3) * v.dim(4), v.dim(5)});
}

// Finishes (P, B, P', B) by tracing the bond and returns the normalized (P, P') matrix.
Eigen::MatrixXd close_and_normalize(const Tensor& env) {
  const Index p = env.dim(0), b = env.dim(1);
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(p, p);
  for (Index i = 0; i < p; ++i)
    for (Index j = 0; j < p; ++j)
      for (Index k = 0; k < b; ++k) rho(i, j) += env(i, k, j, k);
  const double tr = rho.trace();
  if (!(tr > 0.0) || !std::isfinite(tr)) throw QmiError("model state has zero norm");
  rho /= tr;
  return 0.5 * (rho + rho.transpose());
}

Eigen::MatrixXd mps_rdm(const MpsModel& m, std::span<const int> sites) {
  const int n = m.n_sites();
  const int l = m.label_site();
  const Index c = m.n_classes();
  Tensor env = Tensor::constant(Shape{1, 1, 1, 1}, 1.0);
  for (int k = 0; k < n; ++k) {
    const Tensor& a = m.site(k);
    Tensor eff;
    if (k < l) {
      eff = a;
    } else if (k == l) {
      eff = reshape(a, Shape{a.dim(0), a.dim(1), a.dim(2) * c});
    } else {
      // Carry the class index alongside the bond: A (x) I_C.
      const Index bl = a.dim(0), d = a.dim(1), br = a.dim(2);
      eff = Tensor(Shape{bl * c, d, br * c});
      for (Index i = 0; i < bl; ++i)
        for (Index s = 0; s < d; ++s)
          for (Index j = 0; j < br; ++j)
            for (Index q = 0; q < c; ++q) eff(i * c + q, s, j * c + q) = a(i, s, j);
    }
    env = absorb_site(env, eff, is_open(sites, k));
  }
  return close_and_normalize(env);
}

// Subtree object (P, D, P', D'): open physical legs P and the parent leg D, ket and bra.
Tensor leaf_object(Index d, bool open) {
  if (!open) {
    Tensor t(Shape{1, d, 1, d});
    for (Index s = 0; s < d; ++s) t(0, s, 0, s) = 1.0;
    return t;
  }
  Tensor t(Shape{d, d, d, d});
  for (Index s = 0; s < d; ++s)
    for (Index r = 0; r < d; ++r) t(s, s, r, r) = 1.0;
  return t;
}

Tensor combine(const Tensor& node, const Tensor& left, const Tensor& right) {
  Tensor x = contract(left, node, ContractionSpec::single(1, 0));             // (PL, PL', cl', cr, p)
  x = contract(x, node, ContractionSpec::single(2, 0));                       // (PL, PL', cr, p, cr', p')
  x = contract(x, right, ContractionSpec{{2, 4}, {1, 3}});                    // (PL, PL', p, p', PR, PR')
  x = permute(x, {0, 4, 2, 1, 5, 3});                                         // (PL, PR, p, PL', PR', p')
  return reshape(x, Shape{x.dim(0) * x.dim(1), x.dim(2), x.dim(3) * x.dim(4), x.dim(5)});
}

Eigen::MatrixXd ttn_rdm(const TtnModel& m, std::span<const int> sites) {
  const int L = m.n_layers();
  std::vector<Tensor> level;
  for (int k = 0; k < m.n_leaves(); ++k) level.push_back(leaf_object(m.phys_dim(), is_open(sites, k)));
  for (int l = L - 1; l >= 0; --l) {
    std::vector<Tensor> up;
    for (int j = 0; j < (1 << l); ++j) {
      up.push_back(combine(m.node(l, j), level[static_cast<std::size_t>(2 * j)], level[static_cast<std::size_t>(2 * j + 1)]));
    }
    level = std::move(up);
  }
  return close_and_normalize(level.front());
}

}  // namespace

Eigen::MatrixXd reduced_density(const AnyModel& model, std::span<const int> sites) {
  if (sites.empty() || sites.size() > 2) throw std::invalid_argument("reduced density needs one or two sites");
  const int n = n_sites(model);
  for (int s : sites) {
    if (s < 0 || s >= n) throw std::out_of_range("site " + std::to_string(s) + " outside [0, " + std::to_string(n) + ")");
  }
  if (sites.size() == 2 && sites[0] == sites[1]) throw std::invalid_argument("reduced density sites must differ");
  if (const auto* mps = std::get_if<MpsModel>(&model)) return mps_rdm(*mps, sites);
  return ttn_rdm(std::get<TtnModel>(model), sites);
}

double von_neumann_entropy(const Eigen::MatrixXd& rho) {
  if (rho.rows() != rho.cols() || rho.rows() == 0) throw std::invalid_argument("density matrix must be square");
  if ((rho - rho.transpose()).cwiseAbs().maxCoeff() > kNegativeTolerance) {
    throw QmiError("density matrix is not symmetric");
  }
  if (std::abs(rho.trace() - 1.0) > kNegativeTolerance) {
    throw QmiError("density matrix trace is " + std::to_string(rho.trace()) + ", expected 1");
  }
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(rho, Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double lambda = solver.eigenvalues()(i);
    if (lambda < -kNegativeTolerance) {
      throw QmiError("density matrix has negative eigenvalue " + std::to_string(lambda));
    }
    if (lambda > kZeroEigen) s -= lambda * std::log(lambda);
  }
  return s;
}

QmiMatrix qmi_matrix(const AnyModel& model, std::vector<std::string> labels) {
  const int n = n_sites(model);
  if (labels.empty()) {
    for (int k = 0; k < n; ++k) labels.push_back("s" + std::to_string(k));
  }
  if (static_cast<int>(labels.size()) != n) throw std::invalid_argument("one label per site required");

  QmiMatrix q;
  q.labels = std::move(labels);
  q.entropies.resize(n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t k) {
    const int site[] = {static_cast<int>(k)};
    q.entropies(static_cast<Index>(k)) = von_neumann_entropy(reduced_density(model, site));
  });

  std::vector<std::pair<int, int>> pairs;
  for (int a = 0; a < n; ++a)
    for (int b = a + 1; b < n; ++b) pairs.emplace_back(a, b);
  q.values = Eigen::MatrixXd::Zero(n, n);
  parallel_for(pairs.size(), [&](std::size_t i) {
    const auto [a, b] = pairs[i];
    const int both[] = {a, b};
    const double joint = von_neumann_entropy(reduced_density(model, both));
    const double value = q.entropies(a) + q.entropies(b) - joint;
    q.values(a, b) = value;
    q.values(b, a) = value;
  });
  return q;
}

std::string qmi_csv(const QmiMatrix& q) {
  std::ostringstream out;
  out.precision(10);
  out << "site";
  for (const auto& l : q.labels) out << ',' << l;
  out << '\n';
  for (Index i = 0; i < q.values.rows(); ++i) {
    out << q.labels[static_cast<std::size_t>(i)];
    for (Index j = 0; j < q.values.cols(); ++j) out << ',' << q.values(i, j);
    out << '\n';
  }
  return out.str();
}

FeatureContrast feature_contrast(const QmiMatrix& q) {
  auto prefix = [](const std::string& s) {
    std::string p;
    for (char ch : s) {
      if (!std::isalpha(static_cast<unsigned char>(ch))) break;
      p.push_back(ch);
    }
    return p;
  };
  double same = 0.0, mixed = 0.0;
  int n_same = 0, n_mixed = 0;
  for (Index i = 0; i < q.values.rows(); ++i) {
    for (Index j = i + 1; j < q.values.cols(); ++j) {
      if (prefix(q.labels[static_cast<std::size_t>(i)]) == prefix(q.labels[static_cast<std::size_t>(j)])) {
        same += q.values(i, j);
        ++n_same;
      } else {
        mixed += q.values(i, j);
        ++n_mixed;
      }
    }
  }
  return {n_same ? same / n_same : 0.0, n_mixed ? mixed / n_mixed : 0.0};
}

}  // namespace tnjet
