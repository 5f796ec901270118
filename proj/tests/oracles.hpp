#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Everything here works on fully materialized objects with plain loops so it
// shares no code path with the streamed library implementations.

#include "tnjet/model.hpp"
#include "tnjet/quant.hpp"
#include "tnjet/train.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace oracle {

using tnjet::Index;
using tnjet::Tensor;

inline Index ipow(Index base, int exp) {
  Index v = 1;
  for (int i = 0; i < exp; ++i) v *= base;
  return v;
}

/// Digit of site k (site 0 slowest) in a mixed-radix configuration index.
inline Index digit(Index config, int k, int n, Index d) { return (config / ipow(d, n - 1 - k)) % d; }

inline Tensor random_tensor(const tnjet::Shape& shape, std::mt19937_64& gen, double stddev = 1.0) {
  return Tensor::random_normal(shape, gen, stddev);
}

/// Replaces every weight with Normal(0, stddev^2) draws.
template <typename Model>
Model randomized(Model m, std::uint64_t seed, double stddev = 1.0) {
  std::mt19937_64 gen(seed);
  for (auto& t : m.tensors()) t = random_tensor(t.shape(), gen, stddev);
  return m;
}

/// Global tensor psi (d^N x C) of an MPS: psi[s, c] = prod_k A_k[., s_k, .] with the class index at the label site.
inline Eigen::MatrixXd dense_mps(const tnjet::MpsModel& m) {
  const int n = m.n_sites();
  const Index d = m.phys_dim();
  const int C = m.n_classes();
  const int l = m.label_site();
  const Index total = ipow(d, n);
  Eigen::MatrixXd psi(total, C);
  for (Index s = 0; s < total; ++s) {
    for (int c = 0; c < C; ++c) {
      Eigen::RowVectorXd row = Eigen::RowVectorXd::Ones(1);
      for (int k = 0; k < n; ++k) {
        const Tensor& a = m.site(k);
        const Index sk = digit(s, k, n, d);
        Eigen::MatrixXd mat(a.dim(0), a.dim(2));
        for (Index i = 0; i < a.dim(0); ++i) {
          for (Index j = 0; j < a.dim(2); ++j) mat(i, j) = k == l ? a(i, sk, j, c) : a(i, sk, j);
        }
        row = row * mat;
      }
      psi(s, c) = row(0);
    }
  }
  return psi;
}

/// Global tensor of a TTN, built bottom-up: each subtree becomes a (d^leaves x parent) matrix.
inline Eigen::MatrixXd dense_ttn(const tnjet::TtnModel& m) {
  const int L = m.n_layers();
  std::vector<Eigen::MatrixXd> level;
  const Index d = m.phys_dim();
  for (int j = 0; j < m.n_leaves(); ++j) level.push_back(Eigen::MatrixXd::Identity(d, d));
  for (int l = L - 1; l >= 0; --l) {
    std::vector<Eigen::MatrixXd> next;
    for (int j = 0; j < (1 << l); ++j) {
      const Tensor& node = m.node(l, j);
      const Eigen::MatrixXd& ml = level[static_cast<std::size_t>(2 * j)];
      const Eigen::MatrixXd& mr = level[static_cast<std::size_t>(2 * j + 1)];
      Eigen::MatrixXd out = Eigen::MatrixXd::Zero(ml.rows() * mr.rows(), node.dim(2));
      for (Index a = 0; a < ml.rows(); ++a) {
        for (Index b = 0; b < mr.rows(); ++b) {
          for (Index p = 0; p < node.dim(2); ++p) {
            double acc = 0.0;
            for (Index i = 0; i < node.dim(0); ++i) {
              for (Index k = 0; k < node.dim(1); ++k) acc += ml(a, i) * mr(b, k) * node(i, k, p);
            }
            out(a * mr.rows() + b, p) = acc;
          }
        }
      }
      next.push_back(std::move(out));
    }
    level = std::move(next);
  }
  return level[0];
}

inline Eigen::MatrixXd dense_state(const tnjet::AnyModel& m) {
  if (const auto* mps = std::get_if<tnjet::MpsModel>(&m)) return dense_mps(*mps);
  return dense_ttn(std::get<tnjet::TtnModel>(m));
}

/// Kronecker product of the site vectors, site 0 slowest.
inline Eigen::VectorXd kron_input(const tnjet::EmbeddedJet& x) {
  Eigen::VectorXd v = Eigen::VectorXd::Ones(1);
  for (const auto& s : x.sites) {
    Eigen::VectorXd next(v.size() * s.size());
    for (Index i = 0; i < v.size(); ++i) next.segment(i * s.size(), s.size()) = v[i] * s;
    v = std::move(next);
  }
  return v;
}

inline Eigen::VectorXd dense_scores(const tnjet::AnyModel& m, const tnjet::EmbeddedJet& x) {
  return dense_state(m).transpose() * kron_input(x);
}

inline tnjet::EmbeddedJet random_input(int n, int d, std::mt19937_64& gen) {
  std::normal_distribution<double> dist(0.0, 1.0);
  tnjet::EmbeddedJet x;
  for (int k = 0; k < n; ++k) {
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = dist(gen);
    x.sites.push_back(v);
  }
  return x;
}

/// Reduced density matrix on `sites` (ascending) from the dense mixture of class states.
inline Eigen::MatrixXd dense_rdm(const tnjet::AnyModel& model, const std::vector<int>& sites) {
  const Eigen::MatrixXd psi = dense_state(model);
  const int n = tnjet::n_sites(model);
  const Index d = tnjet::phys_dim(model);
  const Index dim = ipow(d, static_cast<int>(sites.size()));
  Eigen::MatrixXd rho = Eigen::MatrixXd::Zero(dim, dim);
  auto sub_index = [&](Index s) {
    Index idx = 0;
    for (int k : sites) idx = idx * d + digit(s, k, n, d);
    return idx;
  };
  auto replace = [&](Index s, Index sub) {
    for (int i = static_cast<int>(sites.size()) - 1; i >= 0; --i) {
      const int k = sites[static_cast<std::size_t>(i)];
      const Index w = ipow(d, n - 1 - k);
      s += (sub % d - digit(s, k, n, d)) * w;
      sub /= d;
    }
    return s;
  };
  for (Index s = 0; s < psi.rows(); ++s) {
    const Index a = sub_index(s);
    for (Index b = 0; b < dim; ++b) rho(a, b) += psi.row(s).dot(psi.row(replace(s, b)));
  }
  return rho / rho.trace();
}

inline double entropy(const Eigen::MatrixXd& rho) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(rho);
  double s = 0.0;
  for (Index i = 0; i < es.eigenvalues().size(); ++i) {
    const double lam = es.eigenvalues()[i];
    if (lam > 1e-12) s -= lam * std::log(lam);
  }
  return s;
}

inline double dense_qmi(const tnjet::AnyModel& model, int a, int b) {
  return entropy(dense_rdm(model, {a})) + entropy(dense_rdm(model, {b})) - entropy(dense_rdm(model, {a, b}));
}

/// O(B^2) one-vs-rest AUC: fraction of (positive, negative) pairs ranked correctly, ties count 1/2.
inline std::vector<double> pairwise_auc(const Eigen::MatrixXd& scores, const std::vector<int>& labels) {
  std::vector<double> out;
  for (Index c = 0; c < scores.cols(); ++c) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] != c) continue;
      for (std::size_t j = 0; j < labels.size(); ++j) {
        if (labels[j] == c) continue;
        const double si = scores(static_cast<Index>(i), c), sj = scores(static_cast<Index>(j), c);
        num += si > sj ? 1.0 : (si == sj ? 0.5 : 0.0);
        den += 1.0;
      }
    }
    out.push_back(num / den);
  }
  return out;
}

/// Central finite differences of `f` over every weight of `model`, in model order.
inline tnjet::Gradients finite_difference(const tnjet::AnyModel& model,
                                          const std::function<double(const tnjet::AnyModel&)>& f, double h = 1e-5) {
  tnjet::Gradients out;
  tnjet::AnyModel work = model;
  auto& ts = tnjet::tensors(work);
  for (auto& t : ts) {
    Tensor g(t.shape());
    for (Index i = 0; i < t.size(); ++i) {
      const double saved = t[i];
      t[i] = saved + h;
      const double up = f(work);
      t[i] = saved - h;
      const double down = f(work);
      t[i] = saved;
      g[i] = (up - down) / (2 * h);
    }
    out.push_back(std::move(g));
  }
  return out;
}

/// Largest |a - b| relative to the largest |b| over all tensors.
inline double gradient_error(const tnjet::Gradients& a, const tnjet::Gradients& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    diff = std::max(diff, (a[k].values() - b[k].values()).cwiseAbs().maxCoeff());
    scale = std::max(scale, b[k].values().cwiseAbs().maxCoeff());
  }
  return scale > 0.0 ? diff / scale : diff;
}

/// Two-class task sampled from a planted N=4, d=7 MPS teacher: random
/// normalized constituent features, label = argmax of the teacher's scores,
/// keeping only samples with a clear margin.
inline tnjet::LabeledSet planted_task(std::size_t size, std::uint64_t seed) {
  tnjet::MpsModel teacher = randomized(tnjet::build_mps(4, 7, 4, 2, 0), 4242);
  std::mt19937_64 gen(seed + 2);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  tnjet::LabeledSet set;
  while (set.size() < size) {
    Eigen::MatrixXd particles(4, 3);
    for (Index i = 0; i < particles.size(); ++i) particles.data()[i] = unif(gen);
    tnjet::EmbeddedJet x = tnjet::embed_jet(particles, tnjet::EmbeddingLayout::PerParticle);
    const Eigen::VectorXd s = tnjet::forward_mps(teacher, x);
    if (std::abs(s[0] - s[1]) < 0.3 * s.cwiseAbs().maxCoeff()) continue;
    set.labels.push_back(s[0] > s[1] ? 0 : 1);
    set.inputs.push_back(std::move(x));
  }
  return set;
}

/// Scaled-integer replay of the qop MPS schedule for n=4 (label site 2):
/// every operand is an integer multiple of 2^-fb, products carry 2^-2fb and are
/// summed exactly, then each contraction result is rounded half-to-even back to
/// 2^-fb and saturated.
inline Eigen::VectorXd integer_qop_mps4(const tnjet::MpsModel& m, const tnjet::EmbeddedJet& x, int fb) {
  using I = std::int64_t;
  const I one = I{1} << fb;
  const I lo = -2 * one, hi = 2 * one - 1;
  auto to_int = [&](double v) {
    return std::clamp(static_cast<I>(std::nearbyint(std::ldexp(v, fb))), lo, hi);
  };
  auto rescale = [&](I acc) {
    // acc carries 2^-2fb; divide by 2^fb with round-half-even.
    I q = acc >= 0 ? acc / one : -((-acc) / one);
    I r = acc - q * one;
    if (r < 0) {
      r += one;
      --q;
    }
    if (2 * r > one || (2 * r == one && (q & 1))) ++q;
    return std::clamp(q, lo, hi);
  };
  const Index d = m.phys_dim();
  const int C = m.n_classes();
  std::vector<std::vector<I>> phi(4);
  for (int k = 0; k < 4; ++k) {
    for (Index s = 0; s < d; ++s) phi[static_cast<std::size_t>(k)].push_back(to_int(x.sites[static_cast<std::size_t>(k)][s]));
  }
  // Transfer matrices M_k[i][j(,c)] = sum_s A_k[i, s, j(, c)] phi_k[s].
  auto transfer = [&](int k, Index i, Index j, int c) {
    const Tensor& a = m.site(k);
    I acc = 0;
    for (Index s = 0; s < d; ++s) {
      const I w = to_int(k == 2 ? a(i, s, j, c) : a(i, s, j));
      acc += w * phi[static_cast<std::size_t>(k)][static_cast<std::size_t>(s)];
    }
    return rescale(acc);
  };
  const Index b1 = m.bond(1), b2 = m.bond(2), b3 = m.bond(3);
  std::vector<I> left0(static_cast<std::size_t>(b1));
  for (Index j = 0; j < b1; ++j) left0[static_cast<std::size_t>(j)] = transfer(0, 0, j, 0);
  std::vector<I> right3(static_cast<std::size_t>(b3));
  for (Index i = 0; i < b3; ++i) right3[static_cast<std::size_t>(i)] = transfer(3, i, 0, 0);
  std::vector<std::vector<I>> m1(static_cast<std::size_t>(b1), std::vector<I>(static_cast<std::size_t>(b2)));
  for (Index i = 0; i < b1; ++i) {
    for (Index j = 0; j < b2; ++j) m1[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = transfer(1, i, j, 0);
  }
  std::vector<I> left1(static_cast<std::size_t>(b2));
  for (Index j = 0; j < b2; ++j) {
    I acc = 0;
    for (Index i = 0; i < b1; ++i) acc += left0[static_cast<std::size_t>(i)] * m1[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    left1[static_cast<std::size_t>(j)] = rescale(acc);
  }
  // center[j][c] = sum_i left1[i] M_2[i, j, c]
  std::vector<std::vector<I>> center(static_cast<std::size_t>(b3), std::vector<I>(static_cast<std::size_t>(C)));
  for (Index j = 0; j < b3; ++j) {
    for (int c = 0; c < C; ++c) {
      I acc = 0;
      for (Index i = 0; i < b2; ++i) acc += left1[static_cast<std::size_t>(i)] * transfer(2, i, j, c);
      center[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)] = rescale(acc);
    }
  }
  Eigen::VectorXd out(C);
  for (int c = 0; c < C; ++c) {
    I acc = 0;
    for (Index j = 0; j < b3; ++j) acc += right3[static_cast<std::size_t>(j)] * center[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
    out[c] = std::ldexp(static_cast<double>(rescale(acc)), -fb);
  }
  return out;
}

}  // namespace oracle
