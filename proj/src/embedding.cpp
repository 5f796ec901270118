#include "tnjet/embedding.hpp"

#include <cmath>

namespace tnjet {

namespace {

void require_finite(const Eigen::Vector3d& x) {
  if (!x.allFinite()) throw EmbeddingError("non-finite feature value in embedding input");
}

Eigen::VectorXd normalized(Eigen::VectorXd v) {
  v /= v.norm();  // the constant monomial keeps the norm >= 1
  return v;
}

}  // namespace

std::string to_string(EmbeddingLayout layout) {
  return layout == EmbeddingLayout::PerParticle ? "per-particle" : "per-feature";
}

std::string to_string(SiteOrder order) { return order == SiteOrder::Natural ? "natural" : "pt-first"; }

EmbeddingLayout parse_layout(const std::string& text) {
  if (text == "per-particle") return EmbeddingLayout::PerParticle;
  if (text == "per-feature") return EmbeddingLayout::PerFeature;
  throw std::invalid_argument("unknown embedding layout '" + text + "'");
}

SiteOrder parse_site_order(const std::string& text) {
  if (text == "natural") return SiteOrder::Natural;
  if (text == "pt-first") return SiteOrder::PtFirst;
  throw std::invalid_argument("unknown site order '" + text + "'");
}

Eigen::VectorXd embed_particle(const Eigen::Vector3d& x) {
  require_finite(x);
  Eigen::VectorXd v(7);
  v << 1.0, x(0), x(1), x(2), x(0) * x(0), x(1) * x(1), x(2) * x(2);
  return normalized(std::move(v));
}

Eigen::VectorXd embed_feature_pair(const Eigen::Vector3d& x, FeatureSelector which) {
  require_finite(x);
  const double value = which == FeatureSelector::Pt ? x(0) : x(2);
  Eigen::VectorXd v(3);
  v << 1.0, value, value * value;
  return normalized(std::move(v));
}

std::vector<int> pt_first_permutation(int n_particles) {
  std::vector<int> perm;
  perm.reserve(static_cast<std::size_t>(2 * n_particles));
  for (int i = 0; i < n_particles; ++i) perm.push_back(2 * i);
  for (int i = 0; i < n_particles; ++i) perm.push_back(2 * i + 1);
  return perm;
}

std::vector<int> site_permutation(const EmbeddingSpec& spec, int n_particles) {
  if (spec.order == SiteOrder::PtFirst) {
    if (spec.layout != EmbeddingLayout::PerFeature) {
      throw EmbeddingError("pt-first site order requires the per-feature layout");
    }
    return pt_first_permutation(n_particles);
  }
  return {};
}

std::vector<int> inverse_permutation(std::span<const int> perm) {
  std::vector<int> inv(perm.size(), -1);
  for (std::size_t k = 0; k < perm.size(); ++k) {
    const int p = perm[k];
    if (p < 0 || static_cast<std::size_t>(p) >= perm.size() || inv[static_cast<std::size_t>(p)] != -1) {
      throw EmbeddingError("site order is not a bijection");
    }
    inv[static_cast<std::size_t>(p)] = static_cast<int>(k);
  }
  return inv;
}

EmbeddedJet permute_sites(const EmbeddedJet& jet, std::span<const int> permutation) {
  if (permutation.empty()) return jet;
  if (permutation.size() != jet.sites.size()) {
    throw EmbeddingError("site order has " + std::to_string(permutation.size()) + " entries for " +
                         std::to_string(jet.sites.size()) + " sites");
  }
  inverse_permutation(permutation);  // validates bijectivity
  EmbeddedJet out;
  out.layout = jet.layout;
  out.sites.reserve(jet.sites.size());
  for (int p : permutation) out.sites.push_back(jet.sites[static_cast<std::size_t>(p)]);
  return out;
}

EmbeddedJet embed_jet(const Eigen::MatrixXd& particles, EmbeddingLayout layout, std::span<const int> permutation) {
  if (particles.cols() != 3) throw EmbeddingError("embedding expects N x 3 particle features");
  EmbeddedJet jet;
  jet.layout = layout;
  for (Eigen::Index i = 0; i < particles.rows(); ++i) {
    const Eigen::Vector3d x = particles.row(i).transpose();
    if (layout == EmbeddingLayout::PerParticle) {
      jet.sites.push_back(embed_particle(x));
    } else {
      jet.sites.push_back(embed_feature_pair(x, FeatureSelector::Pt));
      jet.sites.push_back(embed_feature_pair(x, FeatureSelector::DeltaR));
    }
  }
  return permute_sites(jet, permutation);
}

EmbeddedJet embed_jet(const Eigen::MatrixXd& particles, const EmbeddingSpec& spec) {
  const auto perm = site_permutation(spec, static_cast<int>(particles.rows()));
  return embed_jet(particles, spec.layout, perm);
}

std::vector<std::string> site_labels(const EmbeddingSpec& spec, int n_particles) {
  std::vector<std::string> labels;
  for (int i = 0; i < n_particles; ++i) {
    if (spec.layout == EmbeddingLayout::PerParticle) {
      labels.push_back("p" + std::to_string(i));
    } else {
      labels.push_back("pT" + std::to_string(i));
      labels.push_back("dR" + std::to_string(i));
    }
  }
  const auto perm = site_permutation(spec, n_particles);
  if (perm.empty()) return labels;
  std::vector<std::string> out;
  for (int p : perm) out.push_back(labels[static_cast<std::size_t>(p)]);
  return out;
}

}  // namespace tnjet
