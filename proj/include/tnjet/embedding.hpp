#pragma once

// Polynomial feature maps from scaled constituent features to unit-norm local
// vectors. Two layouts are supported:
//   PerParticle: one site per constituent, [1, pT, Erel, dR, pT^2, Erel^2, dR^2] / C   (d = 7)
//   PerFeature:  two adjacent sites per constituent, [1, pT, pT^2] / C and [1, dR, dR^2] / C   (d = 3)
// C is the L2 norm of the monomial vector, so an all-zero (padded) row maps to e_0.

#include <Eigen/Dense>

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tnjet {

enum class EmbeddingLayout { PerParticle, PerFeature };
enum class SiteOrder { Natural, PtFirst };

enum class FeatureSelector { Pt, DeltaR };

std::string to_string(EmbeddingLayout layout);
std::string to_string(SiteOrder order);
EmbeddingLayout parse_layout(const std::string& text);
SiteOrder parse_site_order(const std::string& text);

class EmbeddingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct EmbeddedJet {
  std::vector<Eigen::VectorXd> sites;
  EmbeddingLayout layout = EmbeddingLayout::PerParticle;

  std::size_t size() const { return sites.size(); }
};

/// Embedding choice persisted with a model.
struct EmbeddingSpec {
  EmbeddingLayout layout = EmbeddingLayout::PerParticle;
  SiteOrder order = SiteOrder::Natural;

  int phys_dim() const { return layout == EmbeddingLayout::PerParticle ? 7 : 3; }
  int sites_per_particle() const { return layout == EmbeddingLayout::PerParticle ? 1 : 2; }
};

Eigen::VectorXd embed_particle(const Eigen::Vector3d& x);
Eigen::VectorXd embed_feature_pair(const Eigen::Vector3d& x, FeatureSelector which);

/// PerFeature with 2n sites: all pT sites first, then all dR sites.
std::vector<int> pt_first_permutation(int n_particles);
std::vector<int> site_permutation(const EmbeddingSpec& spec, int n_particles);
std::vector<int> inverse_permutation(std::span<const int> perm);

/// new_sites[k] = sites[permutation[k]]; empty permutation means identity.
EmbeddedJet embed_jet(const Eigen::MatrixXd& particles, EmbeddingLayout layout,
                      std::span<const int> permutation = {});
EmbeddedJet embed_jet(const Eigen::MatrixXd& particles, const EmbeddingSpec& spec);

EmbeddedJet permute_sites(const EmbeddedJet& jet, std::span<const int> permutation);

/// Human-readable site names ("p3", "pT3", "dR3") after permutation.
std::vector<std::string> site_labels(const EmbeddingSpec& spec, int n_particles);

}  // namespace tnjet
