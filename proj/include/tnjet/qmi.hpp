#pragma once

// Quantum mutual information between input sites of a trained network.
//
// The classifier is read as a mixture of one state per class,
//   rho = sum_c |psi_c><psi_c| / sum_c <psi_c|psi_c>,
// and reduced density matrices are obtained by tracing out all other sites.
// Entropies are in nats.

#include "tnjet/model.hpp"

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace tnjet {

class QmiError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Reduced density matrix on one or two distinct sites, dimension d^|sites|.
/// Two-site indices are ordered by increasing site number, first site slowest.
Eigen::MatrixXd reduced_density(const AnyModel& model, std::span<const int> sites);

/// -sum lambda ln lambda; eigenvalues <= 1e-12 contribute nothing.
double von_neumann_entropy(const Eigen::MatrixXd& rho);

struct QmiMatrix {
  Eigen::MatrixXd values;            // symmetric, zero diagonal
  Eigen::VectorXd entropies;         // single-site S(rho_a)
  std::vector<std::string> labels;   // one per site
};

/// I(a:b) = S(a) + S(b) - S(ab) for every site pair. Empty `labels` gives "s0", "s1", ...
QmiMatrix qmi_matrix(const AnyModel& model, std::vector<std::string> labels = {});

std::string qmi_csv(const QmiMatrix& q);

struct FeatureContrast {
  double same_feature = 0.0;  // mean over pairs whose labels share a feature prefix
  double mixed = 0.0;         // mean over pairs with different prefixes
};

/// Splits labels like "pT3"/"dR3" into their alphabetic prefix and averages I over pair groups.
FeatureContrast feature_contrast(const QmiMatrix& q);

}  // namespace tnjet
