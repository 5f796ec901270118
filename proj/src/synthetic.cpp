#include "tnjet/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace tnjet {

namespace {

struct ClassShape {
  int prongs;
  double mass;           // resonance mass driving the prong opening angle
  double multiplicity;   // mean constituent count
  double hardness;       // Gamma shape of fragmentation fractions; small = few hard particles
  double spread;         // angular width of each prong
};

// g, q, W, Z, t
constexpr std::array<ClassShape, kNumClasses> kShapes = {{
    {1, 0.0, 22.0, 0.9, 0.10},
    {1, 0.0, 14.0, 0.45, 0.05},
    {2, 80.4, 16.0, 0.7, 0.03},
    {2, 91.2, 17.0, 0.7, 0.03},
    {3, 172.8, 24.0, 0.7, 0.04},
}};

struct Particle {
  double pt, deta, dphi;
};

}  // namespace

std::vector<JetRecord> make_synthetic_jets(const SyntheticConfig& config) {
  if (config.max_constituents < 1) throw std::invalid_argument("max constituents must be >= 1");
  std::vector<JetRecord> out;
  out.reserve(config.n_jets);
  for (std::size_t i = 0; i < config.n_jets; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i >> 32)};
    std::mt19937_64 rng(seq);
    const int label = static_cast<int>(i % kNumClasses);
    const ClassShape& shape = kShapes[static_cast<std::size_t>(label)];

    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double jet_pt = 1000.0 + 60.0 * gauss(rng);
    const double eta0 = 1.5 * (2.0 * unit(rng) - 1.0);
    const double phi0 = std::numbers::pi * (2.0 * unit(rng) - 1.0);

    // Prong momentum fractions and directions.
    std::vector<double> z(static_cast<std::size_t>(shape.prongs));
    std::gamma_distribution<double> prong_gamma(3.0, 1.0);
    double z_sum = 0.0;
    for (auto& v : z) z_sum += (v = prong_gamma(rng));
    for (auto& v : z) v /= z_sum;
    std::vector<std::pair<double, double>> centers(z.size(), {0.0, 0.0});
    if (shape.prongs > 1) {
      // Opening angle ~ 2m / (pT sqrt(z(1-z))), placed symmetrically about the axis.
      const double z0 = std::clamp(z[0], 0.15, 0.85);
      const double opening = std::min(0.8, 2.0 * shape.mass / (jet_pt * std::sqrt(z0 * (1.0 - z0))));
      const double rot = 2.0 * std::numbers::pi * unit(rng);
      for (std::size_t p = 0; p < z.size(); ++p) {
        const double angle = rot + 2.0 * std::numbers::pi * static_cast<double>(p) / static_cast<double>(z.size());
        const double r = 0.5 * opening * (1.0 - z[p]);
        centers[p] = {r * std::cos(angle), r * std::sin(angle)};
      }
    }

    std::poisson_distribution<int> mult(shape.multiplicity);
    const int count = std::clamp(mult(rng), std::max(2, shape.prongs), config.max_constituents);
    std::gamma_distribution<double> frag(shape.hardness, 1.0);
    std::vector<Particle> particles;
    std::vector<double> weights(static_cast<std::size_t>(count));
    std::vector<std::size_t> owner(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k) owner[static_cast<std::size_t>(k)] = static_cast<std::size_t>(k) % z.size();
    std::vector<double> prong_total(z.size(), 0.0);
    for (int k = 0; k < count; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      weights[uk] = frag(rng) + 1e-4;
      prong_total[owner[uk]] += weights[uk];
    }
    for (int k = 0; k < count; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      const std::size_t p = owner[uk];
      const double frac = z[p] * weights[uk] / prong_total[p];
      // Softer particles sit further from their prong axis.
      const double width = shape.spread * (0.3 + 0.7 * std::sqrt(std::max(0.0, 1.0 - frac / z[p])));
      particles.push_back({jet_pt * frac, centers[p].first + width * gauss(rng), centers[p].second + width * gauss(rng)});
    }

    double jet_e = 0.0;
    for (const auto& pa : particles) jet_e += pa.pt * std::cosh(eta0 + pa.deta);
    const double rot = 2.0 * std::numbers::pi * unit(rng);
    JetRecord rec;
    rec.label = label;
    rec.constituents.resize(count, kRawFeatureCount);
    for (int k = 0; k < count; ++k) {
      const Particle& pa = particles[static_cast<std::size_t>(k)];
      const double eta = eta0 + pa.deta;
      const double phi = phi0 + pa.dphi;
      const double e = pa.pt * std::cosh(eta);
      const double values[kRawFeatureCount] = {
          pa.pt * std::cos(phi),                          // px
          pa.pt * std::sin(phi),                          // py
          pa.pt * std::sinh(eta),                         // pz
          e,                                              // e
          e / jet_e,                                      // erel
          pa.pt,                                          // pt
          pa.pt / jet_pt,                                 // ptrel
          eta,                                            // eta
          pa.deta,                                        // etarel
          pa.deta * std::cos(rot) - pa.dphi * std::sin(rot),  // etarot
          phi,                                            // phi
          pa.dphi,                                        // phirel
          pa.deta * std::sin(rot) + pa.dphi * std::cos(rot),  // phirot
          std::hypot(pa.deta, pa.dphi),                   // deltaR
          std::tanh(eta),                                 // costheta
          std::tanh(pa.deta),                             // costhetarel
      };
      for (int f = 0; f < kRawFeatureCount; ++f) rec.constituents(k, f) = static_cast<float>(values[f]);
    }
    sort_by_pt(rec);
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace tnjet
