#pragma once

// Synthetic five-class jet sample in the raw 16-column constituent layout.
//
// Classes differ in prong count (g, q: 1; W, Z: 2; t: 3), prong opening angle
// (set by the resonance mass), constituent multiplicity and fragmentation
// hardness. Output is deterministic in the seed.

#include "tnjet/ingest.hpp"

#include <cstdint>

namespace tnjet {

struct SyntheticConfig {
  std::size_t n_jets = 1000;
  std::uint64_t seed = 0;
  int max_constituents = 30;
};

/// Jet i has label i % 5; constituent rows are sorted by descending p_T.
std::vector<JetRecord> make_synthetic_jets(const SyntheticConfig& config);

}  // namespace tnjet
