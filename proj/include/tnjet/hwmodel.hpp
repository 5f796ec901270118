#pragma once

// Inference contraction DAG, latency and memory estimates for FPGA-style
// fully-parallel implementations.
//
// Each DAG node is a short sequence of pairwise contractions executed by one
// hardware unit. Nodes in the same stage run in parallel.
//
// Latency model:
//   node cycles  = sum over its pairwise steps of (n_reg + adder_weight * ceil(log2 K))
//   stage cycles = max node cycles in the stage + stage_overhead
//   total cycles = sum of stage cycles + offset,   ns = cycles * 1000 / clock_mhz

#include "tnjet/model.hpp"

#include <string>
#include <vector>

namespace tnjet {

struct Topology {
  Architecture arch = Architecture::Mps;
  int n_sites = 0;
  int phys_dim = 0;
  int bond = 0;  // D for MPS, chi for TTN
  int n_classes = 5;
  int label_site = 0;  // MPS only

  static Topology of(const AnyModel& model);
  static Topology mps(int n, int d, int bond_cap, int n_classes);
  static Topology ttn(int n, int d, int chi, int n_classes);

  std::int64_t param_count() const;
};

struct ContractionStep {
  Index free = 0;        // product of uncontracted dimensions
  Index contracted = 0;  // K
  std::int64_t mults() const { return static_cast<std::int64_t>(free) * contracted; }
  std::int64_t adds() const { return static_cast<std::int64_t>(free) * (contracted - 1); }
};

struct DagNode {
  int id = 0;
  std::string label;
  std::vector<ContractionStep> steps;
  std::vector<int> inputs;  // ids of predecessor nodes
  int stage = 0;

  std::int64_t mults() const;
  std::int64_t adds() const;
};

struct ContractionDag {
  std::vector<DagNode> nodes;
  int n_stages = 0;

  std::int64_t total_mults() const;
  std::int64_t total_adds() const;
  std::vector<std::vector<int>> stages() const;
};

/// MPS: per-site input contractions, then left/right chains, then the label merge.
/// TTN: one node per tree tensor, layer by layer from the leaves.
ContractionDag build_dag(const Topology& topo);

struct CostModel {
  double clock_mhz = 250.0;
  int n_reg = 1;
  int adder_weight = 0;
  int stage_overhead = 6;
  int offset = -1;

  static CostModel defaults(Architecture arch);
};

struct LatencyEstimate {
  std::int64_t cycles = 0;
  std::int64_t mult_cycles = 0;
  std::int64_t adder_cycles = 0;
  std::int64_t overhead_cycles = 0;  // stage overheads plus offset
  double ns = 0.0;
};

LatencyEstimate estimate_latency(const ContractionDag& dag, const CostModel& cost);

/// Storage of all weights at 2 + frac_bits bits per word, in kilobits (1000 bits).
double estimate_memory_kbit(std::int64_t params, int frac_bits);

struct HardwareReport {
  Topology topology;
  int frac_bits = 14;
  CostModel cost;
  std::int64_t params = 0;
  double memory_kbit = 0.0;
  std::int64_t memory_kbit_floor = 0;
  std::int64_t total_mults = 0;
  std::int64_t total_adds = 0;
  int n_stages = 0;
  LatencyEstimate latency;
};

HardwareReport hardware_report(const Topology& topo, int frac_bits, const CostModel& cost);

}  // namespace tnjet
