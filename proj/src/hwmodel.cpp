#include "tnjet/hwmodel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

namespace tnjet {

namespace {

int ceil_log2(Index k) {
  return k <= 1 ? 0 : static_cast<int>(std::bit_width(static_cast<std::uint64_t>(k - 1)));
}

class DagBuilder {
 public:
  int add(std::string label, std::vector<ContractionStep> steps, std::vector<int> inputs) {
    DagNode node;
    node.id = static_cast<int>(dag_.nodes.size());
    node.label = std::move(label);
    node.steps = std::move(steps);
    node.stage = 0;
    for (int p : inputs) node.stage = std::max(node.stage, dag_.nodes[static_cast<std::size_t>(p)].stage + 1);
    node.inputs = std::move(inputs);
    dag_.n_stages = std::max(dag_.n_stages, node.stage + 1);
    dag_.nodes.push_back(std::move(node));
    return dag_.nodes.back().id;
  }
  ContractionDag finish() { return std::move(dag_); }

 private:
  ContractionDag dag_;
};

ContractionDag mps_dag(const Topology& t) {
  DagBuilder b;
  const int n = t.n_sites;
  if (n < 1) return b.finish();
  const int l = t.label_site;
  const auto bonds = mps_bond_dims(n, t.phys_dim, t.bond);
  auto bond = [&](int k) { return bonds[static_cast<std::size_t>(k)]; };
  const Index d = t.phys_dim;
  const Index c = t.n_classes;

  std::vector<int> embed(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const Index free = bond(k) * bond(k + 1) * (k == l ? c : 1);
    embed[static_cast<std::size_t>(k)] = b.add("site" + std::to_string(k), {{free, d}}, {});
  }

  // The boundary transfer vectors start the chains directly.
  int left = l > 0 ? embed[0] : -1;
  for (int k = 1; k < l; ++k) {
    left = b.add("left" + std::to_string(k), {{bond(k + 1), bond(k)}}, {left, embed[static_cast<std::size_t>(k)]});
  }
  int right = l < n - 1 ? embed[static_cast<std::size_t>(n - 1)] : -1;
  for (int k = n - 2; k > l; --k) {
    right = b.add("right" + std::to_string(k), {{bond(k), bond(k + 1)}}, {embed[static_cast<std::size_t>(k)], right});
  }

  std::vector<ContractionStep> merge;
  std::vector<int> inputs{embed[static_cast<std::size_t>(l)]};
  if (l > 0) {
    merge.push_back({bond(l + 1) * c, bond(l)});
    inputs.push_back(left);
  }
  if (l < n - 1) {
    merge.push_back({c, bond(l + 1)});
    inputs.push_back(right);
  }
  if (!merge.empty()) b.add("merge", std::move(merge), std::move(inputs));
  return b.finish();
}

ContractionDag ttn_dag(const Topology& t) {
  DagBuilder b;
  if (t.n_sites < 2) return b.finish();
  const int layers = std::countr_zero(static_cast<unsigned>(t.n_sites));
  std::vector<int> below;
  for (int l = layers - 1; l >= 0; --l) {
    const Shape s = ttn_node_shape(layers, t.phys_dim, t.bond, t.n_classes, l);
    std::vector<int> level;
    for (int j = 0; j < (1 << l); ++j) {
      std::vector<int> inputs;
      if (!below.empty()) inputs = {below[static_cast<std::size_t>(2 * j)], below[static_cast<std::size_t>(2 * j + 1)]};
      level.push_back(b.add("node[" + std::to_string(l) + "," + std::to_string(j) + "]",
                            {{s[1] * s[2], s[0]}, {s[2], s[1]}}, std::move(inputs)));
    }
    below = std::move(level);
  }
  return b.finish();
}

}  // namespace

Topology Topology::of(const AnyModel& model) {
  if (const auto* m = std::get_if<MpsModel>(&model)) {
    return {Architecture::Mps, m->n_sites(), m->phys_dim(), m->bond_cap(), m->n_classes(), m->label_site()};
  }
  const auto& t = std::get<TtnModel>(model);
  return {Architecture::Ttn, t.n_leaves(), t.phys_dim(), t.chi(), t.n_classes(), 0};
}

Topology Topology::mps(int n, int d, int bond_cap, int n_classes) {
  return {Architecture::Mps, n, d, bond_cap, n_classes, default_label_site(n)};
}

Topology Topology::ttn(int n, int d, int chi, int n_classes) {
  if (n < 2 || !std::has_single_bit(static_cast<unsigned>(n))) {
    throw std::invalid_argument("TTN leaf count must be a power of two, got " + std::to_string(n));
  }
  return {Architecture::Ttn, n, d, chi, n_classes, 0};
}

std::int64_t Topology::param_count() const {
  if (n_sites < 1) return 0;
  std::int64_t total = 0;
  if (arch == Architecture::Mps) {
    const auto bonds = mps_bond_dims(n_sites, phys_dim, bond);
    for (int k = 0; k < n_sites; ++k) {
      total += static_cast<std::int64_t>(bonds[static_cast<std::size_t>(k)]) * phys_dim *
               bonds[static_cast<std::size_t>(k + 1)] * (k == label_site ? n_classes : 1);
    }
    return total;
  }
  const int layers = std::countr_zero(static_cast<unsigned>(n_sites));
  for (int l = 0; l < layers; ++l) total += (std::int64_t{1} << l) * shape_size(ttn_node_shape(layers, phys_dim, bond, n_classes, l));
  return total;
}

std::int64_t DagNode::mults() const {
  std::int64_t total = 0;
  for (const auto& s : steps) total += s.mults();
  return total;
}

std::int64_t DagNode::adds() const {
  std::int64_t total = 0;
  for (const auto& s : steps) total += s.adds();
  return total;
}

std::int64_t ContractionDag::total_mults() const {
  std::int64_t total = 0;
  for (const auto& n : nodes) total += n.mults();
  return total;
}

std::int64_t ContractionDag::total_adds() const {
  std::int64_t total = 0;
  for (const auto& n : nodes) total += n.adds();
  return total;
}

std::vector<std::vector<int>> ContractionDag::stages() const {
  std::vector<std::vector<int>> out(static_cast<std::size_t>(n_stages));
  for (const auto& n : nodes) out[static_cast<std::size_t>(n.stage)].push_back(n.id);
  return out;
}

ContractionDag build_dag(const Topology& topo) {
  return topo.arch == Architecture::Mps ? mps_dag(topo) : ttn_dag(topo);
}

CostModel CostModel::defaults(Architecture arch) {
  if (arch == Architecture::Mps) return {250.0, 3, 1, 4, 0};
  return {250.0, 1, 0, 6, -1};
}

LatencyEstimate estimate_latency(const ContractionDag& dag, const CostModel& cost) {
  if (!(cost.clock_mhz > 0.0)) throw std::invalid_argument("clock frequency must be positive");
  if (cost.n_reg < 0 || cost.adder_weight < 0 || cost.stage_overhead < 0) {
    throw std::invalid_argument("cost model weights must be non-negative");
  }
  LatencyEstimate est;
  if (dag.nodes.empty()) return est;
  for (const auto& stage : dag.stages()) {
    std::int64_t best = -1, best_mult = 0, best_add = 0;
    for (int id : stage) {
      std::int64_t mult = 0, add = 0;
      for (const auto& s : dag.nodes[static_cast<std::size_t>(id)].steps) {
        mult += cost.n_reg;
        add += static_cast<std::int64_t>(cost.adder_weight) * ceil_log2(s.contracted);
      }
      if (mult + add > best) {
        best = mult + add;
        best_mult = mult;
        best_add = add;
      }
    }
    est.mult_cycles += best_mult;
    est.adder_cycles += best_add;
    est.overhead_cycles += cost.stage_overhead;
  }
  est.overhead_cycles += cost.offset;
  est.cycles = std::max<std::int64_t>(0, est.mult_cycles + est.adder_cycles + est.overhead_cycles);
  est.ns = static_cast<double>(est.cycles) * 1000.0 / cost.clock_mhz;
  return est;
}

double estimate_memory_kbit(std::int64_t params, int frac_bits) {
  if (frac_bits < 0) throw std::invalid_argument("fractional bits must be non-negative");
  return static_cast<double>(params) * static_cast<double>(2 + frac_bits) / 1000.0;
}

HardwareReport hardware_report(const Topology& topo, int frac_bits, const CostModel& cost) {
  HardwareReport r;
  r.topology = topo;
  r.frac_bits = frac_bits;
  r.cost = cost;
  r.params = topo.param_count();
  r.memory_kbit = estimate_memory_kbit(r.params, frac_bits);
  r.memory_kbit_floor = r.params * (2 + frac_bits) / 1000;
  const ContractionDag dag = build_dag(topo);
  r.total_mults = dag.total_mults();
  r.total_adds = dag.total_adds();
  r.n_stages = dag.n_stages;
  r.latency = estimate_latency(dag, cost);
  return r;
}

}  // namespace tnjet
