#pragma once

// Architecture-agnostic model handle and checkpoint files.
//
// Checkpoints ("MPSC" for MPS, "TTNC" for TTN) are little-endian:
//   magic[4], u32 version (1)
//   MPS: u32 n_sites, u32 phys_dim, u32 bond_cap, u32 n_classes, u32 label_site, u64 seed
//   TTN: u32 n_leaves, u32 phys_dim, u32 chi,      u32 n_classes, u64 seed
//   u8 embedding layout, u8 site order, u8 output rule, u8 reserved
//   u32 scaler feature count, then per feature: i32 column, f64 q5, f64 q95
//   u32 tensor count, then per tensor: u32 rank, rank x u32 dims, product(dims) x f64
// The tensor block follows model order (MPS sites left to right, TTN nodes root first).

#include "tnjet/ingest.hpp"
#include "tnjet/mps.hpp"
#include "tnjet/ttn.hpp"

#include <filesystem>
#include <string>
#include <variant>

namespace tnjet {

using AnyModel = std::variant<MpsModel, TtnModel>;

enum class Architecture { Mps, Ttn };

/// How class scores become probabilities and predictions.
enum class OutputRule {
  Softmax,         // argmax of raw scores; softmax probabilities (cross-entropy training)
  SquaredOverlap,  // argmax of |overlap|; p_c = o_c^2 / sum o^2 (MSE training)
};

std::string to_string(Architecture arch);
Architecture parse_architecture(const std::string& text);
Architecture architecture_of(const AnyModel& m);
OutputRule default_output_rule(Architecture arch);

std::int64_t param_count(const AnyModel& m);
int n_sites(const AnyModel& m);
int phys_dim(const AnyModel& m);
int n_classes(const AnyModel& m);
std::vector<Tensor>& tensors(AnyModel& m);
const std::vector<Tensor>& tensors(const AnyModel& m);

Eigen::VectorXd forward(const AnyModel& m, const EmbeddedJet& x, const ContractFn& contract_fn = {},
                        const SiteFn& site_fn = {});
Gradients gradient(const AnyModel& m, const EmbeddedJet& x, const Eigen::VectorXd& upstream);

Eigen::VectorXd class_probabilities(const Eigen::VectorXd& scores, OutputRule rule);
int predict(const Eigen::VectorXd& scores, OutputRule rule);

struct Checkpoint {
  AnyModel model;
  EmbeddingSpec embedding;
  OutputRule output = OutputRule::Softmax;
  ScalerParams scaler;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tnjet
