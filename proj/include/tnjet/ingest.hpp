#pragma once

// Jet dataset I/O (JTN1 binary format), robust feature scaling and batching.
//
// JTN1 layout, all integers little-endian:
//   bytes 0..3   magic "JTN1" (4A 54 4E 31)
//   u32          jet count
//   u16          max constituents per jet
//   u16          feature count (16)
//   per jet:     u8 label, u16 constituent count, count x features float32 (row-major)

#include "tnjet/tensor.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tnjet {

inline constexpr int kNumClasses = 5;
inline constexpr int kRawFeatureCount = 16;
inline constexpr std::array<std::string_view, kNumClasses> kClassNames = {"g", "q", "W", "Z", "t"};

/// Column names of the 16 raw per-constituent features, in file order.
inline constexpr std::array<std::string_view, kRawFeatureCount> kRawFeatureNames = {
    "px",     "py",     "pz",     "e",      "erel",  "pt",      "ptrel",     "eta",
    "etarel", "etarot", "phi",    "phirel", "phirot", "deltaR", "costheta", "costhetarel"};

/// Raw column indices of the three model features (p_T, E_rel, dR).
struct FeatureColumns {
  int pt = 5;
  int e_rel = 4;
  int delta_r = 13;

  std::array<int, 3> as_array() const { return {pt, e_rel, delta_r}; }
};

inline constexpr FeatureColumns kDefaultFeatureColumns{};

struct JetRecord {
  /// n_raw x 16, rows sorted by descending p_T.
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> constituents;
  int label = 0;
};

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { Io, MalformedHeader, Truncated, LabelOutOfRange };

  DatasetError(Kind kind, std::uint64_t offset, const std::string& what);

  Kind kind() const { return kind_; }
  std::uint64_t offset() const { return offset_; }

 private:
  Kind kind_;
  std::uint64_t offset_;
};

std::string_view to_string(DatasetError::Kind kind);

std::vector<JetRecord> load_dataset(const std::filesystem::path& path);
std::vector<JetRecord> parse_dataset(std::span<const std::uint8_t> bytes);

/// Serializes records; max constituents is taken from the largest record.
std::vector<std::uint8_t> serialize_dataset(std::span<const JetRecord> records);
void write_dataset(const std::filesystem::path& path, std::span<const JetRecord> records);

/// Stable sort of constituent rows by descending p_T.
void sort_by_pt(JetRecord& record, int pt_column = kDefaultFeatureColumns.pt);

struct ScalerParams {
  std::vector<int> feature_indices;  // raw column per model feature
  std::vector<double> q5;
  std::vector<double> q95;
};

class ConstantFeatureError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Empirical percentile with linear interpolation between order statistics
/// (position q * (n - 1)). `values` is reordered.
double percentile(std::span<double> values, double q);

ScalerParams fit_scaler(std::span<const JetRecord> train, std::span<const int> feature_indices);
ScalerParams fit_scaler(std::span<const JetRecord> train, const FeatureColumns& columns = kDefaultFeatureColumns);

/// B x N x F scaled features; padded rows are exactly zero.
struct JetBatch {
  Tensor features;
  std::vector<int> labels;
  Index n_constituents = 0;

  Index size() const { return static_cast<Index>(labels.size()); }
  /// N x F matrix for one jet.
  Eigen::MatrixXd jet(Index b) const;
};

/// Keeps the n highest-p_T constituents, scales them and zero-pads the rest.
/// p_T ordering uses the scaler's first feature column.
JetBatch make_batch(std::span<const JetRecord> records, const ScalerParams& scaler, Index n);

}  // namespace tnjet
