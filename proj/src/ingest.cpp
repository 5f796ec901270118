#include "tnjet/ingest.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>

namespace tnjet {

namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {0x4A, 0x54, 0x4E, 0x31};
constexpr std::size_t kHeaderBytes = 4 + 4 + 2 + 2;

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint64_t offset() const { return pos_; }
  bool has(std::size_t n) const { return bytes_.size() - pos_ >= n; }

  template <typename T>
  T read_le(const char* what) {
    if (!has(sizeof(T))) {
      throw DatasetError(DatasetError::Kind::Truncated, pos_, std::string("truncated payload reading ") + what);
    }
    T value{};
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      value |= static_cast<T>(static_cast<T>(bytes_[pos_ + i]) << (8 * i));
    }
    pos_ += sizeof(T);
    return value;
  }

  float read_f32(const char* what) {
    return std::bit_cast<float>(read_le<std::uint32_t>(what));
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>(value >> (8 * i)));
}

}  // namespace

DatasetError::DatasetError(Kind kind, std::uint64_t offset, const std::string& what)
    : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"), kind_(kind), offset_(offset) {}

std::string_view to_string(DatasetError::Kind kind) {
  switch (kind) {
    case DatasetError::Kind::Io: return "io";
    case DatasetError::Kind::MalformedHeader: return "malformed_header";
    case DatasetError::Kind::Truncated: return "truncated_payload";
    case DatasetError::Kind::LabelOutOfRange: return "label_out_of_range";
  }
  return "unknown";
}

void sort_by_pt(JetRecord& record, int pt_column) {
  auto& c = record.constituents;
  if (c.rows() < 2) return;
  std::vector<Index> order(static_cast<std::size_t>(c.rows()));
  std::iota(order.begin(), order.end(), Index{0});
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) { return c(a, pt_column) > c(b, pt_column); });
  decltype(record.constituents) sorted(c.rows(), c.cols());
  for (std::size_t i = 0; i < order.size(); ++i) sorted.row(static_cast<Index>(i)) = c.row(order[i]);
  c = std::move(sorted);
}

std::vector<JetRecord> parse_dataset(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kHeaderBytes) {
    throw DatasetError(DatasetError::Kind::MalformedHeader, 0,
                       "header needs " + std::to_string(kHeaderBytes) + " bytes, file has " +
                           std::to_string(bytes.size()));
  }
  if (!std::equal(kMagic.begin(), kMagic.end(), bytes.begin())) {
    throw DatasetError(DatasetError::Kind::MalformedHeader, 0, "bad magic, expected JTN1");
  }
  Reader in(bytes.subspan(4));
  const auto count = in.read_le<std::uint32_t>("jet count");
  const auto max_constituents = in.read_le<std::uint16_t>("max constituents");
  const auto n_features = in.read_le<std::uint16_t>("feature count");
  if (n_features != kRawFeatureCount) {
    throw DatasetError(DatasetError::Kind::MalformedHeader, 10,
                       "feature count " + std::to_string(n_features) + " != " + std::to_string(kRawFeatureCount));
  }

  std::vector<JetRecord> records;
  records.reserve(std::min<std::size_t>(count, bytes.size() / 3));
  for (std::uint32_t j = 0; j < count; ++j) {
    const std::uint64_t jet_offset = 4 + in.offset();
    JetRecord rec;
    const auto label = in.read_le<std::uint8_t>("jet label");
    if (label >= kNumClasses) {
      throw DatasetError(DatasetError::Kind::LabelOutOfRange, jet_offset,
                         "jet " + std::to_string(j) + " has label " + std::to_string(label));
    }
    rec.label = label;
    const auto n = in.read_le<std::uint16_t>("constituent count");
    if (n > max_constituents) {
      throw DatasetError(DatasetError::Kind::MalformedHeader, jet_offset + 1,
                         "jet " + std::to_string(j) + " has " + std::to_string(n) +
                             " constituents, header max is " + std::to_string(max_constituents));
    }
    if (!in.has(std::size_t{n} * kRawFeatureCount * 4)) {
      throw DatasetError(DatasetError::Kind::Truncated, 4 + in.offset(),
                         "truncated payload in constituents of jet " + std::to_string(j));
    }
    rec.constituents.resize(n, kRawFeatureCount);
    for (Index r = 0; r < n; ++r) {
      for (Index c = 0; c < kRawFeatureCount; ++c) rec.constituents(r, c) = in.read_f32("constituent feature");
    }
    sort_by_pt(rec);
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<JetRecord> load_dataset(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) throw DatasetError(DatasetError::Kind::Io, 0, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(file)), std::istreambuf_iterator<char>());
  return parse_dataset(bytes);
}

std::vector<std::uint8_t> serialize_dataset(std::span<const JetRecord> records) {
  Index max_constituents = 0;
  for (const auto& r : records) max_constituents = std::max(max_constituents, r.constituents.rows());
  if (max_constituents > 0xFFFF) throw std::invalid_argument("too many constituents for JTN1");
  if (records.size() > 0xFFFFFFFFu) throw std::invalid_argument("too many jets for JTN1");

  std::vector<std::uint8_t> out(kMagic.begin(), kMagic.end());
  put_le(out, static_cast<std::uint32_t>(records.size()));
  put_le(out, static_cast<std::uint16_t>(max_constituents));
  put_le(out, static_cast<std::uint16_t>(kRawFeatureCount));
  for (const auto& r : records) {
    if (r.label < 0 || r.label >= kNumClasses) throw std::invalid_argument("label out of range");
    if (r.constituents.rows() > 0 && r.constituents.cols() != kRawFeatureCount) {
      throw std::invalid_argument("records must carry 16 raw features");
    }
    put_le(out, static_cast<std::uint8_t>(r.label));
    put_le(out, static_cast<std::uint16_t>(r.constituents.rows()));
    for (Index i = 0; i < r.constituents.rows(); ++i) {
      for (Index c = 0; c < kRawFeatureCount; ++c) put_le(out, std::bit_cast<std::uint32_t>(r.constituents(i, c)));
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, std::span<const JetRecord> records) {
  const auto bytes = serialize_dataset(records);
  std::ofstream file(path, std::ios::binary);
  if (!file) throw DatasetError(DatasetError::Kind::Io, 0, "cannot write " + path.string());
  file.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

double percentile(std::span<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("percentile of empty sample");
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const double frac = pos - static_cast<double>(lo);
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(lo), values.end());
  const double lower = values[lo];
  if (frac == 0.0 || lo + 1 >= values.size()) return lower;
  const double upper = *std::min_element(values.begin() + static_cast<std::ptrdiff_t>(lo) + 1, values.end());
  return lower + frac * (upper - lower);
}

ScalerParams fit_scaler(std::span<const JetRecord> train, std::span<const int> feature_indices) {
  if (train.empty()) throw std::invalid_argument("fit_scaler needs training data");
  ScalerParams params;
  params.feature_indices.assign(feature_indices.begin(), feature_indices.end());
  std::vector<double> column;
  for (int f : feature_indices) {
    if (f < 0 || f >= kRawFeatureCount) throw std::invalid_argument("feature index out of range");
    column.clear();
    for (const auto& r : train) {
      for (Index i = 0; i < r.constituents.rows(); ++i) column.push_back(r.constituents(i, f));
    }
    if (column.empty()) throw std::invalid_argument("training split has no constituents");
    const double q5 = percentile(column, 0.05);
    const double q95 = percentile(column, 0.95);
    if (!(q95 > q5)) {
      throw ConstantFeatureError("feature '" + std::string(kRawFeatureNames[static_cast<std::size_t>(f)]) +
                                 "' is constant over its 5-95% range");
    }
    params.q5.push_back(q5);
    params.q95.push_back(q95);
  }
  return params;
}

ScalerParams fit_scaler(std::span<const JetRecord> train, const FeatureColumns& columns) {
  const auto idx = columns.as_array();
  return fit_scaler(train, std::span<const int>(idx));
}

Eigen::MatrixXd JetBatch::jet(Index b) const {
  const Index per_jet = features.dim(1) * features.dim(2);
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      features.data() + b * per_jet, features.dim(1), features.dim(2));
}

JetBatch make_batch(std::span<const JetRecord> records, const ScalerParams& scaler, Index n) {
  if (n <= 0 || !std::has_single_bit(static_cast<std::uint64_t>(n))) {
    throw std::invalid_argument("constituent count must be a power of two");
  }
  const auto n_features = static_cast<Index>(scaler.feature_indices.size());
  const int pt_column = scaler.feature_indices.at(0);
  JetBatch batch;
  batch.n_constituents = n;
  batch.features = Tensor(Shape{static_cast<Index>(records.size()), n, n_features});
  batch.labels.reserve(records.size());

  std::vector<Index> order;
  for (std::size_t b = 0; b < records.size(); ++b) {
    const auto& c = records[b].constituents;
    order.resize(static_cast<std::size_t>(c.rows()));
    std::iota(order.begin(), order.end(), Index{0});
    const auto keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(n));
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(keep), order.end(),
                      [&](Index x, Index y) {
                        return c(x, pt_column) > c(y, pt_column) || (c(x, pt_column) == c(y, pt_column) && x < y);
                      });
    for (std::size_t i = 0; i < keep; ++i) {
      for (Index f = 0; f < n_features; ++f) {
        const auto uf = static_cast<std::size_t>(f);
        const double x = c(order[i], scaler.feature_indices[uf]);
        batch.features(static_cast<Index>(b), static_cast<Index>(i), f) =
            (x - scaler.q5[uf]) / (scaler.q95[uf] - scaler.q5[uf]);
      }
    }
    batch.labels.push_back(records[b].label);
  }
  return batch;
}

}  // namespace tnjet
