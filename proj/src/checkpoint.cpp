#include "tnjet/model.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace tnjet {

namespace {

constexpr std::uint32_t kCheckpointVersion = 1;

template <class... Fs>
struct Overloaded : Fs... {
  using Fs::operator()...;
};

class Writer {
 public:
  template <typename T>
  void le(T value) {
    using U = std::make_unsigned_t<T>;
    const auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes.push_back(static_cast<std::uint8_t>(u >> (8 * i)));
  }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v)); }
  void magic(const char* m) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(m[i]));
  }

  std::vector<std::uint8_t> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

  template <typename T>
  T le() {
    using U = std::make_unsigned_t<T>;
    if (bytes_.size() - pos_ < sizeof(T)) {
      throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
    }
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(static_cast<U>(bytes_[pos_ + i]) << (8 * i));
    pos_ += sizeof(T);
    return static_cast<T>(u);
  }
  double f64() { return std::bit_cast<double>(le<std::uint64_t>()); }
  std::string magic() {
    if (bytes_.size() < 4) throw CheckpointError("checkpoint too short");
    pos_ = 4;
    return std::string(bytes_.begin(), bytes_.begin() + 4);
  }
  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

void write_tensors(Writer& w, const std::vector<Tensor>& ts) {
  w.le(static_cast<std::uint32_t>(ts.size()));
  for (const auto& t : ts) {
    w.le(static_cast<std::uint32_t>(t.rank()));
    for (Index d : t.shape()) w.le(static_cast<std::uint32_t>(d));
    for (Index i = 0; i < t.size(); ++i) w.f64(t[i]);
  }
}

std::vector<Tensor> read_tensors(Reader& r) {
  const auto count = r.le<std::uint32_t>();
  if (count > (1u << 20)) throw CheckpointError("implausible tensor count " + std::to_string(count));
  std::vector<Tensor> ts;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto rank = r.le<std::uint32_t>();
    if (rank > 8) throw CheckpointError("implausible tensor rank " + std::to_string(rank));
    Shape shape;
    for (std::uint32_t a = 0; a < rank; ++a) shape.push_back(r.le<std::uint32_t>());
    if (shape_size(shape) > (Index{1} << 28)) throw CheckpointError("implausible tensor size");
    Tensor t(shape);
    for (Index k = 0; k < t.size(); ++k) t[k] = r.f64();
    ts.push_back(std::move(t));
  }
  return ts;
}

}  // namespace

std::string to_string(Architecture arch) { return arch == Architecture::Mps ? "mps" : "ttn"; }

Architecture parse_architecture(const std::string& text) {
  if (text == "mps") return Architecture::Mps;
  if (text == "ttn") return Architecture::Ttn;
  throw std::invalid_argument("unknown architecture '" + text + "'");
}

Architecture architecture_of(const AnyModel& m) {
  return std::holds_alternative<MpsModel>(m) ? Architecture::Mps : Architecture::Ttn;
}

OutputRule default_output_rule(Architecture arch) {
  return arch == Architecture::Mps ? OutputRule::Softmax : OutputRule::SquaredOverlap;
}

std::int64_t param_count(const AnyModel& m) {
  return std::visit([](const auto& model) { return param_count(model); }, m);
}

int n_sites(const AnyModel& m) {
  return std::visit(Overloaded{[](const MpsModel& x) { return x.n_sites(); },
                               [](const TtnModel& x) { return x.n_leaves(); }},
                    m);
}

int phys_dim(const AnyModel& m) {
  return std::visit([](const auto& x) { return x.phys_dim(); }, m);
}

int n_classes(const AnyModel& m) {
  return std::visit([](const auto& x) { return x.n_classes(); }, m);
}

std::vector<Tensor>& tensors(AnyModel& m) {
  return std::visit([](auto& x) -> std::vector<Tensor>& { return x.tensors(); }, m);
}

const std::vector<Tensor>& tensors(const AnyModel& m) {
  return std::visit([](const auto& x) -> const std::vector<Tensor>& { return x.tensors(); }, m);
}

Eigen::VectorXd forward(const AnyModel& m, const EmbeddedJet& x, const ContractFn& contract_fn, const SiteFn& site_fn) {
  return std::visit(Overloaded{[&](const MpsModel& mps) { return forward_mps(mps, x, contract_fn, site_fn); },
                               [&](const TtnModel& ttn) { return forward_ttn(ttn, x, contract_fn, site_fn); }},
                    m);
}

Gradients gradient(const AnyModel& m, const EmbeddedJet& x, const Eigen::VectorXd& upstream) {
  return std::visit(Overloaded{[&](const MpsModel& mps) { return grad_mps(mps, x, upstream); },
                               [&](const TtnModel& ttn) { return grad_ttn(ttn, x, upstream); }},
                    m);
}

Eigen::VectorXd class_probabilities(const Eigen::VectorXd& scores, OutputRule rule) {
  if (rule == OutputRule::SquaredOverlap) {
    if (!(scores.squaredNorm() > 0.0)) {
      return Eigen::VectorXd::Constant(scores.size(), 1.0 / static_cast<double>(scores.size()));
    }
    return probabilities_ttn(scores);
  }
  const Eigen::ArrayXd e = (scores.array() - scores.maxCoeff()).exp();
  return e / e.sum();
}

int predict(const Eigen::VectorXd& scores, OutputRule rule) {
  Eigen::Index best = 0;
  if (rule == OutputRule::SquaredOverlap) {
    scores.cwiseAbs().maxCoeff(&best);
  } else {
    scores.maxCoeff(&best);
  }
  return static_cast<int>(best);
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  std::visit(Overloaded{[&](const MpsModel& m) {
                          w.magic("MPSC");
                          w.le(kCheckpointVersion);
                          w.le(static_cast<std::uint32_t>(m.n_sites()));
                          w.le(static_cast<std::uint32_t>(m.phys_dim()));
                          w.le(static_cast<std::uint32_t>(m.bond_cap()));
                          w.le(static_cast<std::uint32_t>(m.n_classes()));
                          w.le(static_cast<std::uint32_t>(m.label_site()));
                          w.le(m.seed());
                        },
                        [&](const TtnModel& m) {
                          w.magic("TTNC");
                          w.le(kCheckpointVersion);
                          w.le(static_cast<std::uint32_t>(m.n_leaves()));
                          w.le(static_cast<std::uint32_t>(m.phys_dim()));
                          w.le(static_cast<std::uint32_t>(m.chi()));
                          w.le(static_cast<std::uint32_t>(m.n_classes()));
                          w.le(m.seed());
                        }},
             ckpt.model);
  w.le(static_cast<std::uint8_t>(ckpt.embedding.layout));
  w.le(static_cast<std::uint8_t>(ckpt.embedding.order));
  w.le(static_cast<std::uint8_t>(ckpt.output));
  w.le(std::uint8_t{0});
  const auto& s = ckpt.scaler;
  w.le(static_cast<std::uint32_t>(s.feature_indices.size()));
  for (std::size_t f = 0; f < s.feature_indices.size(); ++f) {
    w.le(static_cast<std::int32_t>(s.feature_indices[f]));
    w.f64(s.q5.at(f));
    w.f64(s.q95.at(f));
  }
  write_tensors(w, tensors(ckpt.model));
  return std::move(w.bytes);
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::string magic = r.magic();
  if (magic != "MPSC" && magic != "TTNC") throw CheckpointError("unknown checkpoint magic '" + magic + "'");
  const auto version = r.le<std::uint32_t>();
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));

  std::uint32_t n = 0, d = 0, cap = 0, classes = 0, label = 0;
  n = r.le<std::uint32_t>();
  d = r.le<std::uint32_t>();
  cap = r.le<std::uint32_t>();
  classes = r.le<std::uint32_t>();
  if (magic == "MPSC") label = r.le<std::uint32_t>();
  const auto seed = r.le<std::uint64_t>();

  Checkpoint ckpt;
  const auto layout = r.le<std::uint8_t>();
  const auto order = r.le<std::uint8_t>();
  const auto output = r.le<std::uint8_t>();
  r.le<std::uint8_t>();
  if (layout > 1 || order > 1 || output > 1) throw CheckpointError("invalid embedding or output flags");
  ckpt.embedding = {static_cast<EmbeddingLayout>(layout), static_cast<SiteOrder>(order)};
  ckpt.output = static_cast<OutputRule>(output);

  const auto n_features = r.le<std::uint32_t>();
  if (n_features > kRawFeatureCount) throw CheckpointError("implausible scaler feature count");
  for (std::uint32_t f = 0; f < n_features; ++f) {
    ckpt.scaler.feature_indices.push_back(r.le<std::int32_t>());
    ckpt.scaler.q5.push_back(r.f64());
    ckpt.scaler.q95.push_back(r.f64());
  }
  auto ts = read_tensors(r);
  if (!r.at_end()) throw CheckpointError("trailing bytes after checkpoint payload");
  try {
    if (magic == "MPSC") {
      ckpt.model = MpsModel(static_cast<int>(n), static_cast<int>(d), static_cast<int>(cap), static_cast<int>(classes),
                            static_cast<int>(label), seed, std::move(ts));
    } else {
      ckpt.model = TtnModel(static_cast<int>(n), static_cast<int>(d), static_cast<int>(cap), static_cast<int>(classes),
                            seed, std::move(ts));
    }
  } catch (const std::invalid_argument& e) {
    throw CheckpointError(std::string("inconsistent checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = serialize_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_checkpoint(bytes);
}

}  // namespace tnjet
