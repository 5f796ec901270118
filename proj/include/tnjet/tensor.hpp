#pragma once

// Dense row-major tensors with named axes, pairwise contraction and QR splitting.
//
// Contraction follows the transpose-then-multiply strategy: both operands are
// permuted so the contracted axes are adjacent, viewed as matrices and handed
// to Eigen's GEMM. The output axis order is always (free axes of the left
// operand, free axes of the right operand), each in their original order.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace tnjet {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline Index shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), Index{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::string out = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out + ")";
}

/// Pairs of axes to sum over: left_axes[i] of the first operand with
/// right_axes[i] of the second.
struct ContractionSpec {
  std::vector<int> left_axes;
  std::vector<int> right_axes;

  static ContractionSpec single(int left, int right) { return {{left}, {right}}; }
  static ContractionSpec none() { return {}; }
};

/// Multiplication/addition tally for pairwise contractions performed on this
/// thread while a ScopedOpCounter is alive.
struct OpCount {
  std::int64_t mults = 0;
  std::int64_t adds = 0;
  std::int64_t contractions = 0;
};

namespace detail {
inline thread_local OpCount* active_op_counter = nullptr;
}  // namespace detail

class ScopedOpCounter {
 public:
  ScopedOpCounter() : previous_(detail::active_op_counter) { detail::active_op_counter = &count_; }
  ~ScopedOpCounter() { detail::active_op_counter = previous_; }
  ScopedOpCounter(const ScopedOpCounter&) = delete;
  ScopedOpCounter& operator=(const ScopedOpCounter&) = delete;

  const OpCount& count() const { return count_; }

 private:
  OpCount count_;
  OpCount* previous_;
};

/// Records one contraction with `free` output elements each summing `contracted` products.
inline void record_contraction(Index free, Index contracted) {
  if (auto* counter = detail::active_op_counter) {
    counter->mults += free * contracted;
    counter->adds += free * std::max<Index>(contracted - 1, 0);
    counter->contractions += 1;
  }
}

template <typename Scalar>
class BasicTensor {
 public:
  using Scalar_ = Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMajorMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  /// Rank-0 tensor holding a single zero.
  BasicTensor() : BasicTensor(Shape{}) {}

  explicit BasicTensor(Shape shape) : shape_(std::move(shape)) {
    check_shape();
    values_ = Vector::Zero(shape_size(shape_));
  }

  BasicTensor(Shape shape, Vector values) : shape_(std::move(shape)), values_(std::move(values)) {
    check_shape();
    if (values_.size() != shape_size(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(values_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static BasicTensor from_vector(const Eigen::Ref<const Vector>& v) {
    return BasicTensor(Shape{v.size()}, Vector(v));
  }

  template <typename Derived>
  static BasicTensor from_matrix(const Eigen::MatrixBase<Derived>& m) {
    BasicTensor t(Shape{m.rows(), m.cols()});
    t.matrix_view(m.rows()) = m;
    return t;
  }

  static BasicTensor constant(Shape shape, Scalar value) {
    BasicTensor t(std::move(shape));
    t.values_.setConstant(value);
    return t;
  }

  template <typename Generator>
  static BasicTensor random_normal(Shape shape, Generator& gen, Scalar stddev) {
    BasicTensor t(std::move(shape));
    std::normal_distribution<Scalar> dist(Scalar(0), stddev);
    for (Index i = 0; i < t.size(); ++i) t.values_[i] = dist(gen);
    return t;
  }

  int rank() const { return static_cast<int>(shape_.size()); }
  const Shape& shape() const { return shape_; }
  Index dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
  Index size() const { return values_.size(); }

  Vector& values() { return values_; }
  const Vector& values() const { return values_; }
  Scalar* data() { return values_.data(); }
  const Scalar* data() const { return values_.data(); }

  Scalar& operator[](Index flat) { return values_[flat]; }
  const Scalar& operator[](Index flat) const { return values_[flat]; }

  template <typename... Indices>
  Scalar& operator()(Indices... idx) {
    return values_[offset({static_cast<Index>(idx)...})];
  }
  template <typename... Indices>
  const Scalar& operator()(Indices... idx) const {
    return values_[offset({static_cast<Index>(idx)...})];
  }

  Index offset(std::initializer_list<Index> idx) const {
    return offset(std::span<const Index>(idx.begin(), idx.size()));
  }
  Index offset(std::span<const Index> idx) const {
    Index flat = 0;
    for (std::size_t a = 0; a < shape_.size(); ++a) flat = flat * shape_[a] + idx[a];
    return flat;
  }

  /// Row-major matrix view with the given number of rows.
  Eigen::Map<RowMajorMatrix> matrix_view(Index rows) {
    return Eigen::Map<RowMajorMatrix>(values_.data(), rows, rows ? size() / rows : 0);
  }
  Eigen::Map<const RowMajorMatrix> matrix_view(Index rows) const {
    return Eigen::Map<const RowMajorMatrix>(values_.data(), rows, rows ? size() / rows : 0);
  }

  const std::vector<std::string>& labels() const { return labels_; }
  void set_labels(std::vector<std::string> labels) {
    if (!labels.empty() && labels.size() != shape_.size()) {
      throw ShapeError("axis label count " + std::to_string(labels.size()) + " != rank " +
                       std::to_string(shape_.size()));
    }
    labels_ = std::move(labels);
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.values_ == b.values_;
  }

 private:
  void check_shape() const {
    for (std::size_t a = 0; a < shape_.size(); ++a) {
      if (shape_[a] < 0) throw ShapeError("negative axis length in shape " + shape_string(shape_));
    }
  }

  Shape shape_;
  Vector values_;
  std::vector<std::string> labels_;
};

using Tensor = BasicTensor<double>;

template <typename Scalar>
BasicTensor<Scalar> operator*(Scalar alpha, const BasicTensor<Scalar>& t) {
  return BasicTensor<Scalar>(t.shape(), alpha * t.values());
}

template <typename Scalar>
BasicTensor<Scalar> operator+(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  if (a.shape() != b.shape()) throw ShapeError("cannot add " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  return BasicTensor<Scalar>(a.shape(), a.values() + b.values());
}

template <typename Scalar>
BasicTensor<Scalar> operator-(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  if (a.shape() != b.shape()) throw ShapeError("cannot subtract " + shape_string(a.shape()) + " and " + shape_string(b.shape()));
  return BasicTensor<Scalar>(a.shape(), a.values() - b.values());
}

template <typename Scalar>
Scalar norm(const BasicTensor<Scalar>& t) {
  return t.values().norm();
}

/// ||a - b|| / ||b||, or ||a - b|| when b is zero.
template <typename Scalar>
Scalar relative_error(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  if (a.shape() != b.shape()) throw ShapeError("relative_error shape mismatch");
  const Scalar denom = b.values().norm();
  const Scalar diff = (a.values() - b.values()).norm();
  return denom > Scalar(0) ? diff / denom : diff;
}

template <typename Scalar>
BasicTensor<Scalar> reshape(BasicTensor<Scalar> t, Shape shape) {
  if (shape_size(shape) != t.size()) {
    throw ShapeError("cannot reshape " + shape_string(t.shape()) + " to " + shape_string(shape));
  }
  return BasicTensor<Scalar>(std::move(shape), std::move(t.values()));
}

/// Output axis k is input axis perm[k].
template <typename Scalar>
BasicTensor<Scalar> permute(const BasicTensor<Scalar>& t, std::span<const int> perm) {
  const int rank = t.rank();
  if (static_cast<int>(perm.size()) != rank) throw ShapeError("permutation length does not match rank");
  std::vector<bool> seen(static_cast<std::size_t>(rank), false);
  for (int p : perm) {
    if (p < 0 || p >= rank || seen[static_cast<std::size_t>(p)]) throw ShapeError("invalid axis permutation");
    seen[static_cast<std::size_t>(p)] = true;
  }
  bool identity = true;
  for (int k = 0; k < rank; ++k) identity = identity && perm[static_cast<std::size_t>(k)] == k;
  if (identity) return t;

  Shape in_strides(static_cast<std::size_t>(rank));
  Index stride = 1;
  for (int a = rank - 1; a >= 0; --a) {
    in_strides[static_cast<std::size_t>(a)] = stride;
    stride *= t.dim(a);
  }
  Shape out_shape(static_cast<std::size_t>(rank));
  Shape gather(static_cast<std::size_t>(rank));
  for (int k = 0; k < rank; ++k) {
    out_shape[static_cast<std::size_t>(k)] = t.dim(perm[static_cast<std::size_t>(k)]);
    gather[static_cast<std::size_t>(k)] = in_strides[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
  }
  BasicTensor<Scalar> out(out_shape);
  if (out.size() == 0) return out;

  // Odometer over the output index; the innermost axis is walked in a tight loop.
  std::vector<Index> counter(static_cast<std::size_t>(rank), 0);
  const Index inner_len = out_shape.back();
  const Index inner_stride = gather.back();
  const Scalar* src = t.data();
  Scalar* dst = out.data();
  Index src_base = 0;
  for (Index written = 0; written < out.size(); written += inner_len) {
    for (Index i = 0; i < inner_len; ++i) dst[written + i] = src[src_base + i * inner_stride];
    for (int a = rank - 2; a >= 0; --a) {
      auto ua = static_cast<std::size_t>(a);
      src_base += gather[ua];
      if (++counter[ua] < out_shape[ua]) break;
      src_base -= gather[ua] * out_shape[ua];
      counter[ua] = 0;
    }
  }
  return out;
}

template <typename Scalar>
BasicTensor<Scalar> permute(const BasicTensor<Scalar>& t, std::initializer_list<int> perm) {
  return permute(t, std::span<const int>(perm.begin(), perm.size()));
}

namespace detail {

inline void validate_axes(std::span<const int> axes, int rank, const char* which) {
  std::vector<bool> seen(static_cast<std::size_t>(rank), false);
  for (int a : axes) {
    if (a < 0 || a >= rank) {
      throw ShapeError(std::string(which) + " axis " + std::to_string(a) + " out of range for rank " +
                       std::to_string(rank));
    }
    if (seen[static_cast<std::size_t>(a)]) {
      throw ShapeError(std::string(which) + " axis " + std::to_string(a) + " listed twice");
    }
    seen[static_cast<std::size_t>(a)] = true;
  }
}

inline std::vector<int> free_axes(int rank, std::span<const int> contracted) {
  std::vector<int> free;
  for (int a = 0; a < rank; ++a) {
    if (std::find(contracted.begin(), contracted.end(), a) == contracted.end()) free.push_back(a);
  }
  return free;
}

}  // namespace detail

/// Throws ShapeError naming the first offending axis pair.
template <typename Scalar>
void validate_contraction(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b, const ContractionSpec& spec) {
  if (spec.left_axes.size() != spec.right_axes.size()) {
    throw ShapeError("contraction lists differ in length: " + std::to_string(spec.left_axes.size()) + " vs " +
                     std::to_string(spec.right_axes.size()));
  }
  detail::validate_axes(spec.left_axes, a.rank(), "left");
  detail::validate_axes(spec.right_axes, b.rank(), "right");
  for (std::size_t i = 0; i < spec.left_axes.size(); ++i) {
    const Index da = a.dim(spec.left_axes[i]);
    const Index db = b.dim(spec.right_axes[i]);
    if (da != db) {
      throw ShapeError("contracted axis pair (" + std::to_string(spec.left_axes[i]) + "," +
                       std::to_string(spec.right_axes[i]) + ") has mismatched lengths " + std::to_string(da) +
                       " vs " + std::to_string(db));
    }
  }
}

/// Sums over the paired axes; output axes are (free of a, free of b).
template <typename Scalar>
BasicTensor<Scalar> contract(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b, const ContractionSpec& spec) {
  using Matrix = typename BasicTensor<Scalar>::RowMajorMatrix;
  validate_contraction(a, b, spec);

  const auto free_a = detail::free_axes(a.rank(), spec.left_axes);
  const auto free_b = detail::free_axes(b.rank(), spec.right_axes);

  std::vector<int> perm_a = free_a;
  perm_a.insert(perm_a.end(), spec.left_axes.begin(), spec.left_axes.end());
  std::vector<int> perm_b = spec.right_axes;
  perm_b.insert(perm_b.end(), free_b.begin(), free_b.end());

  Shape out_shape;
  Index rows = 1, cols = 1, inner = 1;
  for (int ax : free_a) {
    out_shape.push_back(a.dim(ax));
    rows *= a.dim(ax);
  }
  for (int ax : free_b) {
    out_shape.push_back(b.dim(ax));
    cols *= b.dim(ax);
  }
  for (int ax : spec.left_axes) inner *= a.dim(ax);

  const BasicTensor<Scalar> pa = permute(a, perm_a);
  const BasicTensor<Scalar> pb = permute(b, perm_b);
  BasicTensor<Scalar> out(out_shape);
  if (out.size() > 0) {
    Eigen::Map<const Matrix> ma(pa.data(), rows, inner);
    Eigen::Map<const Matrix> mb(pb.data(), inner, cols);
    Eigen::Map<Matrix> mc(out.data(), rows, cols);
    if (inner == 0) {
      mc.setZero();
    } else {
      mc.noalias() = ma * mb;
    }
  }
  record_contraction(rows * cols, inner);
  return out;
}

/// Tensor (outer) product: axes of a followed by axes of b.
template <typename Scalar>
BasicTensor<Scalar> outer(const BasicTensor<Scalar>& a, const BasicTensor<Scalar>& b) {
  Shape shape = a.shape();
  shape.insert(shape.end(), b.shape().begin(), b.shape().end());
  BasicTensor<Scalar> out(shape);
  out.matrix_view(a.size()) = a.values() * b.values().transpose();
  return out;
}

/// Q is isometric over its row group; the new bond is Q's last axis and R's first.
template <typename Scalar>
struct QrFactors {
  BasicTensor<Scalar> q;
  BasicTensor<Scalar> r;
};

/// Thin QR of `t` viewed as a (row_axes) x (col_axes) matrix. R has a
/// non-negative diagonal so the factorization is unique for full-rank input.
template <typename Scalar>
QrFactors<Scalar> qr_split(const BasicTensor<Scalar>& t, std::span<const int> row_axes, std::span<const int> col_axes) {
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  if (static_cast<int>(row_axes.size() + col_axes.size()) != t.rank()) {
    throw ShapeError("qr_split: row and column axes do not partition the tensor axes");
  }
  std::vector<int> perm(row_axes.begin(), row_axes.end());
  perm.insert(perm.end(), col_axes.begin(), col_axes.end());
  std::vector<bool> seen(static_cast<std::size_t>(t.rank()), false);
  for (int a : perm) {
    if (a < 0 || a >= t.rank() || seen[static_cast<std::size_t>(a)]) {
      throw ShapeError("qr_split: row and column axes do not partition the tensor axes");
    }
    seen[static_cast<std::size_t>(a)] = true;
  }

  Shape row_shape, col_shape;
  Index m = 1, n = 1;
  for (int a : row_axes) {
    row_shape.push_back(t.dim(a));
    m *= t.dim(a);
  }
  for (int a : col_axes) {
    col_shape.push_back(t.dim(a));
    n *= t.dim(a);
  }
  const BasicTensor<Scalar> p = permute(t, perm);
  const Matrix mat = p.matrix_view(m);
  const Index k = std::min(m, n);

  Eigen::HouseholderQR<Matrix> qr(mat);
  Matrix q = qr.householderQ() * Matrix::Identity(m, k);
  Matrix r = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  for (Index i = 0; i < k; ++i) {
    if (r(i, i) < Scalar(0)) {
      r.row(i) *= Scalar(-1);
      q.col(i) *= Scalar(-1);
    }
  }

  Shape q_shape = row_shape;
  q_shape.push_back(k);
  Shape r_shape{k};
  r_shape.insert(r_shape.end(), col_shape.begin(), col_shape.end());

  QrFactors<Scalar> out{BasicTensor<Scalar>(q_shape), BasicTensor<Scalar>(r_shape)};
  out.q.matrix_view(m) = q;
  out.r.matrix_view(k) = r;
  return out;
}

template <typename Scalar>
QrFactors<Scalar> qr_split(const BasicTensor<Scalar>& t, std::initializer_list<int> row_axes,
                           std::initializer_list<int> col_axes) {
  return qr_split(t, std::span<const int>(row_axes.begin(), row_axes.size()),
                  std::span<const int>(col_axes.begin(), col_axes.size()));
}

}  // namespace tnjet
