#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <string>
#include <vector>

namespace infext {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape);

// Dense row-major n-d array. Storage is an Eigen column vector so that
// element-wise math can go through Eigen expressions, and rank-2 views map
// onto row-major Eigen matrices without copies.
template <typename Scalar>
class Tensor {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor() = default;

  explicit Tensor(Shape shape, Scalar fill = Scalar(0))
      : shape_(std::move(shape)), data_(Vector::Constant(numel(shape_), fill)) {
    for (Index d : shape_) {
      if (d < 0) throw std::invalid_argument("negative tensor dimension");
    }
  }

  Tensor(Shape shape, const std::vector<Scalar>& values)
      : shape_(std::move(shape)) {
    if (static_cast<Index>(values.size()) != numel(shape_)) {
      throw std::invalid_argument("tensor data length " +
                                  std::to_string(values.size()) +
                                  " does not match shape " + to_string(shape_));
    }
    data_ = Eigen::Map<const Vector>(values.data(), numel(shape_));
  }

  Tensor(Shape shape, Vector values)
      : shape_(std::move(shape)), data_(std::move(values)) {
    if (data_.size() != numel(shape_)) {
      throw std::invalid_argument("tensor data length does not match shape " +
                                  to_string(shape_));
    }
  }

  static Tensor scalar(Scalar v) { return Tensor(Shape{}, v); }

  static Tensor from_matrix(const RowMatrix& m) {
    Tensor t({m.rows(), m.cols()});
    t.matrix() = m;
    return t;
  }

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  Index size() const { return data_.size(); }
  bool empty() const { return data_.size() == 0; }

  Index dim(int axis) const { return shape_.at(normalize_axis(axis)); }

  int normalize_axis(int axis) const {
    const int r = rank();
    const int a = axis < 0 ? axis + r : axis;
    if (a < 0 || a >= r) {
      throw std::out_of_range("axis " + std::to_string(axis) +
                              " out of range for shape " + to_string(shape_));
    }
    return a;
  }

  Scalar* data() { return data_.data(); }
  const Scalar* data() const { return data_.data(); }
  Vector& vec() { return data_; }
  const Vector& vec() const { return data_; }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar item() const {
    if (size() != 1) {
      throw std::logic_error("item() on tensor of shape " + to_string(shape_));
    }
    return data_[0];
  }

  // Row-major matrix view. Rank-2 tensors map directly; other ranks must
  // pass an explicit factorization of size().
  MatrixMap matrix() {
    check_rank2();
    return MatrixMap(data_.data(), shape_[0], shape_[1]);
  }
  ConstMatrixMap matrix() const {
    check_rank2();
    return ConstMatrixMap(data_.data(), shape_[0], shape_[1]);
  }
  MatrixMap matrix(Index rows, Index cols) {
    check_factor(rows, cols);
    return MatrixMap(data_.data(), rows, cols);
  }
  ConstMatrixMap matrix(Index rows, Index cols) const {
    check_factor(rows, cols);
    return ConstMatrixMap(data_.data(), rows, cols);
  }

  Tensor reshaped(Shape shape) const {
    if (numel(shape) != size()) {
      throw std::invalid_argument("cannot reshape " + to_string(shape_) +
                                  " to " + to_string(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  void set_zero() { data_.setZero(); }

  template <typename To>
  Tensor<To> cast() const {
    return Tensor<To>(shape_, data_.template cast<To>().eval());
  }

  std::vector<Scalar> to_vector() const {
    return std::vector<Scalar>(data_.data(), data_.data() + data_.size());
  }

 private:
  void check_rank2() const {
    if (rank() != 2) {
      throw std::logic_error("matrix view needs rank 2, got " +
                             to_string(shape_));
    }
  }
  void check_factor(Index rows, Index cols) const {
    if (rows * cols != size()) {
      throw std::logic_error("matrix view " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " does not cover " +
                             to_string(shape_));
    }
  }

  Shape shape_;
  Vector data_;
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

}  // namespace infext
