#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flowad
{

/// Thrown when operand shapes are incompatible.
class ShapeError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

/// Dense row-major array of doubles. Every operation in the engine treats an
/// array as a matrix: rows() is the product of the leading extents and cols()
/// is the last extent.
class Array
{
public:
  Array() : shape_{0, 0} {}
  explicit Array(Shape shape, double fill = 0.0);
  Array(Shape shape, std::vector<double> data);

  static Array zeros(std::size_t rows, std::size_t cols) { return Array({rows, cols}); }
  static Array scalar(double v) { return Array({1, 1}, v); }
  static Array row(std::span<const double> values);
  static Array column(std::span<const double> values);
  static Array zeros_like(const Array& other) { return Array(other.shape_); }

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const { return shape_.empty() ? 1 : shape_.back(); }
  bool same_shape(const Array& other) const { return shape_ == other.shape_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }
  double item() const;

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }
  std::span<double> row_span(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
  std::span<const double> row_span(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

  void fill(double v);
  bool all_finite() const;

private:
  Shape shape_;
  std::vector<double> data_;
};

// Eager array math. Binary elementwise operations accept a second operand of
// identical shape, a 1xC row, an Rx1 column or a 1x1 scalar; it is broadcast
// against the first operand.

Array matmul(const Array& a, const Array& b);
/// a^T * b
Array matmul_tn(const Array& a, const Array& b);
/// a * b^T
Array matmul_nt(const Array& a, const Array& b);

Array add(const Array& a, const Array& b);
Array sub(const Array& a, const Array& b);
Array mul(const Array& a, const Array& b);
Array scale(const Array& a, double c);
Array add_scalar(const Array& a, double c);
Array pow_scalar(const Array& a, double p);

Array tanh(const Array& a);
Array sigmoid(const Array& a);
/// log(1 + exp(x)), stable for large |x|.
Array softplus(const Array& a);
Array relu(const Array& a);
Array exp(const Array& a);
Array log(const Array& a);

Array concat_cols(std::span<const Array> parts);
Array concat_rows(std::span<const Array> parts);
Array slice_cols(const Array& a, std::size_t begin, std::size_t end);
Array slice_rows(const Array& a, std::size_t begin, std::size_t end);

Array sum(const Array& a);
Array mean(const Array& a);
/// Rx1 sums over each row.
Array row_sum(const Array& a);
/// 1xC means over each column.
Array col_mean(const Array& a);

/// Sums `grad` down to `target` shape, undoing a broadcast.
Array reduce_to(const Array& grad, const Shape& target);

/// Expands `b` to the shape of `a` following the broadcast rules above.
Array broadcast_like(const Array& b, const Array& a);

}  // namespace flowad
