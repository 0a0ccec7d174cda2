#include "flowad/array.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace flowad
{

std::string to_string(const Shape& shape)
{
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i)
  {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace
{

std::size_t extent_product(const Shape& shape)
{
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

enum class Broadcast { kSame, kRow, kColumn, kScalar };

Broadcast broadcast_kind(const Array& a, const Array& b, const char* op)
{
  if (a.same_shape(b)) return Broadcast::kSame;
  if (b.size() == 1) return Broadcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  if (b.cols() == 1 && b.rows() == a.rows()) return Broadcast::kColumn;
  throw ShapeError(std::string(op) + ": cannot broadcast " + to_string(b.shape()) + " onto " +
                   to_string(a.shape()));
}

template <typename F>
Array binary(const Array& a, const Array& b, const char* op, F f)
{
  const Broadcast kind = broadcast_kind(a, b, op);
  Array out(a.shape());
  const std::size_t rows = a.rows();
  const std::size_t cols = a.cols();
  for (std::size_t r = 0; r < rows; ++r)
  {
    for (std::size_t c = 0; c < cols; ++c)
    {
      const std::size_t i = r * cols + c;
      double bv = 0.0;
      switch (kind)
      {
        case Broadcast::kSame: bv = b[i]; break;
        case Broadcast::kRow: bv = b[c]; break;
        case Broadcast::kColumn: bv = b[r]; break;
        case Broadcast::kScalar: bv = b[0]; break;
      }
      out[i] = f(a[i], bv);
    }
  }
  return out;
}

template <typename F>
Array unary(const Array& a, F f)
{
  Array out(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i]);
  return out;
}

void require_matrix_product(const Array& a, const Array& b, std::size_t ak, std::size_t bk,
                            const char* op)
{
  if (ak != bk)
  {
    throw ShapeError(std::string(op) + ": inner extents differ, " + to_string(a.shape()) + " vs " +
                     to_string(b.shape()));
  }
}

}  // namespace

Array::Array(Shape shape, double fill) : shape_(std::move(shape)), data_(extent_product(shape_), fill) {}

Array::Array(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data))
{
  if (extent_product(shape_) != data_.size())
  {
    throw ShapeError("array: shape " + to_string(shape_) + " does not hold " +
                     std::to_string(data_.size()) + " values");
  }
}

Array Array::row(std::span<const double> values)
{
  return Array({1, values.size()}, std::vector<double>(values.begin(), values.end()));
}

Array Array::column(std::span<const double> values)
{
  return Array({values.size(), 1}, std::vector<double>(values.begin(), values.end()));
}

std::size_t Array::rows() const
{
  if (shape_.size() <= 1) return 1;
  return extent_product(Shape(shape_.begin(), shape_.end() - 1));
}

double Array::item() const
{
  if (data_.size() != 1) throw ShapeError("item: array of shape " + to_string(shape_) + " is not scalar");
  return data_[0];
}

void Array::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Array::all_finite() const
{
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Array matmul(const Array& a, const Array& b)
{
  require_matrix_product(a, b, a.cols(), b.rows(), "matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Array out = Array::zeros(n, m);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i)
  {
    double* orow = po + i * m;
    for (std::size_t p = 0; p < k; ++p)
    {
      const double av = pa[i * k + p];
      if (av == 0.0) continue;
      const double* brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Array matmul_tn(const Array& a, const Array& b)
{
  require_matrix_product(a, b, a.rows(), b.rows(), "matmul_tn");
  const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
  Array out = Array::zeros(n, m);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t p = 0; p < k; ++p)
  {
    const double* brow = pb + p * m;
    for (std::size_t i = 0; i < n; ++i)
    {
      const double av = pa[p * n + i];
      if (av == 0.0) continue;
      double* orow = po + i * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] += av * brow[j];
    }
  }
  return out;
}

Array matmul_nt(const Array& a, const Array& b)
{
  require_matrix_product(a, b, a.cols(), b.cols(), "matmul_nt");
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  Array out = Array::zeros(n, m);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  double* po = out.data().data();
  for (std::size_t i = 0; i < n; ++i)
  {
    const double* arow = pa + i * k;
    for (std::size_t j = 0; j < m; ++j)
    {
      const double* brow = pb + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      po[i * m + j] = acc;
    }
  }
  return out;
}

Array add(const Array& a, const Array& b)
{
  return binary(a, b, "add", [](double x, double y) { return x + y; });
}

Array sub(const Array& a, const Array& b)
{
  return binary(a, b, "sub", [](double x, double y) { return x - y; });
}

Array mul(const Array& a, const Array& b)
{
  return binary(a, b, "mul", [](double x, double y) { return x * y; });
}

Array scale(const Array& a, double c)
{
  return unary(a, [c](double x) { return x * c; });
}

Array add_scalar(const Array& a, double c)
{
  return unary(a, [c](double x) { return x + c; });
}

Array pow_scalar(const Array& a, double p)
{
  return unary(a, [p](double x) { return std::pow(x, p); });
}

Array tanh(const Array& a)
{
  return unary(a, [](double x) { return std::tanh(x); });
}

Array softplus(const Array& a)
{
  return unary(a, [](double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); });
}

Array sigmoid(const Array& a)
{
  return unary(a, [](double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
}

Array relu(const Array& a)
{
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; });
}

Array exp(const Array& a)
{
  return unary(a, [](double x) { return std::exp(x); });
}

Array log(const Array& a)
{
  return unary(a, [](double x) { return std::log(x); });
}

Array concat_cols(std::span<const Array> parts)
{
  if (parts.empty()) throw ShapeError("concat_cols: no operands");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const Array& p : parts)
  {
    if (p.rows() != rows)
    {
      throw ShapeError("concat_cols: row mismatch " + to_string(p.shape()) + " vs " +
                       to_string(parts.front().shape()));
    }
    cols += p.cols();
  }
  Array out = Array::zeros(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
  {
    double* dst = out.data().data() + r * cols;
    for (const Array& p : parts)
    {
      const auto src = p.row_span(r);
      std::copy(src.begin(), src.end(), dst);
      dst += src.size();
    }
  }
  return out;
}

Array concat_rows(std::span<const Array> parts)
{
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const Array& p : parts)
  {
    if (p.cols() != cols)
    {
      throw ShapeError("concat_rows: column mismatch " + to_string(p.shape()) + " vs " +
                       to_string(parts.front().shape()));
    }
    rows += p.rows();
  }
  Array out = Array::zeros(rows, cols);
  auto dst = out.data().begin();
  for (const Array& p : parts) dst = std::copy(p.data().begin(), p.data().end(), dst);
  return out;
}

Array slice_cols(const Array& a, std::size_t begin, std::size_t end)
{
  if (begin > end || end > a.cols())
  {
    throw ShapeError("slice_cols: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + to_string(a.shape()));
  }
  const std::size_t rows = a.rows();
  const std::size_t width = end - begin;
  Array out = Array::zeros(rows, width);
  for (std::size_t r = 0; r < rows; ++r)
  {
    const auto src = a.row_span(r);
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(begin),
              src.begin() + static_cast<std::ptrdiff_t>(end), out.data().begin() + static_cast<std::ptrdiff_t>(r * width));
  }
  return out;
}

Array slice_rows(const Array& a, std::size_t begin, std::size_t end)
{
  if (begin > end || end > a.rows())
  {
    throw ShapeError("slice_rows: range [" + std::to_string(begin) + "," + std::to_string(end) +
                     ") outside " + to_string(a.shape()));
  }
  const std::size_t cols = a.cols();
  std::vector<double> data(a.data().begin() + static_cast<std::ptrdiff_t>(begin * cols),
                           a.data().begin() + static_cast<std::ptrdiff_t>(end * cols));
  return Array({end - begin, cols}, std::move(data));
}

Array sum(const Array& a)
{
  double s = 0.0;
  for (double v : a.data()) s += v;
  return Array::scalar(s);
}

Array mean(const Array& a)
{
  if (a.size() == 0) throw ShapeError("mean: empty array");
  return Array::scalar(sum(a).item() / static_cast<double>(a.size()));
}

Array row_sum(const Array& a)
{
  const std::size_t rows = a.rows(), cols = a.cols();
  Array out = Array::zeros(rows, 1);
  for (std::size_t r = 0; r < rows; ++r)
  {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += a[r * cols + c];
    out[r] = s;
  }
  return out;
}

Array col_mean(const Array& a)
{
  const std::size_t rows = a.rows(), cols = a.cols();
  if (rows == 0) throw ShapeError("col_mean: no rows");
  Array out = Array::zeros(1, cols);
  for (std::size_t r = 0; r < rows; ++r)
  {
    for (std::size_t c = 0; c < cols; ++c) out[c] += a[r * cols + c];
  }
  for (std::size_t c = 0; c < cols; ++c) out[c] /= static_cast<double>(rows);
  return out;
}

Array reduce_to(const Array& grad, const Shape& target)
{
  if (grad.shape() == target) return grad;
  Array out(target);
  const std::size_t rows = grad.rows(), cols = grad.cols();
  if (out.size() == 1)
  {
    out[0] = sum(grad).item();
  }
  else if (out.rows() == 1 && out.cols() == cols)
  {
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) out[c] += grad[r * cols + c];
  }
  else if (out.cols() == 1 && out.rows() == rows)
  {
    out = row_sum(grad);
    out = Array(target, std::move(out.data()));
  }
  else
  {
    throw ShapeError("reduce_to: cannot reduce " + to_string(grad.shape()) + " to " + to_string(target));
  }
  return out;
}

Array broadcast_like(const Array& b, const Array& a)
{
  return binary(Array(a.shape()), b, "broadcast", [](double, double y) { return y; });
}

}  // namespace flowad
