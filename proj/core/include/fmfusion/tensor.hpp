#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fmf {

using Shape = std::vector<std::size_t>;

/// Raised when operand extents are incompatible with an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until a gradient is accumulated
  bool requires_grad = false;
  std::uint64_t producer = 0;  // id of the tape that recorded this tensor, 0 for leaves
};

}  // namespace detail

/// Dense row-major array of doubles with optional participation in a Tape.
///
/// Tensor is a handle: copies share storage. This is how shared-stage filters
/// alias a single parameter tensor across both encoder branches. Use clone()
/// for an independent copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), 0.0); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), 1.0); }
  static Tensor full(Shape shape, double value) { return Tensor(std::move(shape), value); }
  static Tensor scalar(double value) { return Tensor(Shape{}, value); }

  bool defined() const noexcept { return impl_ != nullptr; }
  explicit operator bool() const noexcept { return defined(); }

  const Shape& shape() const { return impl().shape; }
  std::size_t rank() const { return impl().shape.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return impl().data.size(); }

  std::span<const double> data() const { return impl().data; }
  std::span<double> data() { return impl().data; }
  double item() const;
  double operator[](std::size_t i) const { return impl().data[i]; }

  /// Element access for rank-4 maps.
  double at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const;

  bool requires_grad() const { return impl().requires_grad; }
  Tensor& set_requires_grad(bool on = true);

  bool has_grad() const { return !impl().grad.empty(); }
  std::span<const double> grad() const { return impl().grad; }
  /// Gradient buffer, allocated as zeros on first use. Callable on const
  /// handles: accumulating a gradient does not change the values.
  std::span<double> mutable_grad() const;
  void zero_grad();

  /// Deep copy, detached from any tape, requires_grad cleared.
  Tensor clone() const;
  /// Same values reshaped; shares nothing.
  Tensor reshaped(Shape shape) const;

  bool shares_storage_with(const Tensor& other) const noexcept { return impl_ == other.impl_; }

  const detail::TensorImpl& impl() const;
  detail::TensorImpl& impl();
  const std::shared_ptr<detail::TensorImpl>& handle() const noexcept { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

/// True when both tensors have equal shapes and bit-identical values.
bool bit_equal(const Tensor& a, const Tensor& b);

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace fmf
