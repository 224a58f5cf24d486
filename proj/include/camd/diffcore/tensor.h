#pragma once

#include <algorithm>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "camd/common/error.h"

namespace camd::diff {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major array with an optional gradient accumulator.
//
// Tensor is a handle: copies share the same storage. Views created with
// reshape() share both values and gradient, so reshaping never needs a tape
// entry. Use clone() for an independent copy.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;

  explicit Tensor(Shape shape, bool requires_grad = false)
      : storage_(std::make_shared<Storage>()), shape_(std::move(shape)) {
    storage_->data.assign(shape_numel(shape_), T(0));
    set_requires_grad(requires_grad);
  }

  Tensor(Shape shape, std::vector<T> values, bool requires_grad = false)
      : storage_(std::make_shared<Storage>()), shape_(std::move(shape)) {
    if (values.size() != shape_numel(shape_)) {
      throw DimensionError("tensor: " + std::to_string(values.size()) +
                           " values do not fill shape " + shape_str(shape_));
    }
    storage_->data = std::move(values);
    set_requires_grad(requires_grad);
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return Tensor(std::move(shape), requires_grad);
  }

  static Tensor full(Shape shape, T value, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    std::fill(t.storage_->data.begin(), t.storage_->data.end(), value);
    return t;
  }

  static Tensor scalar(T value, bool requires_grad = false) {
    return Tensor(Shape{1}, std::vector<T>{value}, requires_grad);
  }

  bool defined() const { return storage_ != nullptr; }
  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return storage_ ? storage_->data.size() : 0; }

  std::span<T> data() { return storage_->data; }
  std::span<const T> data() const { return storage_->data; }
  T* ptr() { return storage_->data.data(); }
  const T* ptr() const { return storage_->data.data(); }

  T item() const {
    if (numel() != 1) throw ContractError("item: tensor of shape " + shape_str(shape_) + " is not a scalar");
    return storage_->data[0];
  }

  bool requires_grad() const { return storage_ && storage_->requires_grad; }

  // Enabling allocates a zeroed gradient; disabling releases it.
  void set_requires_grad(bool flag) {
    storage_->requires_grad = flag;
    if (flag) {
      storage_->grad.assign(storage_->data.size(), T(0));
    } else {
      storage_->grad.clear();
      storage_->grad.shrink_to_fit();
    }
  }

  // The gradient is an accumulator shared by every handle, so adjoints can
  // write through a const reference to an op's input.
  std::span<T> grad() const { return storage_->grad; }
  T* grad_ptr() const { return storage_->grad.data(); }

  void zero_grad() const { std::fill(storage_->grad.begin(), storage_->grad.end(), T(0)); }

  // View with a new shape over the same storage.
  Tensor reshape(Shape new_shape) const {
    if (shape_numel(new_shape) != numel()) {
      throw DimensionError("reshape: cannot view " + shape_str(shape_) + " as " + shape_str(new_shape));
    }
    Tensor view = *this;
    view.shape_ = std::move(new_shape);
    return view;
  }

  // Deep copy of the values; the copy does not require grad.
  Tensor clone() const { return Tensor(shape_, storage_->data); }

  bool shares_storage(const Tensor& other) const { return storage_ == other.storage_; }

 private:
  struct Storage {
    std::vector<T> data;
    std::vector<T> grad;
    bool requires_grad = false;
  };

  std::shared_ptr<Storage> storage_;
  Shape shape_;
};

}  // namespace camd::diff
