#pragma once

#include <map>
#include <string>
#include <vector>

#include "transms/tensor.hpp"

namespace transms {

/// Ordered collection of named tensors (weights, gradients, buffers).
class ParameterSet {
 public:
  Tensor& add(const std::string& name, Tensor value);

  bool contains(const std::string& name) const { return index_.count(name) != 0; }
  /// Position of `name`; throws for unknown names.
  std::size_t index(const std::string& name) const;
  Tensor& operator[](const std::string& name);
  const Tensor& operator[](const std::string& name) const;

  std::size_t size() const { return values_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }
  const std::vector<std::string>& names() const { return names_; }

  /// Total number of scalars.
  Index count() const;
  /// Same names and shapes, all zeros.
  ParameterSet zeros_like() const;
  bool all_finite() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::map<std::string, std::size_t> index_;
};

}  // namespace transms
