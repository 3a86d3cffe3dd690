#include "transms/parameters.hpp"

namespace transms {

Tensor& ParameterSet::add(const std::string& name, Tensor value) {
  if (contains(name)) throw Error("duplicate parameter name " + name);
  index_[name] = values_.size();
  names_.push_back(name);
  values_.push_back(std::move(value));
  return values_.back();
}

std::size_t ParameterSet::index(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter " + name);
  return it->second;
}

Tensor& ParameterSet::operator[](const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter " + name);
  return values_[it->second];
}

const Tensor& ParameterSet::operator[](const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw Error("unknown parameter " + name);
  return values_[it->second];
}

Index ParameterSet::count() const {
  Index n = 0;
  for (const Tensor& t : values_) n += t.size();
  return n;
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet out;
  for (std::size_t i = 0; i < size(); ++i) out.add(names_[i], Tensor::zeros(values_[i].shape()));
  return out;
}

bool ParameterSet::all_finite() const {
  for (const Tensor& t : values_)
    if (!t.all_finite()) return false;
  return true;
}

}  // namespace transms
