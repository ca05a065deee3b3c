#include "manet/param.hpp"

#include <cmath>
#include <stdexcept>

namespace manet {

Tensor ParamRegistry::add(const std::string& name, std::vector<int> shape, Init init,
                          bool trainable, bool clamp_unit_interval) {
  if (index_.count(name)) {
    throw std::invalid_argument("parameter '" + name + "' registered twice");
  }
  Parameter p;
  p.name = name;
  p.shape = shape;
  p.trainable = trainable;
  p.clamp_unit_interval = clamp_unit_interval;
  if (!counting_only_) {
    std::vector<float> data(shape_numel(shape), 0.0f);
    switch (init) {
      case Init::kZeros:
        break;
      case Init::kOnes:
        for (auto& v : data) v = 1.0f;
        break;
      case Init::kHalf:
        for (auto& v : data) v = 0.5f;
        break;
      case Init::kTruncNormal02:
        for (auto& v : data) v = static_cast<float>(rng_.trunc_normal(0.02));
        break;
      case Init::kHeConv:
      case Init::kHeLinear:
      case Init::kHeDeconv: {
        size_t fan_in = 1;
        if (init == Init::kHeConv) {
          if (shape.size() != 4) throw std::invalid_argument("kHeConv expects a 4-d kernel");
          fan_in = static_cast<size_t>(shape[1]) * shape[2] * shape[3];
        } else if (init == Init::kHeDeconv) {
          if (shape.size() != 4) throw std::invalid_argument("kHeDeconv expects a 4-d kernel");
          fan_in = static_cast<size_t>(shape[0]);
        } else {
          if (shape.size() != 2) throw std::invalid_argument("kHeLinear expects a matrix");
          fan_in = static_cast<size_t>(shape[0]);
        }
        double std = std::sqrt(2.0 / static_cast<double>(fan_in));
        for (auto& v : data) v = static_cast<float>(rng_.trunc_normal(std));
        break;
      }
    }
    p.tensor = Tensor(std::move(shape), std::move(data), trainable);
  }
  index_[name] = params_.size();
  params_.push_back(std::move(p));
  return params_.back().tensor;
}

const Parameter* ParamRegistry::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

Parameter* ParamRegistry::find(const std::string& name) {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : &params_[it->second];
}

size_t ParamRegistry::count_all() const {
  size_t n = 0;
  for (const auto& p : params_) n += p.numel();
  return n;
}

size_t ParamRegistry::count_trainable(bool trainable) const {
  size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable == trainable) n += p.numel();
  }
  return n;
}

size_t ParamRegistry::count_prefix(const std::string& prefix) const {
  size_t n = 0;
  for (const auto& p : params_) {
    if (p.name.rfind(prefix, 0) == 0) n += p.numel();
  }
  return n;
}

size_t ParamRegistry::count_prefix_trainable(const std::string& prefix, bool trainable) const {
  size_t n = 0;
  for (const auto& p : params_) {
    if (p.trainable == trainable && p.name.rfind(prefix, 0) == 0) n += p.numel();
  }
  return n;
}

std::vector<std::string> ParamRegistry::names(bool trainable) const {
  std::vector<std::string> out;
  for (const auto& p : params_) {
    if (p.trainable == trainable) out.push_back(p.name);
  }
  return out;
}

}  // namespace manet
