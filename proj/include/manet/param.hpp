#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "manet/rng.hpp"
#include "manet/tensor.hpp"

namespace manet {

// kHe* scale by fan-in (sqrt(2/fan_in) truncated normal) so deep conv stacks
// keep unit signal variance; the fan-in dimension depends on the weight
// layout: conv [out,in,kh,kw], linear [in,out], deconv [in,out,u,u].
enum class Init { kZeros, kOnes, kHalf, kTruncNormal02, kHeConv, kHeLinear, kHeDeconv };

struct Parameter {
  std::string name;
  std::vector<int> shape;
  Tensor tensor;  // undefined in counting mode
  bool trainable = false;
  bool clamp_unit_interval = false;  // convex mixing weights project back to [0,1]

  size_t numel() const { return shape_numel(shape); }
};

// Owns every learned tensor of a model. In counting mode, registration records
// names and shapes only (no allocation), so full-scale parameter audits are
// instant; both modes run through the exact same registration call sites.
class ParamRegistry {
 public:
  explicit ParamRegistry(uint64_t seed, bool counting_only = false)
      : rng_(seed), counting_only_(counting_only) {}

  ParamRegistry(const ParamRegistry&) = delete;
  ParamRegistry& operator=(const ParamRegistry&) = delete;

  // Registers a parameter; duplicate names throw. Returns the tensor handle
  // (undefined when counting).
  Tensor add(const std::string& name, std::vector<int> shape, Init init, bool trainable,
             bool clamp_unit_interval = false);

  bool counting_only() const { return counting_only_; }
  size_t size() const { return params_.size(); }
  Parameter& at(size_t i) { return params_[i]; }
  const Parameter& at(size_t i) const { return params_[i]; }
  std::vector<Parameter>& params() { return params_; }
  const std::vector<Parameter>& params() const { return params_; }

  const Parameter* find(const std::string& name) const;
  Parameter* find(const std::string& name);

  // Element totals.
  size_t count_all() const;
  size_t count_trainable(bool trainable) const;
  size_t count_prefix(const std::string& prefix) const;
  size_t count_prefix_trainable(const std::string& prefix, bool trainable) const;

  std::vector<std::string> names(bool trainable) const;

 private:
  RandomSource rng_;
  bool counting_only_;
  std::vector<Parameter> params_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace manet
