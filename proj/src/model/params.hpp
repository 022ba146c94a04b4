#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "core/common.hpp"
#include "core/tape.hpp"

namespace meev {

// Vars a ParamStore bound onto one tape, keyed by parameter name. The
// optimizer walks this map after backward() to pair values with gradients.
struct TapeBinding {
  std::map<std::string, ad::Var> vars;
};

// Owns the persistent values of every trainable parameter. Modules create
// parameters once (idempotently) and bind them to a fresh tape per step.
class ParamStore {
 public:
  struct Param {
    ad::Shape shape;
    std::vector<double> value;
  };

  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

  // uniform(-limit, limit) fill on first creation; later calls must agree
  // on the shape and keep the stored value
  void create_uniform(const std::string& name, ad::Shape shape, double limit);
  void create_constant(const std::string& name, ad::Shape shape, double value);

  bool contains(const std::string& name) const {
    return params_.count(name) > 0;
  }
  Param& param(const std::string& name);
  const Param& param(const std::string& name) const;
  std::vector<std::string> names() const;
  std::size_t total_size() const;

  ad::Var use(ad::Tape& tape, TapeBinding& binding, const std::string& name);

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::map<std::string, Param> params_;
};

}  // namespace meev
