#include "model/params.hpp"

namespace meev {

namespace {

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace

void ParamStore::create_uniform(const std::string& name, ad::Shape shape,
                                double limit) {
  auto it = params_.find(name);
  if (it != params_.end()) {
    check(it->second.shape == shape, Status::config_error, "parameter ", name,
          " recreated with shape ", ad::shape_str(shape), ", stored ",
          ad::shape_str(it->second.shape));
    return;
  }
  Param p;
  p.shape = std::move(shape);
  // per-name stream so initialization does not depend on creation order
  Rng rng(Rng::mix(seed_, fnv1a64(name)));
  p.value.resize(static_cast<std::size_t>(ad::shape_numel(p.shape)));
  for (double& v : p.value) v = rng.uniform(-limit, limit);
  params_.emplace(name, std::move(p));
}

void ParamStore::create_constant(const std::string& name, ad::Shape shape,
                                 double value) {
  auto it = params_.find(name);
  if (it != params_.end()) {
    check(it->second.shape == shape, Status::config_error, "parameter ", name,
          " recreated with shape ", ad::shape_str(shape), ", stored ",
          ad::shape_str(it->second.shape));
    return;
  }
  Param p;
  p.shape = std::move(shape);
  p.value.assign(static_cast<std::size_t>(ad::shape_numel(p.shape)), value);
  params_.emplace(name, std::move(p));
}

ParamStore::Param& ParamStore::param(const std::string& name) {
  auto it = params_.find(name);
  check(it != params_.end(), Status::invalid_argument, "unknown parameter ",
        name);
  return it->second;
}

const ParamStore::Param& ParamStore::param(const std::string& name) const {
  auto it = params_.find(name);
  check(it != params_.end(), Status::invalid_argument, "unknown parameter ",
        name);
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::size_t ParamStore::total_size() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

ad::Var ParamStore::use(ad::Tape& tape, TapeBinding& binding,
                        const std::string& name) {
  auto bound = binding.vars.find(name);
  if (bound != binding.vars.end() && bound->second.tape() == &tape)
    return bound->second;
  Param& p = param(name);
  ad::Var v = tape.leaf(p.shape, p.value);
  binding.vars.insert_or_assign(name, v);
  return v;
}

}  // namespace meev
