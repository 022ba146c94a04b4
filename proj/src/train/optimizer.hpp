#pragma once

#include <map>
#include <string>
#include <vector>

#include "core/archive.hpp"
#include "model/params.hpp"

namespace meev {

// Adam with bias correction. Moment buffers are keyed by parameter name so
// the state survives checkpointing independently of creation order.
class Adam {
 public:
  struct Hyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam() = default;
  explicit Adam(Hyper hyper) : hyper_(hyper) {}

  // Applies one update from the gradients the last backward() left on the
  // bound vars. Parameters absent from the binding are left untouched.
  void step(ParamStore& store, const TapeBinding& binding, double lr);

  std::int64_t steps_taken() const { return t_; }
  const Hyper& hyper() const { return hyper_; }

  // State rides inside a checkpoint archive under adam/ keys.
  void save_state(Archive& archive) const;
  void load_state(const Archive& archive);

 private:
  struct Moments {
    std::vector<double> m;
    std::vector<double> v;
  };

  Hyper hyper_;
  std::int64_t t_ = 0;
  std::map<std::string, Moments> moments_;
};

}  // namespace meev
