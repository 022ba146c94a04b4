#include "train/optimizer.hpp"

#include <cmath>

namespace meev {

void Adam::step(ParamStore& store, const TapeBinding& binding, double lr) {
  check_arg(lr > 0.0 && std::isfinite(lr), "Adam: bad learning rate ", lr);
  ++t_;
  double bc1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));

  for (const auto& [name, var] : binding.vars) {
    const std::vector<double>& grad = var.grad();
    ParamStore::Param& param = store.param(name);
    check(grad.size() == param.value.size(), Status::runtime_error,
          concat("Adam: gradient size mismatch for ", name));

    Moments& mo = moments_[name];
    if (mo.m.empty()) {
      mo.m.assign(param.value.size(), 0.0);
      mo.v.assign(param.value.size(), 0.0);
    }
    for (std::size_t i = 0; i < param.value.size(); ++i) {
      double g = grad[i];
      check(std::isfinite(g), Status::runtime_error,
            concat("Adam: non-finite gradient in ", name));
      mo.m[i] = hyper_.beta1 * mo.m[i] + (1.0 - hyper_.beta1) * g;
      mo.v[i] = hyper_.beta2 * mo.v[i] + (1.0 - hyper_.beta2) * g * g;
      double mhat = mo.m[i] / bc1;
      double vhat = mo.v[i] / bc2;
      param.value[i] -= lr * mhat / (std::sqrt(vhat) + hyper_.eps);
    }
  }
}

void Adam::save_state(Archive& archive) const {
  archive.put_i64("adam/t", {1}, {t_});
  archive.put_f64("adam/hyper", {3},
                  {hyper_.beta1, hyper_.beta2, hyper_.eps});
  for (const auto& [name, mo] : moments_) {
    archive.put_f64("adam/m/" + name, {mo.m.size()}, mo.m);
    archive.put_f64("adam/v/" + name, {mo.v.size()}, mo.v);
  }
}

void Adam::load_state(const Archive& archive) {
  t_ = archive.i64("adam/t").at(0);
  std::vector<double> hy = archive.f64("adam/hyper");
  check(hy.size() == 3, Status::data_error, "Adam: bad hyper record");
  hyper_.beta1 = hy[0];
  hyper_.beta2 = hy[1];
  hyper_.eps = hy[2];

  moments_.clear();
  for (const std::string& name : archive.names()) {
    if (name.rfind("adam/m/", 0) != 0) continue;
    std::string param = name.substr(7);
    Moments mo;
    mo.m = archive.f64(name);
    mo.v = archive.f64("adam/v/" + param);
    check(mo.m.size() == mo.v.size(), Status::data_error,
          concat("Adam: moment size mismatch for ", param));
    moments_[param] = std::move(mo);
  }
}

}  // namespace meev
