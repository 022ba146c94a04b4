#include "model/encoder.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace meev {

ad::Var crop_to_tape(ad::Tape& tape, const Image& crop) {
  check_arg(crop.channels == 3 && crop.height == kCropHeight &&
                crop.width == kCropWidth,
            "encoder input must be 3x", kCropHeight, "x", kCropWidth, ", got ",
            crop.channels, "x", crop.height, "x", crop.width);
  std::vector<double> data(crop.data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    data[i] = (crop.data[i] - 0.5) / 0.5;
  return tape.constant({3, kCropHeight, kCropWidth}, std::move(data));
}

void check_feature_pair(const FeaturePair& features, int channels) {
  check(features.f1.shape() == ad::Shape{channels, kF1Height, kF1Width},
        Status::config_error, "backbone stride-16 features must be [",
        channels, ",", kF1Height, ",", kF1Width, "], got ",
        ad::shape_str(features.f1.shape()));
  check(features.f0.shape() == ad::Shape{channels, kF0Height, kF0Width},
        Status::config_error, "backbone stride-32 features must be [",
        channels, ",", kF0Height, ",", kF0Width, "], got ",
        ad::shape_str(features.f0.shape()));
}

namespace {

double conv_limit(int cin, int kh, int kw) {
  return std::sqrt(6.0 / (cin * kh * kw));
}

// five stride-2 3x3 convolutions; taps after the fourth (stride 16) and
// fifth (stride 32)
class ToyBackbone final : public Backbone {
 public:
  explicit ToyBackbone(int channels) : channels_(channels) {
    check_arg(channels >= 1, "toy backbone needs at least one channel");
    stages_ = {3, 8, 16, 16, channels_, channels_};
  }

  const std::string& name() const override {
    static const std::string n = "toy";
    return n;
  }
  int channels() const override { return channels_; }

  void register_params(ParamStore& store) const override {
    for (int s = 0; s + 1 < static_cast<int>(stages_.size()); ++s) {
      int cin = stages_[s], cout = stages_[s + 1];
      store.create_uniform(layer_name(s) + ".weight", {cout, cin, 3, 3},
                           conv_limit(cin, 3, 3));
      store.create_constant(layer_name(s) + ".bias", {cout}, 0.0);
    }
  }

  FeaturePair encode(ad::Tape& tape, ParamStore& store, TapeBinding& binding,
                     const Image& crop) const override {
    ad::Var x = crop_to_tape(tape, crop);
    FeaturePair out{ad::Var(), ad::Var()};
    for (int s = 0; s + 1 < static_cast<int>(stages_.size()); ++s) {
      ad::Var w = store.use(tape, binding, layer_name(s) + ".weight");
      ad::Var b = store.use(tape, binding, layer_name(s) + ".bias");
      x = tape.relu(tape.conv2d(x, w, b, 2, 1));
      if (s == 3) out.f1 = x;
    }
    out.f0 = x;
    return out;
  }

 private:
  std::string layer_name(int s) const {
    return concat("encoder.toy.conv", s + 1);
  }

  int channels_;
  std::vector<int> stages_;
};

// parameter-light geometry stub: average pooling to each tap resolution
// followed by a 1x1 projection, handy for exercising wide channel counts
class PoolProjBackbone final : public Backbone {
 public:
  explicit PoolProjBackbone(int channels) : channels_(channels) {
    check_arg(channels >= 1, "pool-proj backbone needs at least one channel");
  }

  const std::string& name() const override {
    static const std::string n = "pool-proj";
    return n;
  }
  int channels() const override { return channels_; }

  void register_params(ParamStore& store) const override {
    store.create_uniform("encoder.pool_proj.f1.weight", {channels_, 3, 1, 1},
                         conv_limit(3, 1, 1));
    store.create_constant("encoder.pool_proj.f1.bias", {channels_}, 0.0);
    store.create_uniform("encoder.pool_proj.f0.weight",
                         {channels_, channels_, 1, 1},
                         conv_limit(channels_, 1, 1));
    store.create_constant("encoder.pool_proj.f0.bias", {channels_}, 0.0);
  }

  FeaturePair encode(ad::Tape& tape, ParamStore& store, TapeBinding& binding,
                     const Image& crop) const override {
    ad::Var x = crop_to_tape(tape, crop);
    for (int i = 0; i < 4; ++i) x = tape.avgpool2x2(x);  // 3x16x12
    FeaturePair out{ad::Var(), ad::Var()};
    out.f1 = tape.relu(tape.conv2d(
        x, store.use(tape, binding, "encoder.pool_proj.f1.weight"),
        store.use(tape, binding, "encoder.pool_proj.f1.bias"), 1, 0));
    out.f0 = tape.relu(tape.conv2d(
        tape.avgpool2x2(out.f1),
        store.use(tape, binding, "encoder.pool_proj.f0.weight"),
        store.use(tape, binding, "encoder.pool_proj.f0.bias"), 1, 0));
    return out;
  }

 private:
  int channels_;
};

struct Registry {
  std::mutex mutex;
  std::map<std::string, BackboneFactory> factories;
};

Registry& registry() {
  static Registry r;
  return r;
}

void register_locked(Registry& r, const std::string& name,
                     BackboneFactory factory) {
  check(r.factories.emplace(name, std::move(factory)).second,
        Status::config_error, "backbone '", name, "' already registered");
}

void ensure_builtins(Registry& r) {
  if (!r.factories.empty()) return;
  register_locked(r, "toy", [](int channels) {
    return std::make_unique<ToyBackbone>(channels);
  });
  register_locked(r, "pool-proj", [](int channels) {
    return std::make_unique<PoolProjBackbone>(channels);
  });
}

}  // namespace

void register_backbone(const std::string& name, BackboneFactory factory) {
  Registry& r = registry();
  std::lock_guard<std::mutex> lock(r.mutex);
  ensure_builtins(r);
  register_locked(r, name, std::move(factory));
}

std::unique_ptr<Backbone> make_backbone(const std::string& name,
                                        int channels) {
  Registry& r = registry();
  std::lock_guard<std::mutex> lock(r.mutex);
  ensure_builtins(r);
  auto it = r.factories.find(name);
  check(it != r.factories.end(), Status::config_error, "unknown backbone '",
        name, "'");
  return it->second(channels);
}

std::vector<std::string> backbone_names() {
  Registry& r = registry();
  std::lock_guard<std::mutex> lock(r.mutex);
  ensure_builtins(r);
  std::vector<std::string> out;
  for (const auto& [name, _] : r.factories) out.push_back(name);
  return out;
}

}  // namespace meev
