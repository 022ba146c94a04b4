#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "core/image.hpp"
#include "core/tape.hpp"
#include "model/params.hpp"

namespace meev {

// Crop geometry every backbone must honour: 3x256x192 input, features at
// stride 16 and stride 32.
inline constexpr int kCropHeight = 256;
inline constexpr int kCropWidth = 192;
inline constexpr int kF1Height = 16;
inline constexpr int kF1Width = 12;
inline constexpr int kF0Height = 8;
inline constexpr int kF0Width = 6;

struct FeaturePair {
  ad::Var f1;  // [C, 16, 12]
  ad::Var f0;  // [C, 8, 6]
};

class Backbone {
 public:
  virtual ~Backbone() = default;
  virtual const std::string& name() const = 0;
  virtual int channels() const = 0;
  // creates this backbone's parameters in the store (idempotent)
  virtual void register_params(ParamStore& store) const = 0;
  virtual FeaturePair encode(ad::Tape& tape, ParamStore& store,
                             TapeBinding& binding, const Image& crop) const = 0;
};

using BackboneFactory =
    std::function<std::unique_ptr<Backbone>(int channels)>;

// duplicate names raise config_error
void register_backbone(const std::string& name, BackboneFactory factory);
// unknown names raise config_error
std::unique_ptr<Backbone> make_backbone(const std::string& name, int channels);
std::vector<std::string> backbone_names();

// normalizes to (v - 0.5) / 0.5 and places the crop on the tape as a
// constant; throws invalid_argument on wrong geometry
ad::Var crop_to_tape(ad::Tape& tape, const Image& crop);

// validates the advertised feature geometry, raising config_error so a
// misconfigured backbone fails loudly on its first encode
void check_feature_pair(const FeaturePair& features, int channels);

}  // namespace meev
