#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace meev {

// Random per-sample augmentation. Each family fires independently with its
// own probability; magnitudes are drawn uniformly from the ranges below.
struct AugmentConfig {
  double p_color = 0.5;
  double color_gain_lo = 0.8;
  double color_gain_hi = 1.2;
  double color_bias = 0.08;  // additive offset drawn from [-bias, bias]

  double p_affine = 0.5;
  double max_rotation_deg = 15.0;
  double scale_lo = 0.9;
  double scale_hi = 1.15;
  double max_translate_px = 10.0;

  double p_blur = 0.25;
  double blur_sigma_lo = 0.3;
  double blur_sigma_hi = 1.2;

  double p_dropout = 0.3;
  int dropout_max_rects = 2;
  double dropout_max_frac = 0.2;  // rect side as a fraction of the crop side

  void validate() const;
};

inline const std::vector<std::string>& loss_term_names() {
  static const std::vector<std::string> names = {
      "coord", "joints3d", "reproj2d", "theta", "beta", "trans"};
  return names;
}

struct TrainConfig {
  std::string stage = "pretrain";  // pretrain | finetune
  double lr = 1e-4;
  std::vector<int> decay_epochs = {10, 20};
  double decay_factor = 0.1;
  int total_epochs = 25;
  int batch_size = 32;
  std::map<std::string, double> loss_weights;  // term name -> weight
  AugmentConfig augment;
  std::uint64_t seed = 1;

  TrainConfig();

  void validate() const;

  // Stage recipes: pretraining starts at 1e-4 and decays after epochs 10
  // and 20, stopping at 25; fine-tuning runs at a flat 1e-5 for 20 epochs
  // with batches of 48.
  static TrainConfig pretrain_defaults();
  static TrainConfig finetune_defaults();
};

// Step schedule: lr times decay_factor for every configured decay epoch
// that has already passed.
double lr_at(const TrainConfig& cfg, int epoch);

// Plain "key = value" text, one pair per line, '#' comments. Every
// TrainConfig field is covered; see train_config_to_text for the key names.
std::string train_config_to_text(const TrainConfig& cfg);
TrainConfig parse_train_config_text(const std::string& text,
                                    const std::string& origin);
TrainConfig load_train_config(const std::string& path);
void save_train_config(const std::string& path, const TrainConfig& cfg);

// Applies one "key=value" override on top of a parsed config.
void apply_config_override(TrainConfig& cfg, const std::string& assignment);

}  // namespace meev
