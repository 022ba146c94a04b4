#include "train/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "core/common.hpp"

namespace meev {

void AugmentConfig::validate() const {
  auto prob = [](double p, const char* name) {
    check(p >= 0.0 && p <= 1.0, Status::config_error,
          concat("augment: ", name, " must be in [0,1], got ", p));
  };
  prob(p_color, "p_color");
  prob(p_affine, "p_affine");
  prob(p_blur, "p_blur");
  prob(p_dropout, "p_dropout");
  check(color_gain_lo > 0.0 && color_gain_hi >= color_gain_lo,
        Status::config_error, "augment: bad color gain range");
  check(color_bias >= 0.0, Status::config_error,
        "augment: color_bias must be nonnegative");
  check(scale_lo > 0.0 && scale_hi >= scale_lo, Status::config_error,
        concat("augment: affine scale range must be positive, got [", scale_lo,
               ", ", scale_hi, "]"));
  check(max_rotation_deg >= 0.0 && max_translate_px >= 0.0,
        Status::config_error, "augment: negative affine magnitude");
  check(blur_sigma_lo > 0.0 && blur_sigma_hi >= blur_sigma_lo,
        Status::config_error, "augment: bad blur sigma range");
  check(dropout_max_rects >= 1, Status::config_error,
        "augment: dropout_max_rects must be >= 1");
  check(dropout_max_frac > 0.0 && dropout_max_frac <= 1.0,
        Status::config_error, "augment: dropout_max_frac must be in (0,1]");
}

TrainConfig::TrainConfig() {
  for (const std::string& name : loss_term_names()) loss_weights[name] = 1.0;
}

void TrainConfig::validate() const {
  check(stage == "pretrain" || stage == "finetune", Status::config_error,
        concat("stage must be pretrain or finetune, got ", stage));
  check(lr > 0.0 && std::isfinite(lr), Status::config_error,
        concat("lr must be positive, got ", lr));
  check(decay_factor > 0.0, Status::config_error,
        concat("decay_factor must be positive, got ", decay_factor));
  check(total_epochs >= 1, Status::config_error,
        concat("total_epochs must be >= 1, got ", total_epochs));
  check(batch_size >= 1, Status::config_error,
        concat("batch_size must be >= 1, got ", batch_size));
  for (int e : decay_epochs) {
    check(e >= 0, Status::config_error,
          concat("decay epoch must be nonnegative, got ", e));
  }
  for (const auto& [name, weight] : loss_weights) {
    bool known = std::find(loss_term_names().begin(), loss_term_names().end(),
                           name) != loss_term_names().end();
    check(known, Status::config_error, concat("unknown loss term: ", name));
    check(weight >= 0.0 && std::isfinite(weight), Status::config_error,
          concat("loss weight ", name, " must be >= 0, got ", weight));
  }
  augment.validate();
}

TrainConfig TrainConfig::pretrain_defaults() {
  TrainConfig cfg;
  cfg.stage = "pretrain";
  cfg.lr = 1e-4;
  cfg.decay_epochs = {10, 20};
  cfg.decay_factor = 0.1;
  cfg.total_epochs = 25;
  cfg.batch_size = 32;
  return cfg;
}

TrainConfig TrainConfig::finetune_defaults() {
  TrainConfig cfg;
  cfg.stage = "finetune";
  cfg.lr = 1e-5;
  cfg.decay_epochs = {};
  cfg.decay_factor = 0.1;
  cfg.total_epochs = 20;
  cfg.batch_size = 48;
  return cfg;
}

double lr_at(const TrainConfig& cfg, int epoch) {
  check_arg(epoch >= 0 && epoch < cfg.total_epochs, "epoch ", epoch,
            " out of range [0, ", cfg.total_epochs, ")");
  int decays = 0;
  for (int e : cfg.decay_epochs) {
    if (e <= epoch) ++decays;
  }
  return cfg.lr * std::pow(cfg.decay_factor, decays);
}

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    double v = std::stod(value, &pos);
    check(pos == value.size(), Status::config_error, "");
    return v;
  } catch (...) {
    fail(Status::config_error, concat(key, ": not a number: ", value));
  }
}

int parse_int(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    int v = std::stoi(value, &pos);
    check(pos == value.size(), Status::config_error, "");
    return v;
  } catch (...) {
    fail(Status::config_error, concat(key, ": not an integer: ", value));
  }
}

std::vector<int> parse_int_list(const std::string& key,
                                const std::string& value) {
  std::vector<int> out;
  if (trim(value).empty() || trim(value) == "none") return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(parse_int(key, trim(item)));
  }
  return out;
}

std::string int_list_to_string(const std::vector<int>& v) {
  if (v.empty()) return "none";
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string double_to_string(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

void set_field(TrainConfig& cfg, const std::string& key,
               const std::string& value) {
  AugmentConfig& a = cfg.augment;
  if (key == "stage") {
    cfg.stage = value;
  } else if (key == "lr") {
    cfg.lr = parse_double(key, value);
  } else if (key == "decay_epochs") {
    cfg.decay_epochs = parse_int_list(key, value);
  } else if (key == "decay_factor") {
    cfg.decay_factor = parse_double(key, value);
  } else if (key == "total_epochs") {
    cfg.total_epochs = parse_int(key, value);
  } else if (key == "batch_size") {
    cfg.batch_size = parse_int(key, value);
  } else if (key == "seed") {
    try {
      cfg.seed = std::stoull(value);
    } catch (...) {
      fail(Status::config_error, concat("seed: not an integer: ", value));
    }
  } else if (key.rfind("loss.", 0) == 0) {
    cfg.loss_weights[key.substr(5)] = parse_double(key, value);
  } else if (key == "augment.p_color") {
    a.p_color = parse_double(key, value);
  } else if (key == "augment.color_gain_lo") {
    a.color_gain_lo = parse_double(key, value);
  } else if (key == "augment.color_gain_hi") {
    a.color_gain_hi = parse_double(key, value);
  } else if (key == "augment.color_bias") {
    a.color_bias = parse_double(key, value);
  } else if (key == "augment.p_affine") {
    a.p_affine = parse_double(key, value);
  } else if (key == "augment.max_rotation_deg") {
    a.max_rotation_deg = parse_double(key, value);
  } else if (key == "augment.scale_lo") {
    a.scale_lo = parse_double(key, value);
  } else if (key == "augment.scale_hi") {
    a.scale_hi = parse_double(key, value);
  } else if (key == "augment.max_translate_px") {
    a.max_translate_px = parse_double(key, value);
  } else if (key == "augment.p_blur") {
    a.p_blur = parse_double(key, value);
  } else if (key == "augment.blur_sigma_lo") {
    a.blur_sigma_lo = parse_double(key, value);
  } else if (key == "augment.blur_sigma_hi") {
    a.blur_sigma_hi = parse_double(key, value);
  } else if (key == "augment.p_dropout") {
    a.p_dropout = parse_double(key, value);
  } else if (key == "augment.dropout_max_rects") {
    a.dropout_max_rects = parse_int(key, value);
  } else if (key == "augment.dropout_max_frac") {
    a.dropout_max_frac = parse_double(key, value);
  } else {
    fail(Status::config_error, concat("unknown config key: ", key));
  }
}

}  // namespace

TrainConfig parse_train_config_text(const std::string& text,
                                    const std::string& origin) {
  std::istringstream in(text);

  TrainConfig cfg;
  bool stage_set = false;
  std::string line;
  int line_no = 0;
  std::vector<std::pair<std::string, std::string>> pairs;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::size_t eq = t.find('=');
    check(eq != std::string::npos, Status::config_error,
          concat(origin, " line ", line_no, ": expected key = value"));
    std::string key = trim(t.substr(0, eq));
    std::string value = trim(t.substr(eq + 1));
    if (key == "stage") stage_set = true;
    pairs.emplace_back(key, value);
  }

  // stage first so its defaults apply before explicit keys override them
  for (const auto& [key, value] : pairs) {
    if (key == "stage") {
      check(value == "pretrain" || value == "finetune", Status::config_error,
            concat("stage must be pretrain or finetune, got ", value));
      cfg = value == "pretrain" ? TrainConfig::pretrain_defaults()
                                : TrainConfig::finetune_defaults();
    }
  }
  check(stage_set, Status::config_error,
        concat(origin, ": config must set stage"));
  for (const auto& [key, value] : pairs) {
    if (key != "stage") set_field(cfg, key, value);
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  check(bool(in), Status::config_error, concat("cannot open config: ", path));
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_train_config_text(buffer.str(), path);
}

std::string train_config_to_text(const TrainConfig& cfg) {
  cfg.validate();
  std::ostringstream os;
  os << "stage = " << cfg.stage << "\n";
  os << "lr = " << double_to_string(cfg.lr) << "\n";
  os << "decay_epochs = " << int_list_to_string(cfg.decay_epochs) << "\n";
  os << "decay_factor = " << double_to_string(cfg.decay_factor) << "\n";
  os << "total_epochs = " << cfg.total_epochs << "\n";
  os << "batch_size = " << cfg.batch_size << "\n";
  os << "seed = " << cfg.seed << "\n";
  for (const auto& [name, weight] : cfg.loss_weights) {
    os << "loss." << name << " = " << double_to_string(weight) << "\n";
  }
  const AugmentConfig& a = cfg.augment;
  os << "augment.p_color = " << double_to_string(a.p_color) << "\n";
  os << "augment.color_gain_lo = " << double_to_string(a.color_gain_lo)
     << "\n";
  os << "augment.color_gain_hi = " << double_to_string(a.color_gain_hi)
     << "\n";
  os << "augment.color_bias = " << double_to_string(a.color_bias) << "\n";
  os << "augment.p_affine = " << double_to_string(a.p_affine) << "\n";
  os << "augment.max_rotation_deg = " << double_to_string(a.max_rotation_deg)
     << "\n";
  os << "augment.scale_lo = " << double_to_string(a.scale_lo) << "\n";
  os << "augment.scale_hi = " << double_to_string(a.scale_hi) << "\n";
  os << "augment.max_translate_px = " << double_to_string(a.max_translate_px)
     << "\n";
  os << "augment.p_blur = " << double_to_string(a.p_blur) << "\n";
  os << "augment.blur_sigma_lo = " << double_to_string(a.blur_sigma_lo)
     << "\n";
  os << "augment.blur_sigma_hi = " << double_to_string(a.blur_sigma_hi)
     << "\n";
  os << "augment.p_dropout = " << double_to_string(a.p_dropout) << "\n";
  os << "augment.dropout_max_rects = " << a.dropout_max_rects << "\n";
  os << "augment.dropout_max_frac = " << double_to_string(a.dropout_max_frac)
     << "\n";
  return os.str();
}

void save_train_config(const std::string& path, const TrainConfig& cfg) {
  std::string text = train_config_to_text(cfg);
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    check(bool(out), Status::config_error,
          concat("cannot write config: ", tmp));
    out << text;
    check(bool(out), Status::config_error, concat("write failed: ", tmp));
  }
  check(std::rename(tmp.c_str(), path.c_str()) == 0, Status::config_error,
        concat("cannot move ", tmp, " to ", path));
}

void apply_config_override(TrainConfig& cfg, const std::string& assignment) {
  std::size_t eq = assignment.find('=');
  check(eq != std::string::npos, Status::config_error,
        concat("override must look like key=value, got ", assignment));
  std::string key = trim(assignment.substr(0, eq));
  std::string value = trim(assignment.substr(eq + 1));
  check(key != "stage", Status::config_error,
        "stage cannot be overridden; pick the matching command instead");
  set_field(cfg, key, value);
}

}  // namespace meev
