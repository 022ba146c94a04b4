#include <cmath>
#include <filesystem>

#include "body/body_model.hpp"
#include "core/common.hpp"
#include "data/synthetic.hpp"
#include "doctest.h"
#include "eval/evaluate.hpp"
#include "train/trainer.hpp"
#include "test_helpers.hpp"

using namespace meev;

namespace {

PipelineConfig tiny_config() {
  PipelineConfig cfg;
  cfg.backbone = "toy";
  cfg.channels = 4;
  cfg.fused_channels = 4;
  cfg.depth = 4;
  cfg.hidden = 16;
  cfg.seed = 71;
  return cfg;
}

TrainConfig tiny_train_config(int epochs) {
  TrainConfig cfg = TrainConfig::pretrain_defaults();
  cfg.lr = 1e-3;
  cfg.decay_epochs = {};
  cfg.total_epochs = epochs;
  cfg.batch_size = 2;
  cfg.seed = 5;
  cfg.augment.p_color = cfg.augment.p_affine = 0.0;
  cfg.augment.p_blur = cfg.augment.p_dropout = 0.0;
  return cfg;
}

std::string fresh_dir(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

// serves records verbatim, without the regeneration check
class RawSource : public SampleSource {
 public:
  RawSource(DatasetManifest manifest, std::vector<Image> images)
      : manifest_(std::move(manifest)), images_(std::move(images)) {}
  int size() const override { return manifest_.size(); }
  const ManifestRecord& record(int index) const override {
    return manifest_.records[static_cast<std::size_t>(index)];
  }
  Image image(int index) const override {
    return images_[static_cast<std::size_t>(index)];
  }

 private:
  DatasetManifest manifest_;
  std::vector<Image> images_;
};

}  // namespace

TEST_SUITE_BEGIN("trainer");

TEST_CASE("training runs, logs, checkpoints, and repeats bit-identically") {
  BodyModelDefinition body = make_toy_body_model();
  DatasetManifest manifest = generate_synthetic_dataset(4, 61, body);
  auto source = make_synthetic_source(manifest, body);
  TrainConfig tc = tiny_train_config(2);

  std::string dir_a = fresh_dir("meev_train_a");
  Pipeline pipe_a(tiny_config(), body);
  TrainProgress a = train_loop(pipe_a, *source, tc, dir_a);

  CHECK(a.step_losses.size() == 4);  // 2 epochs x 2 batches
  CHECK(a.last_epoch == 1);
  CHECK(a.steps == 4);
  for (double v : a.step_losses) CHECK(std::isfinite(v));
  CHECK(std::filesystem::exists(dir_a + "/checkpoint_epoch_0.meevarch"));
  CHECK(std::filesystem::exists(dir_a + "/checkpoint_epoch_1.meevarch"));
  CHECK(std::filesystem::exists(dir_a + "/train_config.txt"));
  CHECK(std::filesystem::exists(dir_a + "/train_log.txt"));

  std::string dir_b = fresh_dir("meev_train_b");
  Pipeline pipe_b(tiny_config(), body);
  TrainProgress b = train_loop(pipe_b, *source, tc, dir_b);
  REQUIRE(b.step_losses.size() == a.step_losses.size());
  for (std::size_t i = 0; i < a.step_losses.size(); ++i) {
    CHECK(a.step_losses[i] == b.step_losses[i]);
  }

  CheckpointMeta meta =
      read_checkpoint_meta(dir_a + "/checkpoint_epoch_1.meevarch");
  CHECK(meta.epoch == 1);
  CHECK(meta.step == 4);
  CHECK(meta.config.batch_size == tc.batch_size);
  CHECK(meta.model_joints == 22);
  CHECK(meta.model_vertices == 64);
}

TEST_CASE("resuming from a checkpoint retraces the uninterrupted run") {
  BodyModelDefinition body = make_toy_body_model();
  DatasetManifest manifest = generate_synthetic_dataset(4, 62, body);
  auto source = make_synthetic_source(manifest, body);
  TrainConfig tc = tiny_train_config(3);

  std::string dir_full = fresh_dir("meev_train_full");
  Pipeline pipe_full(tiny_config(), body);
  TrainProgress full = train_loop(pipe_full, *source, tc, dir_full);
  REQUIRE(full.step_losses.size() == 6);

  std::string dir_res = fresh_dir("meev_train_resumed");
  Pipeline pipe_res(tiny_config(), body);
  TrainLoopOptions opt;
  opt.resume_from = dir_full + "/checkpoint_epoch_1.meevarch";
  TrainProgress resumed = train_loop(pipe_res, *source, tc, dir_res, opt);

  REQUIRE(resumed.step_losses.size() == 2);  // epoch 2 only
  for (std::size_t i = 0; i < 2; ++i) {
    double uninterrupted = full.step_losses[4 + i];
    double rel = std::abs(resumed.step_losses[i] - uninterrupted) /
                 std::max(1e-12, std::abs(uninterrupted));
    CHECK(rel < 1e-9);
  }

  // resuming under a different config is refused
  TrainConfig other = tc;
  other.lr = 2e-3;
  Pipeline pipe_c(tiny_config(), body);
  TrainLoopOptions opt2;
  opt2.resume_from = dir_full + "/checkpoint_epoch_1.meevarch";
  CHECK_THROWS_AS(
      train_loop(pipe_c, *source, other, fresh_dir("meev_train_c"), opt2),
      Error);
}

TEST_CASE("non-finite loss aborts naming the batch") {
  BodyModelDefinition body = make_toy_body_model();
  DatasetManifest manifest = generate_synthetic_dataset(2, 63, body);
  auto source = make_synthetic_source(manifest, body);
  TrainConfig tc = tiny_train_config(1);

  // poison a head bias: it feeds the loss with no relu in between to
  // swallow the NaN
  Pipeline pipe(tiny_config(), body);
  pipe.params().param("decoder.head.beta.bias").value[0] = std::nan("");

  CHECK_THROWS_WITH_AS(
      train_loop(pipe, *source, tc, fresh_dir("meev_train_nan")),
      doctest::Contains("epoch 0 batch 0"), Error);
}

TEST_CASE("checkpoint pruning keeps the newest files") {
  BodyModelDefinition body = make_toy_body_model();
  DatasetManifest manifest = generate_synthetic_dataset(2, 64, body);
  auto source = make_synthetic_source(manifest, body);
  TrainConfig tc = tiny_train_config(3);
  tc.batch_size = 2;

  std::string dir = fresh_dir("meev_train_prune");
  Pipeline pipe(tiny_config(), body);
  TrainLoopOptions opt;
  opt.keep_checkpoints = 2;
  TrainProgress p = train_loop(pipe, *source, tc, dir, opt);

  CHECK(p.checkpoints.size() == 2);
  CHECK_FALSE(std::filesystem::exists(dir + "/checkpoint_epoch_0.meevarch"));
  CHECK(std::filesystem::exists(dir + "/checkpoint_epoch_1.meevarch"));
  CHECK(std::filesystem::exists(dir + "/checkpoint_epoch_2.meevarch"));
}

TEST_CASE("evaluation scores ground truth injection as exactly zero") {
  BodyModelDefinition body = make_toy_body_model();
  DatasetManifest manifest = generate_synthetic_dataset(3, 65, body);
  auto source = make_synthetic_source(manifest, body);
  Pipeline pipe(tiny_config(), body);

  EvalOptions gt;
  gt.inject_gt = true;
  MetricReport ideal = evaluate_model(pipe, *source, gt);
  CHECK(ideal.n_samples() == 3);
  CHECK(ideal.mpjpe_mm() == 0.0);
  CHECK(ideal.mpvpe_mm() == 0.0);

  MetricReport real = evaluate_model(pipe, *source);
  CHECK(real.n_samples() == 3);
  CHECK(std::isfinite(real.mpjpe_mm()));
  CHECK(std::isfinite(real.mpvpe_mm()));
  CHECK(real.mpjpe_mm() > 0.0);
  CHECK(real.mpvpe_mm() > 0.0);
}

TEST_CASE("evaluation refuses samples without full 3D ground truth") {
  BodyModelDefinition body = make_toy_body_model();
  DatasetManifest manifest = generate_synthetic_dataset(1, 66, body);
  std::vector<Image> images = {render_synthetic_image(manifest.records[0])};
  manifest.records[0].annotation.has_params = false;
  RawSource source(std::move(manifest), std::move(images));

  Pipeline pipe(tiny_config(), body);
  CHECK_THROWS_WITH_AS(evaluate_model(pipe, source),
                       doctest::Contains("cannot be scored"), Error);
}

TEST_SUITE_END();
