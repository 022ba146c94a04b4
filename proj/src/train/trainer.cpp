#include "train/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "train/augment.hpp"
#include "train/loss.hpp"
#include "train/optimizer.hpp"

namespace meev {

namespace fs = std::filesystem;

namespace {

// stream tag separating the epoch shuffle from per-sample augmentation
constexpr std::uint64_t kShuffleStream = 0x5346;

std::vector<int> epoch_order(int n, std::uint64_t seed, int epoch) {
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  Rng rng(Rng::mix(seed, static_cast<std::uint64_t>(epoch), kShuffleStream));
  for (int i = n - 1; i > 0; --i) {
    int j = rng.uniform_int(0, i);
    std::swap(order[static_cast<std::size_t>(i)],
              order[static_cast<std::size_t>(j)]);
  }
  return order;
}

void check_resume_config(const TrainConfig& cfg, const TrainConfig& stored) {
  check(stored.stage == cfg.stage && stored.seed == cfg.seed &&
            stored.batch_size == cfg.batch_size && stored.lr == cfg.lr &&
            stored.total_epochs == cfg.total_epochs,
        Status::config_error,
        "resume: checkpoint was produced under a different config "
        "(stage/seed/batch_size/lr/total_epochs must match)");
}

}  // namespace

TrainProgress train_loop(Pipeline& pipeline, const SampleSource& source,
                         const TrainConfig& config,
                         const std::string& out_dir,
                         const TrainLoopOptions& options) {
  config.validate();
  check_arg(source.size() >= 1, "train_loop: empty sample source");
  fs::create_directories(out_dir);

  Adam adam;
  int start_epoch = 0;
  if (!options.resume_from.empty()) {
    CheckpointMeta meta =
        load_checkpoint(options.resume_from, pipeline.params(), adam);
    check_resume_config(config, meta.config);
    start_epoch = meta.epoch + 1;
  }
  check_arg(start_epoch < config.total_epochs,
            "train_loop: nothing to do, checkpoint already covers epoch ",
            config.total_epochs - 1);

  // resolved config plus crop geometry stays next to the checkpoints
  save_train_config(out_dir + "/train_config.txt", config);

  std::vector<TrainingSample> base;
  base.reserve(static_cast<std::size_t>(source.size()));
  for (int i = 0; i < source.size(); ++i) {
    base.push_back(assemble_training_sample(
        source.image(i), source.record(i).annotation, options.crop));
  }

  std::ofstream log(out_dir + "/train_log.txt", std::ios::app);
  check(bool(log), Status::runtime_error,
        concat("cannot open ", out_dir, "/train_log.txt"));

  TrainProgress progress;
  const int n = source.size();

  for (int epoch = start_epoch; epoch < config.total_epochs; ++epoch) {
    double lr = lr_at(config, epoch);
    std::vector<int> order = epoch_order(n, config.seed, epoch);

    int batches =
        (n + config.batch_size - 1) / config.batch_size;
    for (int b = 0; b < batches; ++b) {
      int lo = b * config.batch_size;
      int hi = std::min(n, lo + config.batch_size);

      ad::Tape tape;
      TapeBinding binding;
      ad::Var batch_loss;
      for (int k = lo; k < hi; ++k) {
        int idx = order[static_cast<std::size_t>(k)];
        TrainingSample sample = base[static_cast<std::size_t>(idx)];
        Rng aug_rng(Rng::mix(config.seed, static_cast<std::uint64_t>(epoch),
                             static_cast<std::uint64_t>(idx)));
        augment_sample(sample, config.augment, aug_rng);

        ForwardProducts fwd = pipeline.forward(tape, binding, sample.crop);
        LossResult loss = compute_loss(tape, fwd, sample.annotation,
                                       config.loss_weights,
                                       pipeline.config());
        batch_loss = k == lo ? loss.total : tape.add(batch_loss, loss.total);
      }
      batch_loss = tape.scale(batch_loss, 1.0 / (hi - lo));

      double value = batch_loss.value()[0];
      check(std::isfinite(value), Status::runtime_error,
            concat("train_loop: non-finite loss (", value, ") in epoch ",
                   epoch, " batch ", b));

      tape.backward(batch_loss);
      adam.step(pipeline.params(), binding, lr);

      progress.step_losses.push_back(value);
      log << "epoch " << epoch << " batch " << b << " lr " << lr << " loss "
          << value << "\n";
    }
    log.flush();

    CheckpointMeta meta;
    meta.epoch = epoch;
    meta.step = adam.steps_taken();
    meta.rng_state = config.seed;
    meta.config = config;
    meta.model_joints = pipeline.body().num_joints();
    meta.model_vertices = pipeline.body().num_vertices();
    std::string path =
        concat(out_dir, "/checkpoint_epoch_", epoch, ".meevarch");
    save_checkpoint(path, pipeline.params(), adam, meta);
    progress.checkpoints.push_back(path);
    progress.last_epoch = epoch;

    if (options.keep_checkpoints > 0) {
      while (static_cast<int>(progress.checkpoints.size()) >
             options.keep_checkpoints) {
        std::error_code ec;
        fs::remove(progress.checkpoints.front(), ec);
        progress.checkpoints.erase(progress.checkpoints.begin());
      }
    }
  }

  progress.steps = adam.steps_taken();
  return progress;
}

}  // namespace meev
