#include "train/checkpoint.hpp"

#include "json.hpp"

namespace meev {

using nlohmann::json;

namespace {

json meta_to_json(const CheckpointMeta& meta) {
  return json{{"format_version", meta.format_version},
              {"epoch", meta.epoch},
              {"step", meta.step},
              {"rng_state", meta.rng_state},
              {"batch_size", meta.config.batch_size},
              {"stage", meta.config.stage},
              {"model_joints", meta.model_joints},
              {"model_vertices", meta.model_vertices}};
}

CheckpointMeta meta_from_archive(const Archive& archive) {
  check(archive.contains("meta.json"), Status::data_error,
        "checkpoint: missing meta.json record");
  json j;
  try {
    j = json::parse(archive.bytes("meta.json"));
  } catch (const json::exception& e) {
    fail(Status::data_error, concat("checkpoint: bad meta.json: ", e.what()));
  }
  int version = j.value("format_version", -1);
  check(version == kCheckpointVersion, Status::version_error,
        concat("checkpoint format version ", version,
               " is not supported (expected ", kCheckpointVersion, ")"));

  CheckpointMeta meta;
  meta.format_version = version;
  try {
    meta.epoch = j.at("epoch").get<int>();
    meta.step = j.at("step").get<std::int64_t>();
    meta.rng_state = j.at("rng_state").get<std::uint64_t>();
  } catch (const json::exception& e) {
    fail(Status::data_error,
         concat("checkpoint: incomplete meta.json (weights-only file?): ",
                e.what()));
  }
  meta.model_joints = j.value("model_joints", 0);
  meta.model_vertices = j.value("model_vertices", 0);
  meta.config = parse_train_config_text(archive.bytes("config"),
                                        "checkpoint config");
  return meta;
}

void put_params(Archive& archive, const ParamStore& store) {
  for (const std::string& name : store.names()) {
    const ParamStore::Param& p = store.param(name);
    std::vector<std::uint64_t> dims;
    for (int d : p.shape) dims.push_back(static_cast<std::uint64_t>(d));
    archive.put_f64("param/" + name, std::move(dims), p.value);
  }
}

void get_params(const Archive& archive, ParamStore& store) {
  std::size_t restored = 0;
  for (const std::string& name : archive.names()) {
    if (name.rfind("param/", 0) != 0) continue;
    std::string key = name.substr(6);
    check(store.contains(key), Status::data_error,
          concat("checkpoint parameter ", key,
                 " does not exist in this model"));
    ParamStore::Param& p = store.param(key);
    std::vector<double> value = archive.f64(name);
    check(value.size() == p.value.size(), Status::data_error,
          concat("checkpoint parameter ", key, " has ", value.size(),
                 " values, model expects ", p.value.size()));
    p.value = std::move(value);
    ++restored;
  }
  check(restored == store.names().size(), Status::data_error,
        concat("checkpoint restores ", restored, " of ",
               store.names().size(), " model parameters"));
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& store,
                     const Adam& adam, const CheckpointMeta& meta) {
  Archive archive;
  archive.put_bytes("meta.json", meta_to_json(meta).dump(2));
  archive.put_bytes("config", train_config_to_text(meta.config));
  put_params(archive, store);
  adam.save_state(archive);
  archive.save(path);
}

CheckpointMeta load_checkpoint(const std::string& path, ParamStore& store,
                               Adam& adam) {
  Archive archive = Archive::load(path);
  CheckpointMeta meta = meta_from_archive(archive);
  get_params(archive, store);
  adam.load_state(archive);
  return meta;
}

CheckpointMeta read_checkpoint_meta(const std::string& path) {
  return meta_from_archive(Archive::load(path));
}

void save_weights(const std::string& path, const ParamStore& store) {
  Archive archive;
  json j = {{"format_version", kCheckpointVersion}, {"weights_only", true}};
  archive.put_bytes("meta.json", j.dump(2));
  put_params(archive, store);
  archive.save(path);
}

void load_weights(const std::string& path, ParamStore& store) {
  Archive archive = Archive::load(path);
  get_params(archive, store);
}

}  // namespace meev
