#include "fastgan/io/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "json.hpp"

namespace fastgan::io {
namespace {

using nlohmann::json;
static_assert(std::endian::native == std::endian::little, "checkpoint blobs assume a little-endian host");

// Every tensor a checkpoint carries, in blob order.
nn::TensorList checkpoint_tensors(train::Trainer& t) {
  nn::TensorList out;
  auto add_all = [&](const nn::ParamCollector& c) {
    out.insert(out.end(), c.params.begin(), c.params.end());
    out.insert(out.end(), c.buffers.begin(), c.buffers.end());
  };
  add_all(t.g().collect("g"));
  add_all(t.ema().collect("ema"));
  add_all(t.d().collect("d"));
  for (auto [prefix, opt] : {std::pair{"opt_g", &t.opt_g()}, std::pair{"opt_d", &t.opt_d()}}) {
    for (const auto& m : opt->state().m) out.push_back({std::string(prefix) + ".m." + m.name, m.tensor});
    for (const auto& v : opt->state().v) out.push_back({std::string(prefix) + ".v." + v.name, v.tensor});
  }
  return out;
}

json model_to_json(const ModelConfig& m) {
  json j;
  j["resolution"] = m.resolution;
  j["latent_dim"] = m.latent_dim;
  json g = json::object(), d = json::object();
  for (auto [r, c] : m.g_channels) g[std::to_string(r)] = c;
  for (auto [r, c] : m.d_channels) d[std::to_string(r)] = c;
  j["g_channels"] = g;
  j["d_channels"] = d;
  j["decoder_channels"] = m.decoder_channels;
  json pairs = json::array();
  for (const auto& p : m.sle_pairs) pairs.push_back({p.low, p.high});
  j["sle_pairs"] = pairs;
  return j;
}

ModelConfig model_from_json(const json& j) {
  ModelConfig m;
  m.resolution = j.at("resolution").get<int>();
  m.latent_dim = j.at("latent_dim").get<int>();
  for (const auto& [k, v] : j.at("g_channels").items()) m.g_channels[std::stoi(k)] = v.get<int>();
  for (const auto& [k, v] : j.at("d_channels").items()) m.d_channels[std::stoi(k)] = v.get<int>();
  m.decoder_channels = j.at("decoder_channels").get<std::vector<int>>();
  for (const auto& p : j.at("sle_pairs")) m.sle_pairs.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
  return m;
}

json train_to_json(const train::TrainConfig& t) {
  return {{"lr", t.adam.lr},
          {"beta1", t.adam.beta1},
          {"beta2", t.adam.beta2},
          {"eps", t.adam.eps},
          {"batch_size", t.batch_size},
          {"iters", t.iters},
          {"ema_decay", t.ema_decay},
          {"aug", t.aug.to_string()},
          {"seed", t.seed},
          {"checkpoint_every", t.checkpoint_every},
          {"recon_norm", train::to_string(t.recon_norm)},
          {"self_supervised", t.self_supervised}};
}

train::TrainConfig train_from_json(const json& j) {
  train::TrainConfig t;
  t.adam.lr = j.at("lr").get<double>();
  t.adam.beta1 = j.at("beta1").get<double>();
  t.adam.beta2 = j.at("beta2").get<double>();
  t.adam.eps = j.at("eps").get<double>();
  t.batch_size = j.at("batch_size").get<int>();
  t.iters = j.at("iters").get<std::int64_t>();
  t.ema_decay = j.at("ema_decay").get<double>();
  t.aug = train::AugmentPolicy::parse(j.at("aug").get<std::string>());
  t.seed = j.at("seed").get<std::uint64_t>();
  t.checkpoint_every = j.at("checkpoint_every").get<std::int64_t>();
  t.recon_norm = train::parse_recon_norm(j.at("recon_norm").get<std::string>());
  t.self_supervised = j.at("self_supervised").get<bool>();
  return t;
}

}  // namespace

void CheckpointManifest::validate() const {
  if (format_version != kCheckpointVersion) {
    throw IoError("checkpoint format version " + std::to_string(format_version) + " is not supported (expected " +
                  std::to_string(kCheckpointVersion) + ")");
  }
  std::vector<const ManifestEntry*> sorted;
  for (const auto& e : entries) sorted.push_back(&e);
  std::ranges::sort(sorted, {}, &ManifestEntry::offset);
  std::uint64_t cursor = 0;
  for (const auto* e : sorted) {
    if (e->offset < cursor) throw IoError("checkpoint entry " + e->name + " overlaps the previous entry");
    if (e->offset != cursor) throw IoError("checkpoint entry " + e->name + " leaves a gap in params.bin");
    if (e->length != static_cast<std::uint64_t>(shape_numel(e->shape)) * sizeof(float)) {
      throw IoError("checkpoint entry " + e->name + " length does not match its shape");
    }
    cursor = e->offset + e->length;
  }
}

void save_checkpoint(const std::filesystem::path& dir, train::Trainer& trainer) {
  std::filesystem::create_directories(dir);
  const nn::TensorList tensors = checkpoint_tensors(trainer);

  json entries = json::array();
  std::vector<float> blob;
  for (const auto& nt : tensors) {
    const auto off = blob.size() * sizeof(float);
    for (Real v : nt.tensor.data()) blob.push_back(static_cast<float>(v));
    entries.push_back({{"name", nt.name},
                       {"shape", nt.tensor.shape()},
                       {"dtype", "f32"},
                       {"offset", off},
                       {"length", static_cast<std::uint64_t>(nt.tensor.numel()) * sizeof(float)}});
  }
  json m;
  m["format_version"] = kCheckpointVersion;
  m["model"] = model_to_json(trainer.model());
  m["train"] = train_to_json(trainer.config());
  m["step"] = trainer.steps_done();
  m["rng_state"] = trainer.rng().state();
  m["opt_g_step"] = trainer.opt_g().state().step;
  m["opt_d_step"] = trainer.opt_d().state().step;
  m["entries"] = entries;

  // Write to temporaries, then rename, so a crash never leaves a mixed pair.
  const auto bin_tmp = dir / "params.bin.tmp";
  const auto man_tmp = dir / "manifest.json.tmp";
  {
    std::ofstream out(bin_tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(float)));
    if (!out) throw IoError("failed writing " + bin_tmp.string());
  }
  {
    std::ofstream out(man_tmp, std::ios::trunc);
    out << m.dump(1) << '\n';
    if (!out) throw IoError("failed writing " + man_tmp.string());
  }
  std::filesystem::rename(bin_tmp, dir / "params.bin");
  std::filesystem::rename(man_tmp, dir / "manifest.json");
}

CheckpointManifest read_manifest(const std::filesystem::path& dir) {
  const auto path = dir / "manifest.json";
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  CheckpointManifest m;
  try {
    const json j = json::parse(in);
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kCheckpointVersion) m.validate();
    m.model = model_from_json(j.at("model"));
    m.train = train_from_json(j.at("train"));
    m.step = j.at("step").get<std::int64_t>();
    m.rng_state = j.at("rng_state").get<std::string>();
    m.opt_g_step = j.at("opt_g_step").get<std::int64_t>();
    m.opt_d_step = j.at("opt_d_step").get<std::int64_t>();
    for (const auto& e : j.at("entries")) {
      if (e.at("dtype").get<std::string>() != "f32") {
        throw IoError("checkpoint entry " + e.at("name").get<std::string>() + " has unsupported dtype");
      }
      m.entries.push_back({e.at("name").get<std::string>(), e.at("shape").get<Shape>(),
                           e.at("offset").get<std::uint64_t>(), e.at("length").get<std::uint64_t>()});
    }
  } catch (const json::exception& e) {
    throw IoError("malformed manifest " + path.string() + ": " + e.what());
  }
  m.validate();
  return m;
}

std::unique_ptr<train::Trainer> load_checkpoint(const std::filesystem::path& dir,
                                                const std::optional<train::TrainConfig>& train_override) {
  const CheckpointManifest m = read_manifest(dir);
  auto trainer = std::make_unique<train::Trainer>(m.model, train_override.value_or(m.train));

  const auto bin_path = dir / "params.bin";
  std::ifstream in(bin_path, std::ios::binary);
  if (!in) throw IoError("cannot open " + bin_path.string());
  std::uint64_t expected = 0;
  for (const auto& e : m.entries) expected += e.length;
  const auto actual = std::filesystem::file_size(bin_path);
  if (actual != expected) {
    throw IoError("params.bin is " + std::to_string(actual) + " bytes, manifest expects " + std::to_string(expected));
  }

  std::map<std::string, const ManifestEntry*> by_name;
  for (const auto& e : m.entries) {
    if (!by_name.emplace(e.name, &e).second) throw IoError("duplicate checkpoint entry " + e.name);
  }
  const nn::TensorList tensors = checkpoint_tensors(*trainer);
  std::map<std::string, Tensor> wanted;
  for (const auto& nt : tensors) wanted.emplace(nt.name, nt.tensor);
  for (const auto& e : m.entries) {
    if (!wanted.contains(e.name)) throw IoError("unknown checkpoint entry " + e.name);
  }
  std::vector<float> buf;
  for (const auto& nt : tensors) {
    auto it = by_name.find(nt.name);
    if (it == by_name.end()) throw IoError("checkpoint is missing entry " + nt.name);
    const ManifestEntry& e = *it->second;
    if (e.shape != nt.tensor.shape()) {
      throw IoError("checkpoint entry " + e.name + " has shape " + shape_str(e.shape) + ", model expects " +
                    shape_str(nt.tensor.shape()));
    }
    buf.resize(e.length / sizeof(float));
    in.seekg(static_cast<std::streamoff>(e.offset));
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(e.length));
    if (!in) throw IoError("truncated params.bin while reading " + e.name);
    Tensor t = nt.tensor;
    std::ranges::transform(buf, t.data().begin(), [](float v) { return static_cast<Real>(v); });
  }
  trainer->opt_g().state().step = m.opt_g_step;
  trainer->opt_d().state().step = m.opt_d_step;
  trainer->rng().set_state(m.rng_state);
  trainer->set_steps_done(m.step);
  return trainer;
}

}  // namespace fastgan::io
