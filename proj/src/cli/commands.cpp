#include "fastgan/cli/commands.hpp"

#include <fmt/core.h>

#include <cmath>
#include <map>
#include <optional>

#include "CLI11.hpp"
#include "fastgan/io/checkpoint.hpp"
#include "fastgan/log.hpp"
#include "fastgan/ops.hpp"

namespace fastgan::cli {
namespace {

namespace fs = std::filesystem;

constexpr int kGridSide = 8;
constexpr std::int64_t kChunk = 8;
// Sample grids use their own stream so checkpoint cadence never shifts the
// training draws.
constexpr std::uint64_t kGridSeedSalt = 0x9e3779b97f4a7c15ULL;

log::Level parse_level(const std::string& s) {
  if (s == "debug") return log::Level::debug;
  if (s == "info") return log::Level::info;
  if (s == "warn") return log::Level::warn;
  if (s == "error") return log::Level::error;
  if (s == "off") return log::Level::off;
  throw ConfigError("unknown log_level '" + s + "'");
}

// EMA generator in eval mode, chunked to bound memory.
Tensor generate(train::Trainer& t, const Tensor& z) {
  NoGradGuard off;
  std::vector<Tensor> parts;
  std::vector<Real> values;
  const auto n = z.dim(0), dim = z.dim(1);
  for (std::int64_t s = 0; s < n; s += kChunk) {
    const auto m = std::min(kChunk, n - s);
    const auto src = z.data().subspan(static_cast<std::size_t>(s * dim), static_cast<std::size_t>(m * dim));
    const Tensor img = g_forward(Tensor({m, dim}, std::vector<Real>(src.begin(), src.end())), t.ema(), t.model(), false).image;
    values.insert(values.end(), img.data().begin(), img.data().end());
  }
  const auto r = t.model().resolution;
  return Tensor({n, 3, r, r}, std::move(values));
}

void write_sample_grid(train::Trainer& t, const fs::path& path) {
  Rng rng(t.config().seed ^ kGridSeedSalt);
  const Tensor z = sample_latent(kGridSide * kGridSide, t.model().latent_dim, rng);
  io::write_png(path, io::make_grid(generate(t, z), kGridSide));
}

std::unique_ptr<train::Trainer> open_checkpoint(const RunConfig& rc) {
  if (rc.ckpt.empty()) throw ConfigError("missing required key 'ckpt'");
  if (!fs::is_directory(rc.ckpt)) throw ConfigError("checkpoint directory not found: " + rc.ckpt);
  return io::load_checkpoint(rc.ckpt);
}

}  // namespace

void cmd_train(const RunConfig& rc) {
  if (rc.data.empty()) throw ConfigError("missing required key 'data'");
  if (!fs::is_directory(rc.data)) throw ConfigError("data directory not found: " + rc.data);
  const train::TrainConfig tcfg = rc.train_config();

  std::unique_ptr<train::Trainer> trainer;
  if (!rc.resume.empty()) {
    if (!fs::is_directory(rc.resume)) throw ConfigError("resume checkpoint not found: " + rc.resume);
    trainer = io::load_checkpoint(rc.resume, tcfg);
    log::info("resuming from {} at step {}", rc.resume, trainer->steps_done());
  } else {
    trainer = std::make_unique<train::Trainer>(rc.model_config(), tcfg);
  }
  const io::Dataset ds = io::load_dataset(rc.data, trainer->model().resolution);

  const fs::path out = rc.out;
  fs::create_directories(out);
  train::LossLog csv(out / "loss.csv", trainer->steps_done());
  log::info("G {} params, D {} params", nn::count_params(trainer->g().collect().params),
            nn::count_params(trainer->d().collect().params));

  train::LoopHooks hooks;
  hooks.next_batch = [&](Rng& rng) { return io::sample_batch(ds, tcfg.batch_size, rng); };
  hooks.on_step = [&](std::int64_t s, const train::LossReport& r) {
    csv.append(s, r);
    if (s % 50 == 0 || s == tcfg.iters) log::info("step {} {}", s, r.str());
  };
  hooks.on_checkpoint = [&](std::int64_t s) {
    const fs::path dir = out / fmt::format("ckpt_{:06d}", s);
    io::save_checkpoint(dir, *trainer);
    write_sample_grid(*trainer, dir / "samples.png");
    log::info("checkpoint {}", dir.string());
  };
  train::run(*trainer, hooks);
}

void cmd_generate(const RunConfig& rc) {
  if (rc.n < 0) throw ConfigError("n must be >= 0");
  auto t = open_checkpoint(rc);
  const fs::path out = rc.out;
  fs::create_directories(out);
  if (rc.n == 0) return;
  Rng rng(rc.seed);
  const Tensor imgs = generate(*t, sample_latent(rc.n, t->model().latent_dim, rng));
  for (std::int64_t k = 0; k < imgs.dim(0); ++k) {
    io::write_png(out / fmt::format("sample_{:04d}.png", k), io::tensor_to_image(io::slice(imgs, k)));
  }
}

void cmd_invert(const RunConfig& rc) {
  if (rc.image.empty()) throw ConfigError("missing required key 'image'");
  if (rc.iters < 0) throw ConfigError("iters must be >= 0");
  io::RgbImage raw;
  try {
    raw = io::read_image(rc.image);
  } catch (const IoError& e) {
    throw ConfigError(std::string("cannot use image: ") + e.what());
  }
  analysis::BacktrackOptions opt;
  opt.iters = rc.iters;
  opt.dist.kind = analysis::parse_distance(rc.dist);
  auto t = open_checkpoint(rc);
  if (opt.dist.kind == analysis::DistanceKind::d_feature) opt.dist.d = &t->d();
  const int r = t->model().resolution;
  const Tensor chw = io::preprocess(raw, r);
  const Tensor target({1, 3, r, r}, std::vector<Real>(chw.data().begin(), chw.data().end()));

  Rng rng(rc.seed);
  const analysis::BacktrackResult res = analysis::backtrack(t->ema(), t->model(), target, opt, rng);
  const fs::path out = rc.out;
  fs::create_directories(out);
  const Tensor recon({3, r, r}, std::vector<Real>(res.recon.data().begin(), res.recon.data().end()));
  io::write_png(out / "invert.png", io::make_grid(io::stack({chw, recon}), 2));
  fmt::print("distance {} {:.6f}\n", rc.dist, res.distance.front());
}

void cmd_stylemix(const RunConfig& rc) {
  if (rc.n_content < 1 || rc.n_style < 1) throw ConfigError("n_content and n_style must be >= 1");
  auto t = open_checkpoint(rc);
  const ModelConfig& cfg = t->model();
  const auto pairs = parse_pairs(rc.pairs, cfg);
  Rng rng(rc.seed);
  const Tensor zc = sample_latent(rc.n_content, cfg.latent_dim, rng);
  const Tensor zs = sample_latent(rc.n_style, cfg.latent_dim, rng);
  const Tensor content = generate(*t, zc), style = generate(*t, zs);

  const int r = cfg.resolution;
  const auto cell = [&](const Tensor& img) {
    return Tensor({3, r, r}, std::vector<Real>(img.data().begin(), img.data().end()));
  };
  std::vector<Tensor> cells;
  cells.push_back(Tensor::full({3, r, r}, Real(1)));
  for (int j = 0; j < rc.n_style; ++j) cells.push_back(cell(io::slice(style, j)));
  for (int i = 0; i < rc.n_content; ++i) {
    cells.push_back(cell(io::slice(content, i)));
    for (int j = 0; j < rc.n_style; ++j) {
      cells.push_back(cell(analysis::style_mix(t->ema(), cfg, io::slice(zc, i), io::slice(zs, j), pairs)));
    }
  }
  const fs::path out = rc.out;
  fs::create_directories(out);
  io::write_png(out / "stylemix.png", io::make_grid(io::stack(cells), rc.n_style + 1));
}

void cmd_probe(const RunConfig& rc) {
  if (rc.data.empty()) throw ConfigError("missing required key 'data'");
  if (!fs::is_directory(rc.data)) throw ConfigError("data directory not found: " + rc.data);
  if (rc.iters < 0) throw ConfigError("iters must be >= 0");
  auto t = open_checkpoint(rc);
  const io::Dataset ds = io::load_dataset(rc.data, t->model().resolution);
  analysis::ProbeOptions opt;
  opt.iters = rc.iters;
  Rng rng(rc.seed);
  const auto res = analysis::probe_encoder(t->d(), ds, opt, rng);
  fmt::print("probe_score {:.6f} (train {}, held-out {})\n", res.score, res.train_images, res.heldout_images);
}

int run(int argc, const char* const* argv) {
  CLI::App app{"FastGAN trainer and analysis tools"};
  app.require_subcommand(1);
  std::string config_path;
  std::map<std::string, std::optional<std::string>> flags;

  const std::map<std::string, std::string> about = {
      {"train", "train G and D on an image folder"},
      {"generate", "write EMA samples from a checkpoint"},
      {"invert", "back-track a latent for a target image"},
      {"stylemix", "style-mixing grid via SLE x_low substitution"},
      {"probe", "score D's features with a freshly trained decoder"},
  };
  for (const auto& [name, help] : about) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "flat key = value config file");
    for (const auto& key : RunConfig::keys()) {
      std::string flag = key;
      std::ranges::replace(flag, '_', '-');
      sub->add_option("--" + flag, flags[key]);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsageError;
  }

  const std::string cmd = app.get_subcommands().front()->get_name();
  try {
    RunConfig rc;
    if (!config_path.empty()) rc.load_file(config_path);
    for (const auto& [key, value] : flags)
      if (value) rc.set(key, *value);
    log::set_level(parse_level(rc.log_level));
    if (cmd == "train") cmd_train(rc);
    else if (cmd == "generate") cmd_generate(rc);
    else if (cmd == "invert") cmd_invert(rc);
    else if (cmd == "stylemix") cmd_stylemix(rc);
    else cmd_probe(rc);
  } catch (const ConfigError& e) {
    log::error("{}", e.what());
    return kUsageError;
  } catch (const std::exception& e) {
    log::error("{}", e.what());
    return kRuntimeError;
  }
  return kOk;
}

}  // namespace fastgan::cli
