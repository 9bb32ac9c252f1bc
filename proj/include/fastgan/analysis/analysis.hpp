#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fastgan/discriminator.hpp"
#include "fastgan/generator.hpp"
#include "fastgan/io/dataset.hpp"

namespace fastgan::analysis {

enum class DistanceKind { pixel_l1, pixel_l2, grad_l1, d_feature };

DistanceKind parse_distance(const std::string& s);
std::string to_string(DistanceKind k);

// Stand-in perceptual distance. d_feature compares D's f2 maps (eval mode)
// and needs `d`.
struct ProxyDistance {
  DistanceKind kind = DistanceKind::pixel_l1;
  DiscriminatorParams* d = nullptr;

  // Mean over every element of the batch; differentiable.
  Tensor operator()(const Tensor& a, const Tensor& b) const;
  // One value per sample, no gradient.
  std::vector<double> per_sample(const Tensor& a, const Tensor& b) const;
};

struct BacktrackOptions {
  std::int64_t iters = 1000;
  double lr = 0.01;
  ProxyDistance dist;
  // z is projected back into this multiple of sqrt(latent_dim) every step.
  double max_norm_factor = 1.5;
};

struct BacktrackResult {
  Tensor z;                      // [N, latent_dim]
  Tensor recon;                  // g(z)
  std::vector<double> distance;  // final, per target
  // history[k][n]: distance of target n after k updates (k = 0..iters).
  std::vector<std::vector<double>> history;
};

// Inverts each target independently (eval-mode G, frozen parameters).
BacktrackResult backtrack(GeneratorParams& g, const ModelConfig& cfg, const Tensor& targets,
                          const BacktrackOptions& opt, Rng& rng);

// [steps,3,R,R] for z = (1-t) z_a + t z_b, t = linspace(0,1,steps).
Tensor interpolate(GeneratorParams& g, const ModelConfig& cfg, const Tensor& z_a, const Tensor& z_b,
                   int steps);

// g(z_content) with z_style's x_low substituted at `pairs`.
Tensor style_mix(GeneratorParams& g, const ModelConfig& cfg, const Tensor& z_content,
                 const Tensor& z_style, const std::vector<SlePair>& pairs);

struct ProbeOptions {
  std::int64_t iters = 200;
  int batch_size = 8;
  double lr = 1e-3;
  double holdout = 0.25;  // trailing fraction of the dataset used for scoring
};

struct ProbeResult {
  double score = 0;  // mean pixel_l1 on the held-out images
  std::size_t train_images = 0;
  std::size_t heldout_images = 0;
};

// Trains a fresh decoder to reconstruct 128x128 images from frozen f2 maps.
ProbeResult probe_encoder(DiscriminatorParams& d, const io::Dataset& data, const ProbeOptions& opt,
                          Rng& rng);

struct NearestMatch {
  std::size_t fake = 0;
  std::size_t real = 0;
  double distance = 0;
};

// Exhaustive scan; ties go to the lowest dataset index.
std::vector<NearestMatch> nearest_real(const Tensor& fakes, const io::Dataset& data,
                                       const ProxyDistance& dist);

}  // namespace fastgan::analysis
