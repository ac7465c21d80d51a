#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "symcor/grounding.hpp"

namespace symcor {

// Architecture of f_θ: one shared tower (dense hidden layers + a
// classes_per_group-logit head, rectifier activations) applied to each image
// of a sample; the per-image logits concatenate to m = pair_arity ×
// classes_per_group outputs, matching the input-fact enumeration.
struct NetworkConfig {
  uint32_t image_height = 16;
  uint32_t image_width = 16;
  uint32_t pair_arity = 2;
  std::vector<uint32_t> hidden_sizes = {128, 64};
  uint32_t classes_per_group = 10;

  uint32_t input_size() const { return image_height * image_width; }
  uint32_t logit_count() const { return pair_arity * classes_per_group; }
  // Layer widths of the shared tower: input, hidden..., classes_per_group.
  std::vector<uint32_t> tower_dims() const;
  uint64_t digest() const;
};

struct Network {
  struct Layer {
    uint32_t in = 0;
    uint32_t out = 0;
    std::vector<double> w;  // out×in row-major
    std::vector<double> b;  // out
  };

  NetworkConfig config;
  std::vector<Layer> layers;
  uint64_t param_version = 0;  // bumped by adam_step; guards stale caches

  size_t parameter_count() const;
};

// Deterministic function of (config, seed); uniform fan-in initialization.
Network init_network(const NetworkConfig& config, uint64_t seed);

// Activations saved by forward for the matching backward call. Rows of the
// per-layer matrices are the batch's images in order (sample-major).
struct ForwardCache {
  uint64_t param_version = 0;
  size_t batch = 0;
  size_t rows = 0;                           // batch × pair_arity
  std::vector<std::vector<double>> acts;     // acts[0] = input; acts[l+1] = layer l output
  std::vector<std::vector<double>> preacts;  // pre-activation per layer
  std::vector<double> logits;                // batch × logit_count
};

// batch_images: batch × pair_arity × input_size doubles, sample-major.
ForwardCache forward(const Network& net, std::span<const double> batch_images, size_t batch);

struct Gradients {
  std::vector<std::vector<double>> dw;
  std::vector<std::vector<double>> db;
};

// Reverse-mode gradients of the mean over the batch of ⟨z_s, g_logits_s⟩,
// i.e. parameter gradients when g_logits rows are ∂loss/∂z per sample.
Gradients backward(const Network& net, const ForwardCache& cache,
                   std::span<const double> g_logits);

struct AdamState {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  uint64_t step = 0;
  std::vector<std::vector<double>> m_w, v_w, m_b, v_b;
};

AdamState make_adam(const Network& net, double lr);

// Bias-corrected Adam update in place. Returns false (and leaves everything
// untouched) when the gradients contain a non-finite value.
bool adam_step(Network& net, const Gradients& grads, AdamState& state);

// Checkpoint container: little-endian, magic "SYMC", format version, config
// digest, then per-layer shapes and raw parameter arrays.
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(const NetworkConfig& expected_config, const std::string& path);

}  // namespace symcor
