#include "symcor/network.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <type_traits>

#include "symcor/digest.hpp"
#include "symcor/kernels.hpp"
#include "symcor/rng.hpp"

namespace symcor {

std::vector<uint32_t> NetworkConfig::tower_dims() const {
  std::vector<uint32_t> dims;
  dims.push_back(input_size());
  dims.insert(dims.end(), hidden_sizes.begin(), hidden_sizes.end());
  dims.push_back(classes_per_group);
  return dims;
}

uint64_t NetworkConfig::digest() const {
  Digest d;
  d.u64(image_height);
  d.u64(image_width);
  d.u64(pair_arity);
  d.u64(hidden_sizes.size());
  for (uint32_t h : hidden_sizes) d.u64(h);
  d.u64(classes_per_group);
  return d.value();
}

size_t Network::parameter_count() const {
  size_t n = 0;
  for (const Layer& l : layers) n += l.w.size() + l.b.size();
  return n;
}

Network init_network(const NetworkConfig& config, uint64_t seed) {
  if (config.image_height == 0 || config.image_width == 0 || config.pair_arity == 0 ||
      config.classes_per_group == 0)
    throw std::runtime_error("network config has a zero dimension");
  for (uint32_t h : config.hidden_sizes)
    if (h == 0) throw std::runtime_error("network config has an empty hidden layer");

  Network net;
  net.config = config;
  Rng rng(mix_seed(seed, config.digest()));
  const std::vector<uint32_t> dims = config.tower_dims();
  for (size_t l = 0; l + 1 < dims.size(); ++l) {
    Network::Layer layer;
    layer.in = dims[l];
    layer.out = dims[l + 1];
    layer.w.resize(static_cast<size_t>(layer.out) * layer.in);
    layer.b.resize(layer.out);
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (double& w : layer.w) w = (2.0 * rng.uniform() - 1.0) * bound;
    for (double& b : layer.b) b = (2.0 * rng.uniform() - 1.0) * bound;
    net.layers.push_back(std::move(layer));
  }
  return net;
}

ForwardCache forward(const Network& net, std::span<const double> batch_images, size_t batch) {
  const NetworkConfig& cfg = net.config;
  const size_t rows = batch * cfg.pair_arity;
  if (batch_images.size() != rows * cfg.input_size())
    throw std::runtime_error("batch image buffer does not match config shape");

  ForwardCache cache;
  cache.param_version = net.param_version;
  cache.batch = batch;
  cache.rows = rows;
  cache.acts.resize(net.layers.size() + 1);
  cache.preacts.resize(net.layers.size());
  cache.acts[0].assign(batch_images.begin(), batch_images.end());

  for (size_t l = 0; l < net.layers.size(); ++l) {
    const Network::Layer& layer = net.layers[l];
    std::vector<double>& pre = cache.preacts[l];
    pre.resize(rows * layer.out);
    // pre = acts[l] · Wᵀ  (+ bias)
    kernels::gemm(cache.acts[l].data(), layer.w.data(), pre.data(), rows, layer.in, layer.out,
                  false, true);
    for (size_t r = 0; r < rows; ++r)
      for (size_t j = 0; j < layer.out; ++j) pre[r * layer.out + j] += layer.b[j];
    std::vector<double>& act = cache.acts[l + 1];
    act = pre;
    if (l + 1 < net.layers.size())  // hidden layers rectify; the head is linear
      for (double& v : act) v = v > 0.0 ? v : 0.0;
  }

  // Concatenate the per-image head outputs into per-sample logit rows.
  const uint32_t classes = cfg.classes_per_group;
  const std::vector<double>& head = cache.acts.back();
  cache.logits.resize(batch * cfg.logit_count());
  for (size_t s = 0; s < batch; ++s)
    for (uint32_t i = 0; i < cfg.pair_arity; ++i)
      for (uint32_t c = 0; c < classes; ++c)
        cache.logits[s * cfg.logit_count() + i * classes + c] =
            head[(s * cfg.pair_arity + i) * classes + c];
  return cache;
}

Gradients backward(const Network& net, const ForwardCache& cache,
                   std::span<const double> g_logits) {
  if (cache.param_version != net.param_version)
    throw std::runtime_error("stale forward cache: parameters changed since forward");
  const NetworkConfig& cfg = net.config;
  if (g_logits.size() != cache.batch * cfg.logit_count())
    throw std::runtime_error("logit gradient shape mismatch");

  const size_t rows = cache.rows;
  const uint32_t classes = cfg.classes_per_group;
  const double inv_batch = 1.0 / static_cast<double>(cache.batch);

  // Scatter per-sample logit gradients back to per-image head rows; the 1/B
  // of the mean aggregation is folded in here once.
  std::vector<double> dz(rows * classes);
  for (size_t s = 0; s < cache.batch; ++s)
    for (uint32_t i = 0; i < cfg.pair_arity; ++i)
      for (uint32_t c = 0; c < classes; ++c)
        dz[(s * cfg.pair_arity + i) * classes + c] =
            g_logits[s * cfg.logit_count() + i * classes + c] * inv_batch;

  Gradients grads;
  grads.dw.resize(net.layers.size());
  grads.db.resize(net.layers.size());

  for (size_t l = net.layers.size(); l-- > 0;) {
    const Network::Layer& layer = net.layers[l];
    // dW = dZᵀ · acts[l]
    grads.dw[l].resize(layer.w.size());
    kernels::gemm(dz.data(), cache.acts[l].data(), grads.dw[l].data(), layer.out, rows, layer.in,
                  true, false);
    grads.db[l].assign(layer.out, 0.0);
    for (size_t r = 0; r < rows; ++r)
      for (size_t j = 0; j < layer.out; ++j) grads.db[l][j] += dz[r * layer.out + j];
    if (l == 0) break;
    // dA_prev = dZ · W, then gate through the rectifier.
    std::vector<double> da(rows * layer.in);
    kernels::gemm(dz.data(), layer.w.data(), da.data(), rows, layer.out, layer.in, false, false);
    const std::vector<double>& pre_prev = cache.preacts[l - 1];
    for (size_t i = 0; i < da.size(); ++i)
      if (pre_prev[i] <= 0.0) da[i] = 0.0;
    dz = std::move(da);
  }
  return grads;
}

AdamState make_adam(const Network& net, double lr) {
  AdamState state;
  state.lr = lr;
  state.m_w.resize(net.layers.size());
  state.v_w.resize(net.layers.size());
  state.m_b.resize(net.layers.size());
  state.v_b.resize(net.layers.size());
  for (size_t l = 0; l < net.layers.size(); ++l) {
    state.m_w[l].assign(net.layers[l].w.size(), 0.0);
    state.v_w[l].assign(net.layers[l].w.size(), 0.0);
    state.m_b[l].assign(net.layers[l].b.size(), 0.0);
    state.v_b[l].assign(net.layers[l].b.size(), 0.0);
  }
  return state;
}

namespace {

bool all_finite(const std::vector<double>& v) {
  for (double x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

void adam_update(std::vector<double>& theta, const std::vector<double>& g, std::vector<double>& m,
                 std::vector<double>& v, const AdamState& s, double bc1, double bc2) {
  for (size_t i = 0; i < theta.size(); ++i) {
    m[i] = s.beta1 * m[i] + (1.0 - s.beta1) * g[i];
    v[i] = s.beta2 * v[i] + (1.0 - s.beta2) * g[i] * g[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    theta[i] -= s.lr * mhat / (std::sqrt(vhat) + s.eps);
  }
}

}  // namespace

bool adam_step(Network& net, const Gradients& grads, AdamState& state) {
  if (grads.dw.size() != net.layers.size() || grads.db.size() != net.layers.size())
    throw std::runtime_error("gradient shape mismatch");
  for (size_t l = 0; l < net.layers.size(); ++l) {
    if (grads.dw[l].size() != net.layers[l].w.size() ||
        grads.db[l].size() != net.layers[l].b.size())
      throw std::runtime_error("gradient shape mismatch");
    if (!all_finite(grads.dw[l]) || !all_finite(grads.db[l])) return false;
  }
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (size_t l = 0; l < net.layers.size(); ++l) {
    adam_update(net.layers[l].w, grads.dw[l], state.m_w[l], state.v_w[l], state, bc1, bc2);
    adam_update(net.layers[l].b, grads.db[l], state.m_b[l], state.v_b[l], state, bc1, bc2);
  }
  net.param_version += 1;
  return true;
}

// ---------------------------------------------------------------------------
// Checkpoint
//
// Layout (little-endian):
//   byte[4]  magic "SYMC"
//   u32      format version (1)
//   u64      config digest
//   u32      layer count
//   per layer: u32 in, u32 out, f64[out*in] weights, f64[out] biases

namespace {

constexpr char kMagic[4] = {'S', 'Y', 'M', 'C'};
constexpr uint32_t kVersion = 1;

template <typename T>
void write_le(std::ofstream& out, T v) {
  unsigned char buf[sizeof(T)];
  uint64_t bits;
  if constexpr (sizeof(T) == 8 && std::is_floating_point_v<T>) {
    std::memcpy(&bits, &v, 8);
  } else {
    bits = static_cast<uint64_t>(v);
  }
  for (size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_le(std::ifstream& in) {
  unsigned char buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint truncated");
  uint64_t bits = 0;
  for (size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<uint64_t>(buf[i]) << (8 * i);
  if constexpr (sizeof(T) == 8 && std::is_floating_point_v<T>) {
    T v;
    std::memcpy(&v, &bits, 8);
    return v;
  } else {
    return static_cast<T>(bits);
  }
}

}  // namespace

void save_checkpoint(const Network& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  out.write(kMagic, 4);
  write_le<uint32_t>(out, kVersion);
  write_le<uint64_t>(out, net.config.digest());
  write_le<uint32_t>(out, static_cast<uint32_t>(net.layers.size()));
  for (const Network::Layer& l : net.layers) {
    write_le<uint32_t>(out, l.in);
    write_le<uint32_t>(out, l.out);
    for (double w : l.w) write_le<double>(out, w);
    for (double b : l.b) write_le<double>(out, b);
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

Network load_checkpoint(const NetworkConfig& expected_config, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("bad checkpoint magic: " + path);
  if (read_le<uint32_t>(in) != kVersion)
    throw std::runtime_error("unsupported checkpoint version: " + path);
  if (read_le<uint64_t>(in) != expected_config.digest())
    throw std::runtime_error("checkpoint was written with a different network config: " + path);

  Network net;
  net.config = expected_config;
  const std::vector<uint32_t> dims = expected_config.tower_dims();
  const uint32_t layer_count = read_le<uint32_t>(in);
  if (layer_count != dims.size() - 1)
    throw std::runtime_error("checkpoint layer count does not match config: " + path);
  for (uint32_t l = 0; l < layer_count; ++l) {
    Network::Layer layer;
    layer.in = read_le<uint32_t>(in);
    layer.out = read_le<uint32_t>(in);
    if (layer.in != dims[l] || layer.out != dims[l + 1])
      throw std::runtime_error("checkpoint layer shape does not match config: " + path);
    layer.w.resize(static_cast<size_t>(layer.out) * layer.in);
    layer.b.resize(layer.out);
    for (double& w : layer.w) w = read_le<double>(in);
    for (double& b : layer.b) b = read_le<double>(in);
    net.layers.push_back(std::move(layer));
  }
  in.peek();
  if (!in.eof()) throw std::runtime_error("trailing bytes in checkpoint: " + path);
  return net;
}

}  // namespace symcor
