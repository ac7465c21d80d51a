#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "oracles.hpp"
#include "symcor/kernels.hpp"
#include "symcor/network.hpp"
#include "symcor/rng.hpp"

using namespace symcor;
using symcor::Rng;

namespace {

NetworkConfig tiny_config() {
  NetworkConfig cfg;
  cfg.image_height = 2;
  cfg.image_width = 2;
  cfg.pair_arity = 2;
  cfg.hidden_sizes = {3};
  cfg.classes_per_group = 2;
  return cfg;
}

std::vector<double> random_batch(Rng& rng, const NetworkConfig& cfg, size_t batch) {
  std::vector<double> x(batch * cfg.pair_arity * cfg.input_size());
  for (double& v : x) v = rng.uniform();
  return x;
}

// Flatten all parameters for finite differencing.
std::vector<double*> parameter_slots(Network& net) {
  std::vector<double*> slots;
  for (auto& layer : net.layers) {
    for (double& v : layer.w) slots.push_back(&v);
    for (double& v : layer.b) slots.push_back(&v);
  }
  return slots;
}

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("gemm matches a hand-computed 2x2 product") {
  const std::vector<double> a = {1, 2, 3, 4};  // 2x2
  const std::vector<double> b = {5, 6, 7, 8};  // 2x2
  std::vector<double> c(4, -1.0);
  kernels::gemm_serial(a.data(), b.data(), c.data(), 2, 2, 2);
  CHECK(c == std::vector<double>{19, 22, 43, 50});

  // trans_b: physical B is n×k, so op(B) = Bᵀ.
  kernels::gemm_serial(a.data(), b.data(), c.data(), 2, 2, 2, false, true);
  CHECK(c == std::vector<double>{17, 23, 39, 53});

  // trans_a: physical A is k×m.
  kernels::gemm_serial(a.data(), b.data(), c.data(), 2, 2, 2, true, false);
  CHECK(c == std::vector<double>{26, 30, 38, 44});
}

TEST_CASE("serial and parallel gemm agree bit for bit") {
  Rng rng(808);
  for (int iter = 0; iter < 20; ++iter) {
    const size_t m = 1 + rng.uniform_index(40);
    const size_t k = 1 + rng.uniform_index(40);
    const size_t n = 1 + rng.uniform_index(40);
    const bool ta = rng.bernoulli(0.5), tb = rng.bernoulli(0.5);
    std::vector<double> a(m * k), b(k * n);
    for (double& v : a) v = rng.gaussian();
    for (double& v : b) v = rng.gaussian();
    std::vector<double> c1(m * n), c2(m * n);
    kernels::gemm_serial(a.data(), b.data(), c1.data(), m, k, n, ta, tb);
    kernels::gemm_parallel(a.data(), b.data(), c2.data(), m, k, n, ta, tb);
    CHECK(c1 == c2);  // exact equality, not approximate
    std::vector<double> c3(m * n);
    kernels::gemm(a.data(), b.data(), c3.data(), m, k, n, ta, tb);
    CHECK(c1 == c3);
  }
}

TEST_CASE("network configuration shapes") {
  const NetworkConfig cfg;  // defaults: 16x16, pair 2, hidden {128,64}, 10 classes
  CHECK(cfg.input_size() == 256);
  CHECK(cfg.logit_count() == 20);
  CHECK(cfg.tower_dims() == std::vector<uint32_t>{256, 128, 64, 10});
  const Network net = init_network(cfg, 1);
  CHECK(net.layers.size() == 3);
  CHECK(net.parameter_count() == 256 * 128 + 128 + 128 * 64 + 64 + 64 * 10 + 10);
}

TEST_CASE("initialization is deterministic in (config, seed)") {
  const NetworkConfig cfg = tiny_config();
  const Network a = init_network(cfg, 7);
  const Network b = init_network(cfg, 7);
  const Network c = init_network(cfg, 8);
  REQUIRE(a.layers.size() == b.layers.size());
  for (size_t l = 0; l < a.layers.size(); ++l) {
    CHECK(a.layers[l].w == b.layers[l].w);
    CHECK(a.layers[l].b == b.layers[l].b);
  }
  CHECK(a.layers[0].w != c.layers[0].w);

  // Fan-in bound: |w| ≤ 1/√in for every layer.
  for (const auto& layer : a.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in));
    for (double v : layer.w) CHECK(std::abs(v) <= bound);
    for (double v : layer.b) CHECK(std::abs(v) <= bound);
  }
}

TEST_CASE("zero weights produce zero logits") {
  const NetworkConfig cfg = tiny_config();
  Network net = init_network(cfg, 1);
  for (auto& layer : net.layers) {
    std::fill(layer.w.begin(), layer.w.end(), 0.0);
    std::fill(layer.b.begin(), layer.b.end(), 0.0);
  }
  Rng rng(4);
  const auto x = random_batch(rng, cfg, 3);
  const ForwardCache cache = forward(net, x, 3);
  REQUIRE(cache.logits.size() == 3 * cfg.logit_count());
  for (double v : cache.logits) CHECK(v == 0.0);
}

TEST_CASE("logit layout concatenates the tower output per image") {
  // A linear tower (no hidden layers) that copies one pixel per class makes
  // the mapping auditable: logits[s][i*classes + c] = w_c · image_{s,i}.
  NetworkConfig cfg = tiny_config();
  cfg.hidden_sizes = {};
  Network net = init_network(cfg, 1);
  REQUIRE(net.layers.size() == 1);
  std::fill(net.layers[0].w.begin(), net.layers[0].w.end(), 0.0);
  std::fill(net.layers[0].b.begin(), net.layers[0].b.end(), 0.0);
  net.layers[0].w[0 * 4 + 0] = 1.0;  // class 0 reads pixel 0
  net.layers[0].w[1 * 4 + 3] = 2.0;  // class 1 reads pixel 3

  const std::vector<double> x = {
      0.5, 0, 0, 0.25,   // sample 0, image 0
      0.125, 0, 0, 1.0,  // sample 0, image 1
  };
  const ForwardCache cache = forward(net, x, 1);
  REQUIRE(cache.logits.size() == 4);
  CHECK(cache.logits[0] == doctest::Approx(0.5));    // image 0, class 0
  CHECK(cache.logits[1] == doctest::Approx(0.5));    // image 0, class 1 (2·0.25)
  CHECK(cache.logits[2] == doctest::Approx(0.125));  // image 1, class 0
  CHECK(cache.logits[3] == doctest::Approx(2.0));    // image 1, class 1
}

TEST_CASE("forward is row-independent: batching never changes a sample's logits") {
  const NetworkConfig cfg = tiny_config();
  const Network net = init_network(cfg, 123);
  Rng rng(5);
  const size_t batch = 16;
  const auto x = random_batch(rng, cfg, batch);
  const ForwardCache all = forward(net, x, batch);
  const size_t stride = cfg.pair_arity * cfg.input_size();
  for (size_t s = 0; s < batch; ++s) {
    const std::vector<double> one(x.begin() + s * stride, x.begin() + (s + 1) * stride);
    const ForwardCache single = forward(net, one, 1);
    for (size_t i = 0; i < cfg.logit_count(); ++i)
      CHECK(single.logits[i] == all.logits[s * cfg.logit_count() + i]);
  }
}

TEST_CASE("relu tower matches a straightforward reference forward") {
  const NetworkConfig cfg = tiny_config();
  const Network net = init_network(cfg, 9);
  Rng rng(6);
  const auto x = random_batch(rng, cfg, 2);
  const ForwardCache cache = forward(net, x, 2);

  // Reference: per image, naive loops.
  for (size_t row = 0; row < 2 * cfg.pair_arity; ++row) {
    std::vector<double> act(x.begin() + row * cfg.input_size(),
                            x.begin() + (row + 1) * cfg.input_size());
    for (size_t l = 0; l < net.layers.size(); ++l) {
      const auto& layer = net.layers[l];
      std::vector<double> next(layer.out);
      for (size_t o = 0; o < layer.out; ++o) {
        double acc = layer.b[o];
        for (size_t i = 0; i < layer.in; ++i) acc += layer.w[o * layer.in + i] * act[i];
        next[o] = (l + 1 < net.layers.size() && acc < 0.0) ? 0.0 : acc;
      }
      act = std::move(next);
    }
    const size_t s = row / cfg.pair_arity, img = row % cfg.pair_arity;
    for (size_t c = 0; c < cfg.classes_per_group; ++c) {
      const double got =
          cache.logits[s * cfg.logit_count() + img * cfg.classes_per_group + c];
      CHECK(got == doctest::Approx(act[c]).epsilon(1e-12));
    }
  }
}

TEST_CASE("backward matches finite differences over all parameters") {
  const NetworkConfig cfg = tiny_config();
  Network net = init_network(cfg, 77);
  Rng rng(8);
  const size_t batch = 3;
  const auto x = random_batch(rng, cfg, batch);
  std::vector<double> gl(batch * cfg.logit_count());
  for (double& v : gl) v = rng.gaussian();

  const ForwardCache cache = forward(net, x, batch);
  const Gradients grads = backward(net, cache, gl);

  // Scalar objective: mean over samples of ⟨g_logits_s, z_s⟩.
  auto objective = [&]() {
    const ForwardCache c2 = forward(net, x, batch);
    double acc = 0.0;
    for (size_t i = 0; i < gl.size(); ++i) acc += gl[i] * c2.logits[i];
    return acc / static_cast<double>(batch);
  };

  // Analytic gradients in the same order parameter_slots walks the network.
  std::vector<double> analytic;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    analytic.insert(analytic.end(), grads.dw[l].begin(), grads.dw[l].end());
    analytic.insert(analytic.end(), grads.db[l].begin(), grads.db[l].end());
  }

  std::vector<double> numeric;
  const double h = 1e-6;
  for (double* p : parameter_slots(net)) {
    const double saved = *p;
    *p = saved + h;
    const double fp = objective();
    *p = saved - h;
    const double fm = objective();
    *p = saved;
    numeric.push_back((fp - fm) / (2 * h));
  }
  REQUIRE(analytic.size() == numeric.size());
  CHECK(oracles::rel_error(analytic, numeric) <= 1e-4);
}

TEST_CASE("gradients of a duplicated sample equal the single-sample gradients") {
  // The 1/batch scaling means batch {x, x} gives the same mean gradient as {x}.
  const NetworkConfig cfg = tiny_config();
  Network net = init_network(cfg, 19);
  Rng rng(9);
  const auto one = random_batch(rng, cfg, 1);
  std::vector<double> two(one);
  two.insert(two.end(), one.begin(), one.end());
  std::vector<double> gl1(cfg.logit_count());
  for (double& v : gl1) v = rng.gaussian();
  std::vector<double> gl2(gl1);
  gl2.insert(gl2.end(), gl1.begin(), gl1.end());

  const ForwardCache c1 = forward(net, one, 1);
  const ForwardCache c2 = forward(net, two, 2);
  const Gradients g1 = backward(net, c1, gl1);
  const Gradients g2 = backward(net, c2, gl2);
  for (size_t l = 0; l < g1.dw.size(); ++l) {
    CHECK(oracles::rel_error(g1.dw[l], g2.dw[l]) <= 1e-12);
    CHECK(oracles::rel_error(g1.db[l], g2.db[l]) <= 1e-12);
  }
}

TEST_CASE("backward rejects a stale forward cache") {
  const NetworkConfig cfg = tiny_config();
  Network net = init_network(cfg, 3);
  Rng rng(10);
  const auto x = random_batch(rng, cfg, 1);
  const ForwardCache cache = forward(net, x, 1);
  std::vector<double> gl(cfg.logit_count(), 1.0);

  AdamState adam = make_adam(net, 1e-3);
  const Gradients grads = backward(net, cache, gl);
  REQUIRE(adam_step(net, grads, adam));
  CHECK_THROWS(backward(net, cache, gl));  // param_version moved on
}

TEST_CASE("adam: zero gradient leaves parameters unchanged") {
  const NetworkConfig cfg = tiny_config();
  Network net = init_network(cfg, 4);
  const Network before = net;
  Gradients zero;
  for (const auto& layer : net.layers) {
    zero.dw.emplace_back(layer.w.size(), 0.0);
    zero.db.emplace_back(layer.b.size(), 0.0);
  }
  AdamState adam = make_adam(net, 1e-2);
  REQUIRE(adam_step(net, zero, adam));
  for (size_t l = 0; l < net.layers.size(); ++l) {
    CHECK(net.layers[l].w == before.layers[l].w);
    CHECK(net.layers[l].b == before.layers[l].b);
  }
  CHECK(net.param_version == before.param_version + 1);
}

TEST_CASE("adam: first step moves each parameter by about lr against the gradient") {
  const NetworkConfig cfg = tiny_config();
  Network net = init_network(cfg, 5);
  const double w0 = net.layers[0].w[0];
  Gradients grads;
  for (const auto& layer : net.layers) {
    grads.dw.emplace_back(layer.w.size(), 0.0);
    grads.db.emplace_back(layer.b.size(), 0.0);
  }
  grads.dw[0][0] = 0.37;  // any nonzero value: bias correction gives m̂/√v̂ = sign
  AdamState adam = make_adam(net, 1e-3);
  REQUIRE(adam_step(net, grads, adam));
  CHECK(net.layers[0].w[0] ==
        doctest::Approx(w0 - 1e-3).epsilon(1e-6));  // within ε of a full lr step
  CHECK(net.layers[0].b[0] == init_network(cfg, 5).layers[0].b[0]);
}

TEST_CASE("adam: non-finite gradients are refused atomically") {
  const NetworkConfig cfg = tiny_config();
  Network net = init_network(cfg, 6);
  const Network before = net;
  Gradients grads;
  for (const auto& layer : net.layers) {
    grads.dw.emplace_back(layer.w.size(), 0.1);
    grads.db.emplace_back(layer.b.size(), 0.1);
  }
  grads.dw[1][2] = std::numeric_limits<double>::quiet_NaN();
  AdamState adam = make_adam(net, 1e-3);
  CHECK_FALSE(adam_step(net, grads, adam));
  CHECK(adam.step == 0);
  for (size_t l = 0; l < net.layers.size(); ++l) {
    CHECK(net.layers[l].w == before.layers[l].w);
    CHECK(net.layers[l].b == before.layers[l].b);
  }
  CHECK(net.param_version == before.param_version);
}

TEST_CASE("adam rejects mis-shaped gradients") {
  const NetworkConfig cfg = tiny_config();
  Network net = init_network(cfg, 6);
  Gradients grads;
  grads.dw.emplace_back(3, 0.0);
  grads.db.emplace_back(3, 0.0);
  AdamState adam = make_adam(net, 1e-3);
  CHECK_THROWS(adam_step(net, grads, adam));
}

TEST_CASE("checkpoint roundtrip preserves every parameter bit") {
  const NetworkConfig cfg = tiny_config();
  const Network net = init_network(cfg, 1234);
  const auto path = temp_file("symcor_ckpt_roundtrip.symc");
  save_checkpoint(net, path.string());
  const Network back = load_checkpoint(cfg, path.string());
  REQUIRE(back.layers.size() == net.layers.size());
  for (size_t l = 0; l < net.layers.size(); ++l) {
    CHECK(back.layers[l].w == net.layers[l].w);
    CHECK(back.layers[l].b == net.layers[l].b);
  }
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loading rejects corruption and mismatches") {
  const NetworkConfig cfg = tiny_config();
  const Network net = init_network(cfg, 55);
  const auto path = temp_file("symcor_ckpt_bad.symc");
  save_checkpoint(net, path.string());

  // Config digest mismatch: a different architecture must refuse the file.
  NetworkConfig other = cfg;
  other.hidden_sizes = {4};
  CHECK_THROWS(load_checkpoint(other, path.string()));

  // Corrupted magic.
  {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.put('X');
  }
  CHECK_THROWS(load_checkpoint(cfg, path.string()));

  // Truncation.
  save_checkpoint(net, path.string());
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full - 9);
  CHECK_THROWS(load_checkpoint(cfg, path.string()));

  // Trailing garbage.
  save_checkpoint(net, path.string());
  {
    std::ofstream f(path, std::ios::app | std::ios::binary);
    f << "tail";
  }
  CHECK_THROWS(load_checkpoint(cfg, path.string()));

  CHECK_THROWS(load_checkpoint(cfg, (temp_file("symcor_missing.symc")).string()));
  std::filesystem::remove(path);
}
