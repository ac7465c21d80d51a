#include "symcor/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "symcor/rng.hpp"

namespace symcor {

std::string to_string(PairingPolicy policy) {
  return policy == PairingPolicy::Uniform ? "uniform" : "same-digit";
}

PairingPolicy pairing_from_name(const std::string& name) {
  if (name == "uniform") return PairingPolicy::Uniform;
  if (name == "same-digit") return PairingPolicy::SameDigit;
  throw std::runtime_error("unknown pairing policy '" + name +
                           "' (expected uniform|same-digit)");
}

namespace {

constexpr uint32_t kGlyphSize = 16;

// Seven-segment style prototypes on a 16×16 grid. Segment order:
// top, top-left, top-right, middle, bottom-left, bottom-right, bottom.
constexpr uint8_t kSegments[10][7] = {
    {1, 1, 1, 0, 1, 1, 1},  // 0
    {0, 0, 1, 0, 0, 1, 0},  // 1
    {1, 0, 1, 1, 1, 0, 1},  // 2
    {1, 0, 1, 1, 0, 1, 1},  // 3
    {0, 1, 1, 1, 0, 1, 0},  // 4
    {1, 1, 0, 1, 0, 1, 1},  // 5
    {1, 1, 0, 1, 1, 1, 1},  // 6
    {1, 0, 1, 0, 0, 1, 0},  // 7
    {1, 1, 1, 1, 1, 1, 1},  // 8
    {1, 1, 1, 1, 0, 1, 1},  // 9
};

Image render_glyph(int digit) {
  Image img;
  img.height = kGlyphSize;
  img.width = kGlyphSize;
  img.pixels.assign(kGlyphSize * kGlyphSize, 0.0f);
  auto fill = [&](uint32_t r0, uint32_t r1, uint32_t c0, uint32_t c1) {
    for (uint32_t r = r0; r <= r1; ++r)
      for (uint32_t c = c0; c <= c1; ++c) img.pixels[r * kGlyphSize + c] = 1.0f;
  };
  const uint8_t* seg = kSegments[digit];
  if (seg[0]) fill(2, 3, 4, 11);    // top
  if (seg[1]) fill(2, 8, 3, 4);     // top-left
  if (seg[2]) fill(2, 8, 11, 12);   // top-right
  if (seg[3]) fill(7, 8, 4, 11);    // middle
  if (seg[4]) fill(7, 13, 3, 4);    // bottom-left
  if (seg[5]) fill(7, 13, 11, 12);  // bottom-right
  if (seg[6]) fill(12, 13, 4, 11);  // bottom
  return img;
}

}  // namespace

const std::array<Image, 10>& digit_glyphs() {
  static const std::array<Image, 10> glyphs = [] {
    std::array<Image, 10> g;
    for (int d = 0; d < 10; ++d) g[d] = render_glyph(d);
    return g;
  }();
  return glyphs;
}

Bitstring addition_alpha(uint8_t d1, uint8_t d2) {
  Bitstring alpha(20, 0);
  alpha[d1] = 1;
  alpha[10 + d2] = 1;
  return alpha;
}

uint32_t addition_label(uint8_t d1, uint8_t d2) { return d1 + d2; }

namespace {

Image noisy_glyph(uint8_t digit, double noise_rate, Rng& rng) {
  Image img = digit_glyphs()[digit];
  for (float& px : img.pixels)
    if (rng.bernoulli(noise_rate)) px = rng.bernoulli(0.5) ? 1.0f : 0.0f;
  return img;
}

Sample make_addition_sample(uint32_t img1, uint32_t img2, uint8_t d1, uint8_t d2) {
  Sample s;
  s.image = {img1, img2};
  s.cls = {d1, d2};
  s.label = addition_label(d1, d2);
  s.alpha = addition_alpha(d1, d2);
  return s;
}

}  // namespace

Dataset generate_synthetic_dataset(size_t count, uint64_t seed, double noise_rate,
                                   PairingPolicy pairing) {
  if (!(noise_rate >= 0.0 && noise_rate <= 0.3))
    throw std::runtime_error("noise rate must lie in [0, 0.3]");
  Dataset ds;
  ds.pool.reserve(2 * count);
  ds.samples.reserve(count);
  Rng rng(seed);
  for (size_t i = 0; i < count; ++i) {
    const auto d1 = static_cast<uint8_t>(rng.uniform_index(10));
    const auto d2 = pairing == PairingPolicy::SameDigit
                        ? d1
                        : static_cast<uint8_t>(rng.uniform_index(10));
    const auto img1 = static_cast<uint32_t>(ds.pool.size());
    ds.pool.push_back(noisy_glyph(d1, noise_rate, rng));
    const auto img2 = static_cast<uint32_t>(ds.pool.size());
    ds.pool.push_back(noisy_glyph(d2, noise_rate, rng));
    ds.samples.push_back(make_addition_sample(img1, img2, d1, d2));
  }
  return ds;
}

namespace {

uint32_t read_be32(std::ifstream& in, const std::string& path) {
  unsigned char buf[4];
  in.read(reinterpret_cast<char*>(buf), 4);
  if (!in) throw std::runtime_error("truncated IDX file: " + path);
  return (uint32_t{buf[0]} << 24) | (uint32_t{buf[1]} << 16) | (uint32_t{buf[2]} << 8) |
         uint32_t{buf[3]};
}

}  // namespace

LabeledDigits load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream imgs(images_path, std::ios::binary);
  if (!imgs) throw std::runtime_error("cannot open IDX image file: " + images_path);
  if (read_be32(imgs, images_path) != 0x00000803u)
    throw std::runtime_error("bad IDX image magic in " + images_path);
  const uint32_t count = read_be32(imgs, images_path);
  const uint32_t rows = read_be32(imgs, images_path);
  const uint32_t cols = read_be32(imgs, images_path);

  std::ifstream labels(labels_path, std::ios::binary);
  if (!labels) throw std::runtime_error("cannot open IDX label file: " + labels_path);
  if (read_be32(labels, labels_path) != 0x00000801u)
    throw std::runtime_error("bad IDX label magic in " + labels_path);
  const uint32_t label_count = read_be32(labels, labels_path);
  if (label_count != count)
    throw std::runtime_error("IDX image/label counts differ: " + std::to_string(count) + " vs " +
                             std::to_string(label_count));

  LabeledDigits out;
  out.images.resize(count);
  out.labels.resize(count);
  std::vector<unsigned char> buf(static_cast<size_t>(rows) * cols);
  for (uint32_t i = 0; i < count; ++i) {
    imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!imgs) throw std::runtime_error("truncated IDX image file: " + images_path);
    Image& img = out.images[i];
    img.height = rows;
    img.width = cols;
    img.pixels.resize(buf.size());
    for (size_t p = 0; p < buf.size(); ++p) img.pixels[p] = static_cast<float>(buf[p]) / 255.0f;
  }
  labels.read(reinterpret_cast<char*>(out.labels.data()), count);
  if (!labels) throw std::runtime_error("truncated IDX label file: " + labels_path);
  for (uint8_t l : out.labels)
    if (l > 9) throw std::runtime_error("IDX label outside 0..9 in " + labels_path);
  return out;
}

Dataset make_pairs(const LabeledDigits& digits, size_t count, uint64_t seed, PairingPolicy policy,
                   double replacement_fraction) {
  if (digits.images.size() != digits.labels.size())
    throw std::runtime_error("digit image/label counts differ");
  Dataset ds;
  ds.pool.reserve(2 * count);
  ds.samples.reserve(count);
  Rng rng(seed);

  auto add_pair = [&](uint32_t src1, uint32_t src2) {
    const auto img1 = static_cast<uint32_t>(ds.pool.size());
    ds.pool.push_back(digits.images[src1]);
    const auto img2 = static_cast<uint32_t>(ds.pool.size());
    ds.pool.push_back(digits.images[src2]);
    ds.samples.push_back(
        make_addition_sample(img1, img2, digits.labels[src1], digits.labels[src2]));
  };

  if (policy == PairingPolicy::Uniform) {
    if (2 * count > digits.images.size())
      throw std::runtime_error("not enough digits to pair without replacement");
    std::vector<uint32_t> order(digits.images.size());
    std::iota(order.begin(), order.end(), 0);
    // Fisher-Yates with the seeded stream (std::shuffle is not portable).
    for (size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.uniform_index(i)]);
    for (size_t s = 0; s < count; ++s) add_pair(order[2 * s], order[2 * s + 1]);
    return ds;
  }

  // Same-digit policy: classes drawn uniformly; images come from per-class
  // shuffled pools without replacement until a pool runs dry, then a bounded
  // number of slots re-draw from the full class with replacement.
  std::array<std::vector<uint32_t>, 10> by_class;
  for (uint32_t i = 0; i < digits.images.size(); ++i) by_class[digits.labels[i]].push_back(i);
  std::array<std::vector<uint32_t>, 10> pool = by_class;
  for (auto& p : pool)
    for (size_t i = p.size(); i > 1; --i) std::swap(p[i - 1], p[rng.uniform_index(i)]);
  size_t reuse_budget = static_cast<size_t>(replacement_fraction * 2.0 * static_cast<double>(count));

  auto draw_class_image = [&](uint8_t c) -> uint32_t {
    if (!pool[c].empty()) {
      uint32_t idx = pool[c].back();
      pool[c].pop_back();
      return idx;
    }
    if (by_class[c].empty()) throw std::runtime_error("no digits of a requested class");
    if (reuse_budget == 0)
      throw std::runtime_error("not enough digits for same-digit pairing within the replacement budget");
    --reuse_budget;
    return by_class[c][rng.uniform_index(by_class[c].size())];
  };

  for (size_t s = 0; s < count; ++s) {
    const auto c = static_cast<uint8_t>(rng.uniform_index(10));
    const uint32_t src1 = draw_class_image(c);
    const uint32_t src2 = draw_class_image(c);
    add_pair(src1, src2);
  }
  return ds;
}

void copy_sample_features(const Dataset& ds, size_t sample_index, double* dst) {
  const Sample& s = ds.samples[sample_index];
  size_t off = 0;
  for (uint32_t idx : s.image) {
    const Image& img = ds.pool[idx];
    for (float px : img.pixels) dst[off++] = static_cast<double>(px);
  }
}

}  // namespace symcor
