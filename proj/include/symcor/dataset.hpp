#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "symcor/datalog.hpp"

namespace symcor {

using datalog::Bitstring;

struct Image {
  uint32_t height = 0;
  uint32_t width = 0;
  std::vector<float> pixels;  // grayscale in [0,1], row-major
};

// One task point: a pair of images (indices into the owning Dataset's pool),
// their digit classes, the output label y and the hidden ground-truth symbol
// encoding α_x (used only for evaluation and the Ideal synthesizer).
struct Sample {
  std::array<uint32_t, 2> image = {0, 0};
  std::array<uint8_t, 2> cls = {0, 0};
  uint32_t label = 0;
  Bitstring alpha;
};

struct Dataset {
  std::vector<Image> pool;
  std::vector<Sample> samples;

  size_t size() const { return samples.size(); }
};

enum class PairingPolicy { Uniform, SameDigit };

std::string to_string(PairingPolicy policy);
PairingPolicy pairing_from_name(const std::string& name);

// The 10 fixed 16×16 digit prototypes (seven-segment style bitmaps).
const std::array<Image, 10>& digit_glyphs();

// Canonical digit-addition symbol encoding: one-hot(d1) ++ one-hot(d2) over
// n = 20 input facts; the label indexes sum(d1+d2) in the output enumeration.
Bitstring addition_alpha(uint8_t d1, uint8_t d2);
uint32_t addition_label(uint8_t d1, uint8_t d2);

// Glyph pairs with seeded salt-and-pepper noise (each pixel is forced to 0 or
// 1 with probability noise_rate). noise_rate must lie in [0, 0.3].
Dataset generate_synthetic_dataset(size_t count, uint64_t seed, double noise_rate,
                                   PairingPolicy pairing);

struct LabeledDigits {
  std::vector<Image> images;
  std::vector<uint8_t> labels;
};

// IDX container parsing (big-endian): images magic 0x00000803, labels magic
// 0x00000801; pixel bytes normalized to [0,1].
LabeledDigits load_mnist_idx(const std::string& images_path, const std::string& labels_path);

// Pairs real digits into samples. Uniform draws images without replacement;
// SameDigit pairs equal classes, reusing at most replacement_fraction·2·count
// image slots with replacement once a class pool runs dry.
Dataset make_pairs(const LabeledDigits& digits, size_t count, uint64_t seed, PairingPolicy policy,
                   double replacement_fraction = 0.1);

// Copies one sample's image pair into a row-major double buffer of size
// 2 × height × width (batch assembly for the network).
void copy_sample_features(const Dataset& ds, size_t sample_index, double* dst);

}  // namespace symcor
