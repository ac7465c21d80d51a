#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "symcor/datalog.hpp"

namespace symcor {

using datalog::Bitstring;

// Ordered partition of the input-fact indices {0..n-1} into categorical
// groups; the structure both grounding functions assume.
struct GroupSpec {
  std::vector<std::vector<uint32_t>> groups;

  size_t total_indices() const;
  size_t group_count() const { return groups.size(); }

  // Throws unless the groups partition exactly {0..n-1}.
  void validate(size_t n) const;

  // One group per input relation, in enumeration order. Visual addition:
  // digit1 -> indices 0..9, digit2 -> indices 10..19.
  static GroupSpec from_program(const datalog::Program& program);

  uint64_t digest() const;
};

// Probabilities over input facts; sums to 1 within each group.
using ProbVector = std::vector<double>;

// g̃: softmax applied independently within each group.
ProbVector smooth_ground(std::span<const double> logits, const GroupSpec& spec);

// g: per-group argmax one-hot; ties go to the lowest index.
Bitstring hard_ground(std::span<const double> logits, const GroupSpec& spec);

// Throws if pv has entries outside [0,1] or a group sum off 1 by more than tol.
void validate_prob_vector(std::span<const double> pv, const GroupSpec& spec, double tol = 1e-9);

bool is_one_hot_per_group(const Bitstring& bits, const GroupSpec& spec);

// Position (within its group) of the set bit, per group. Throws unless
// one-hot per group.
std::vector<uint32_t> choices_of(const Bitstring& bits, const GroupSpec& spec);
Bitstring bits_of_choices(std::span<const uint32_t> choices, const GroupSpec& spec);

}  // namespace symcor
