#include "symcor/grounding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "symcor/digest.hpp"

namespace symcor {

size_t GroupSpec::total_indices() const {
  size_t n = 0;
  for (const auto& g : groups) n += g.size();
  return n;
}

void GroupSpec::validate(size_t n) const {
  std::vector<uint8_t> seen(n, 0);
  for (const auto& g : groups) {
    if (g.empty()) throw std::runtime_error("group spec: empty group");
    for (uint32_t idx : g) {
      if (idx >= n) throw std::runtime_error("group spec: index out of range");
      if (seen[idx]) throw std::runtime_error("group spec: index appears twice");
      seen[idx] = 1;
    }
  }
  if (total_indices() != n) throw std::runtime_error("group spec: indices missing from partition");
}

GroupSpec GroupSpec::from_program(const datalog::Program& program) {
  GroupSpec spec;
  int64_t last_rel = -1;
  for (uint32_t i = 0; i < program.n_inputs(); ++i) {
    uint32_t rel = program.input_enum()[i].relation;
    if (static_cast<int64_t>(rel) != last_rel) {
      // Relations are expected to be contiguous in the enumeration; a relation
      // reappearing later would start a second group and fail validate().
      spec.groups.emplace_back();
      last_rel = rel;
    }
    spec.groups.back().push_back(i);
  }
  spec.validate(program.n_inputs());
  for (size_t a = 0; a < spec.groups.size(); ++a)
    for (size_t b = a + 1; b < spec.groups.size(); ++b)
      if (program.input_enum()[spec.groups[a][0]].relation ==
          program.input_enum()[spec.groups[b][0]].relation)
        throw std::runtime_error("group spec: input relation split across enumeration blocks");
  return spec;
}

uint64_t GroupSpec::digest() const {
  Digest d;
  d.u64(groups.size());
  for (const auto& g : groups) {
    d.u64(g.size());
    for (uint32_t idx : g) d.u64(idx);
  }
  return d.value();
}

ProbVector smooth_ground(std::span<const double> logits, const GroupSpec& spec) {
  spec.validate(logits.size());
  ProbVector pv(logits.size(), 0.0);
  for (const auto& g : spec.groups) {
    double hi = logits[g[0]];
    for (uint32_t idx : g) hi = std::max(hi, logits[idx]);
    double sum = 0.0;
    for (uint32_t idx : g) {
      pv[idx] = std::exp(logits[idx] - hi);
      sum += pv[idx];
    }
    for (uint32_t idx : g) pv[idx] /= sum;
  }
  return pv;
}

Bitstring hard_ground(std::span<const double> logits, const GroupSpec& spec) {
  spec.validate(logits.size());
  Bitstring bits(logits.size(), 0);
  for (const auto& g : spec.groups) {
    uint32_t best = g[0];
    for (uint32_t idx : g)
      if (logits[idx] > logits[best] || (logits[idx] == logits[best] && idx < best)) best = idx;
    bits[best] = 1;
  }
  return bits;
}

void validate_prob_vector(std::span<const double> pv, const GroupSpec& spec, double tol) {
  spec.validate(pv.size());
  for (const auto& g : spec.groups) {
    double sum = 0.0;
    for (uint32_t idx : g) {
      if (!(pv[idx] >= 0.0 && pv[idx] <= 1.0))
        throw std::runtime_error("probability vector entry outside [0,1]");
      sum += pv[idx];
    }
    if (std::abs(sum - 1.0) > tol)
      throw std::runtime_error("probability vector group does not sum to 1");
  }
}

bool is_one_hot_per_group(const Bitstring& bits, const GroupSpec& spec) {
  if (bits.size() != spec.total_indices()) return false;
  for (const auto& g : spec.groups) {
    int set = 0;
    for (uint32_t idx : g) set += bits[idx] ? 1 : 0;
    if (set != 1) return false;
  }
  return true;
}

std::vector<uint32_t> choices_of(const Bitstring& bits, const GroupSpec& spec) {
  if (!is_one_hot_per_group(bits, spec))
    throw std::runtime_error("bitstring is not one-hot per group");
  std::vector<uint32_t> choices(spec.groups.size(), 0);
  for (size_t gi = 0; gi < spec.groups.size(); ++gi)
    for (uint32_t k = 0; k < spec.groups[gi].size(); ++k)
      if (bits[spec.groups[gi][k]]) choices[gi] = k;
  return choices;
}

Bitstring bits_of_choices(std::span<const uint32_t> choices, const GroupSpec& spec) {
  if (choices.size() != spec.groups.size())
    throw std::runtime_error("choice vector length does not match group count");
  Bitstring bits(spec.total_indices(), 0);
  for (size_t gi = 0; gi < spec.groups.size(); ++gi) {
    if (choices[gi] >= spec.groups[gi].size())
      throw std::runtime_error("choice index out of range for group");
    bits[spec.groups[gi][choices[gi]]] = 1;
  }
  return bits;
}

}  // namespace symcor
