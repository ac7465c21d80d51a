#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "symcor/datalog.hpp"
#include "symcor/grounding.hpp"

namespace symcor {

// Cached boolean evaluations of a program over every one-hot-per-group joint
// assignment. Ranks follow the canonical order: lexicographic by group, then
// choice index within the group (group 0 varies slowest).
class AssignmentTable {
 public:
  static constexpr uint64_t kMaxAssignments = 1'000'000;

  enum class Build { Serial, Parallel };

  AssignmentTable(datalog::Program program, GroupSpec spec, Build mode = Build::Parallel);

  const datalog::Program& program() const { return program_; }
  const GroupSpec& spec() const { return spec_; }
  size_t assignment_count() const { return count_; }
  size_t n_outputs() const { return q_; }

  uint64_t rank_of_choices(std::span<const uint32_t> choices) const;
  std::vector<uint32_t> choices_of_rank(uint64_t rank) const;
  bool output_bit(uint64_t rank, size_t j) const;

 private:
  datalog::Program program_;
  GroupSpec spec_;
  size_t count_ = 0;
  size_t q_ = 0;
  size_t words_per_row_ = 0;
  std::vector<uint64_t> bits_;  // count_ rows of packed output bitstrings
};

// Output-fact probabilities with their exact Jacobian w.r.t. the input-fact
// probabilities.
struct ProbOutput {
  std::vector<double> out_probs;  // length q
  std::vector<double> jacobian;   // q×n row-major: jacobian[j*n + i] = ∂out_probs[j]/∂pv[i]
};

// p̃ over a probabilistic database: out_probs[j] = Σ_assignments (Π selected
// probs)·[output bit j], exactly, by exhaustive marginalization.
ProbOutput prob_evaluate(const AssignmentTable& table, std::span<const double> pv);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // w.r.t. logits, length n
};

// Composed NLL of the labeled output fact and its gradient through the
// marginalization and the per-group softmax: loss = −ln(max(P[label], ε)),
// with ε = 1e-12 also flooring the 1/P factor of the gradient so it keeps
// pointing toward raising the label probability.
LossGrad output_loss_and_input_grads(const ProbOutput& po, size_t label,
                                     std::span<const double> logits, const GroupSpec& spec);

inline constexpr double kEpsFloor = 1e-12;

}  // namespace symcor
