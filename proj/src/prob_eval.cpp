#include "symcor/prob_eval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace symcor {

AssignmentTable::AssignmentTable(datalog::Program program, GroupSpec spec, Build mode)
    : program_(std::move(program)), spec_(std::move(spec)) {
  spec_.validate(program_.n_inputs());
  uint64_t count = 1;
  for (const auto& g : spec_.groups) {
    count *= g.size();
    if (count > kMaxAssignments)
      throw std::runtime_error("joint assignment count exceeds the enumeration guard");
  }
  count_ = count;
  q_ = program_.n_outputs();
  words_per_row_ = (q_ + 63) / 64;
  bits_.assign(count_ * words_per_row_, 0);

  const int64_t total = static_cast<int64_t>(count_);
  // Each rank fills its own row; safe and deterministic under OpenMP.
#pragma omp parallel for schedule(static) if (mode == Build::Parallel)
  for (int64_t rank = 0; rank < total; ++rank) {
    std::vector<uint32_t> choices = choices_of_rank(static_cast<uint64_t>(rank));
    Bitstring input = bits_of_choices(choices, spec_);
    Bitstring out = program_.evaluate(input);
    uint64_t* row = &bits_[static_cast<uint64_t>(rank) * words_per_row_];
    for (size_t j = 0; j < q_; ++j)
      if (out[j]) row[j / 64] |= uint64_t{1} << (j % 64);
  }
}

uint64_t AssignmentTable::rank_of_choices(std::span<const uint32_t> choices) const {
  if (choices.size() != spec_.groups.size())
    throw std::runtime_error("choice vector length does not match group count");
  uint64_t rank = 0;
  for (size_t gi = 0; gi < choices.size(); ++gi) {
    if (choices[gi] >= spec_.groups[gi].size())
      throw std::runtime_error("choice index out of range for group");
    rank = rank * spec_.groups[gi].size() + choices[gi];
  }
  return rank;
}

std::vector<uint32_t> AssignmentTable::choices_of_rank(uint64_t rank) const {
  std::vector<uint32_t> choices(spec_.groups.size(), 0);
  for (size_t gi = spec_.groups.size(); gi-- > 0;) {
    const uint64_t size = spec_.groups[gi].size();
    choices[gi] = static_cast<uint32_t>(rank % size);
    rank /= size;
  }
  return choices;
}

bool AssignmentTable::output_bit(uint64_t rank, size_t j) const {
  const uint64_t word = bits_[rank * words_per_row_ + j / 64];
  return (word >> (j % 64)) & 1;
}

ProbOutput prob_evaluate(const AssignmentTable& table, std::span<const double> pv) {
  const GroupSpec& spec = table.spec();
  validate_prob_vector(pv, spec);

  const size_t q = table.n_outputs();
  const size_t n = pv.size();
  const size_t groups = spec.groups.size();
  ProbOutput po;
  po.out_probs.assign(q, 0.0);
  po.jacobian.assign(q * n, 0.0);

  std::vector<uint32_t> choices(groups, 0);
  std::vector<double> sel(groups, 0.0);     // probability of the selected entry per group
  std::vector<double> prefix(groups + 1);   // prefix[g] = Π_{g'<g} sel[g']
  std::vector<double> suffix(groups + 1);   // suffix[g] = Π_{g'≥g} sel[g']

  const uint64_t count = table.assignment_count();
  for (uint64_t rank = 0; rank < count; ++rank) {
    // Mixed-radix increment keeps choices in canonical order without division.
    if (rank == 0) {
      std::fill(choices.begin(), choices.end(), 0);
    } else {
      for (size_t gi = groups; gi-- > 0;) {
        if (++choices[gi] < spec.groups[gi].size()) break;
        choices[gi] = 0;
      }
    }
    for (size_t gi = 0; gi < groups; ++gi) sel[gi] = pv[spec.groups[gi][choices[gi]]];
    prefix[0] = 1.0;
    for (size_t gi = 0; gi < groups; ++gi) prefix[gi + 1] = prefix[gi] * sel[gi];
    suffix[groups] = 1.0;
    for (size_t gi = groups; gi-- > 0;) suffix[gi] = suffix[gi + 1] * sel[gi];
    const double mass = prefix[groups];

    for (size_t j = 0; j < q; ++j) {
      if (!table.output_bit(rank, j)) continue;
      po.out_probs[j] += mass;
      // ∂mass/∂pv[selected in group gi] = Π of the other groups' selections.
      double* row = &po.jacobian[j * n];
      for (size_t gi = 0; gi < groups; ++gi)
        row[spec.groups[gi][choices[gi]]] += prefix[gi] * suffix[gi + 1];
    }
  }
  return po;
}

LossGrad output_loss_and_input_grads(const ProbOutput& po, size_t label,
                                     std::span<const double> logits, const GroupSpec& spec) {
  if (label >= po.out_probs.size()) throw std::runtime_error("output label out of range");
  const size_t n = logits.size();
  if (po.jacobian.size() != po.out_probs.size() * n)
    throw std::runtime_error("jacobian shape does not match logits length");

  LossGrad lg;
  const double p_label = po.out_probs[label];
  lg.loss = -std::log(std::max(p_label, kEpsFloor));

  // dL/d pv, then chain through the per-group softmax.
  const double dl_dp = -1.0 / std::max(p_label, kEpsFloor);
  std::vector<double> g_pv(n);
  for (size_t i = 0; i < n; ++i) g_pv[i] = dl_dp * po.jacobian[label * n + i];

  const ProbVector pv = smooth_ground(logits, spec);
  lg.grad.assign(n, 0.0);
  for (const auto& g : spec.groups) {
    double dot = 0.0;
    for (uint32_t idx : g) dot += pv[idx] * g_pv[idx];
    for (uint32_t idx : g) lg.grad[idx] = pv[idx] * (g_pv[idx] - dot);
  }
  return lg;
}

}  // namespace symcor
