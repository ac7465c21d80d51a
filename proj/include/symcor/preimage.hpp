#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "symcor/prob_eval.hpp"
#include "symcor/rng.hpp"

namespace symcor {

// The symbol candidates p⁻¹({y}): every one-hot-per-group bitstring the
// program maps to the label. Candidates are listed in canonical assignment
// order (lexicographic by group, then choice index).
struct PreimageSet {
  size_t label = 0;
  uint64_t program_digest = 0;
  std::vector<Bitstring> candidates;
  std::vector<std::vector<uint32_t>> choices;  // per-candidate group choices
  std::vector<uint64_t> ranks;                 // canonical assignment ranks

  bool forced() const { return candidates.size() == 1; }
  size_t size() const { return candidates.size(); }
};

// Exhaustive, exact enumeration. Throws when the preimage is empty (the label
// is unreachable, which signals an inconsistent program/label pairing).
PreimageSet enumerate_preimage(const AssignmentTable& table, size_t label);

// The sole candidate when the label forces its symbol, else absent.
std::optional<Bitstring> forced_symbol(const PreimageSet& ps);

// argmax over candidates of Σ_groups log-softmax(logits)·w — the candidate
// with the highest joint probability under the current predictions. Ties go
// to the earlier candidate in canonical order.
const Bitstring& closest_candidate(const PreimageSet& ps, std::span<const double> logits,
                                   const GroupSpec& spec);

// ε(t): 1 during the warm phase, then exponentially annealed.
struct AnnealSchedule {
  int warm_epochs = 10;
  double gamma = 0.5;

  double epsilon(int epoch) const {
    if (epoch < warm_epochs) return 1.0;
    return std::pow(gamma, epoch - warm_epochs + 1);
  }
};

// One annealed random-walk step over the preimage: re-sample one uniformly
// chosen group, project the perturbed assignment to the nearest candidates
// (fewest differing groups; ties drawn uniformly), then accept the proposal
// if its cross-entropy against softmax(logits) is lower than the current
// candidate's, or with probability ε(epoch) otherwise.
const Bitstring& random_walk_step(const PreimageSet& ps, const Bitstring& current,
                                  std::span<const double> logits, int epoch,
                                  const AnnealSchedule& schedule, Rng& rng, const GroupSpec& spec);

// Per-sample cross-entropy of a one-hot-per-group target against
// softmax(logits); shared by the walk's acceptance test and the synthesizers.
double candidate_loss(std::span<const uint32_t> choices, std::span<const double> logits,
                      const GroupSpec& spec);

// Memoized preimages for every label of one program; eagerly built once at
// training start, read-only shared afterwards.
class PreimageCache {
 public:
  explicit PreimageCache(const AssignmentTable& table);

  const PreimageSet& preimage(size_t label);
  void build_all();

  const AssignmentTable& table() const { return table_; }

 private:
  const AssignmentTable& table_;
  std::vector<std::optional<PreimageSet>> sets_;
};

}  // namespace symcor
