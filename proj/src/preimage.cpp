#include "symcor/preimage.hpp"

#include <algorithm>
#include <stdexcept>

namespace symcor {

PreimageSet enumerate_preimage(const AssignmentTable& table, size_t label) {
  if (label >= table.n_outputs()) throw std::runtime_error("output label out of range");
  PreimageSet ps;
  ps.label = label;
  ps.program_digest = table.program().digest();
  const uint64_t count = table.assignment_count();
  for (uint64_t rank = 0; rank < count; ++rank) {
    if (!table.output_bit(rank, label)) continue;
    std::vector<uint32_t> choices = table.choices_of_rank(rank);
    ps.candidates.push_back(bits_of_choices(choices, table.spec()));
    ps.choices.push_back(std::move(choices));
    ps.ranks.push_back(rank);
  }
  if (ps.candidates.empty())
    throw std::runtime_error("empty preimage: label " +
                             table.program().atom_text(table.program().output_enum()[label]) +
                             " is unreachable");
  return ps;
}

std::optional<Bitstring> forced_symbol(const PreimageSet& ps) {
  if (ps.candidates.size() == 1) return ps.candidates[0];
  return std::nullopt;
}

namespace {

// Per-group log-softmax scores; score(w) = Σ log p(selected), so argmax score
// = argmin cross-entropy.
std::vector<double> log_softmax(std::span<const double> logits, const GroupSpec& spec) {
  std::vector<double> ls(logits.size());
  for (const auto& g : spec.groups) {
    double hi = logits[g[0]];
    for (uint32_t idx : g) hi = std::max(hi, logits[idx]);
    double sum = 0.0;
    for (uint32_t idx : g) sum += std::exp(logits[idx] - hi);
    const double log_z = hi + std::log(sum);
    for (uint32_t idx : g) ls[idx] = logits[idx] - log_z;
  }
  return ls;
}

double score_choices(std::span<const uint32_t> choices, const std::vector<double>& ls,
                     const GroupSpec& spec) {
  double s = 0.0;
  for (size_t gi = 0; gi < spec.groups.size(); ++gi) s += ls[spec.groups[gi][choices[gi]]];
  return s;
}

}  // namespace

double candidate_loss(std::span<const uint32_t> choices, std::span<const double> logits,
                      const GroupSpec& spec) {
  return -score_choices(choices, log_softmax(logits, spec), spec);
}

const Bitstring& closest_candidate(const PreimageSet& ps, std::span<const double> logits,
                                   const GroupSpec& spec) {
  if (ps.candidates.empty()) throw std::runtime_error("empty preimage");
  const std::vector<double> ls = log_softmax(logits, spec);
  size_t best = 0;
  double best_score = score_choices(ps.choices[0], ls, spec);
  for (size_t c = 1; c < ps.candidates.size(); ++c) {
    const double s = score_choices(ps.choices[c], ls, spec);
    if (s > best_score) {  // strict: ties keep the earlier canonical candidate
      best = c;
      best_score = s;
    }
  }
  return ps.candidates[best];
}

const Bitstring& random_walk_step(const PreimageSet& ps, const Bitstring& current,
                                  std::span<const double> logits, int epoch,
                                  const AnnealSchedule& schedule, Rng& rng,
                                  const GroupSpec& spec) {
  // Locate the current candidate.
  size_t cur = ps.candidates.size();
  for (size_t c = 0; c < ps.candidates.size(); ++c)
    if (ps.candidates[c] == current) {
      cur = c;
      break;
    }
  if (cur == ps.candidates.size())
    throw std::runtime_error("random walk: current bitstring is not in the preimage");

  // Propose: re-sample one uniformly chosen group uniformly at random.
  std::vector<uint32_t> perturbed = ps.choices[cur];
  const size_t gi = static_cast<size_t>(rng.uniform_index(spec.groups.size()));
  perturbed[gi] = static_cast<uint32_t>(rng.uniform_index(spec.groups[gi].size()));

  // Project to the nearest feasible candidates (fewest differing groups);
  // break ties by a uniform draw so the proposal stays unbiased.
  size_t best_dist = SIZE_MAX;
  std::vector<size_t> nearest;
  for (size_t c = 0; c < ps.candidates.size(); ++c) {
    size_t dist = 0;
    for (size_t g = 0; g < perturbed.size(); ++g)
      if (ps.choices[c][g] != perturbed[g]) ++dist;
    if (dist < best_dist) {
      best_dist = dist;
      nearest.assign(1, c);
    } else if (dist == best_dist) {
      nearest.push_back(c);
    }
  }
  const size_t proposal = nearest[rng.uniform_index(nearest.size())];

  if (proposal == cur) return ps.candidates[cur];

  const std::vector<double> ls = log_softmax(logits, spec);
  const double cur_loss = -score_choices(ps.choices[cur], ls, spec);
  const double prop_loss = -score_choices(ps.choices[proposal], ls, spec);
  if (prop_loss < cur_loss) return ps.candidates[proposal];
  if (rng.uniform() < schedule.epsilon(epoch)) return ps.candidates[proposal];
  return ps.candidates[cur];
}

PreimageCache::PreimageCache(const AssignmentTable& table)
    : table_(table), sets_(table.n_outputs()) {}

const PreimageSet& PreimageCache::preimage(size_t label) {
  if (label >= sets_.size()) throw std::runtime_error("output label out of range");
  if (!sets_[label]) sets_[label] = enumerate_preimage(table_, label);
  return *sets_[label];
}

void PreimageCache::build_all() {
  for (size_t label = 0; label < sets_.size(); ++label) preimage(label);
}

}  // namespace symcor
