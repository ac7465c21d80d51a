#include "symcor/synthesizer.hpp"

#include <cmath>
#include <stdexcept>

namespace symcor {

std::string to_string(SynthesizerKind kind) {
  switch (kind) {
    case SynthesizerKind::Ideal: return "ideal";
    case SynthesizerKind::Multiple: return "multiple";
    case SynthesizerKind::Closest: return "closest";
    case SynthesizerKind::Random: return "random";
  }
  throw std::runtime_error("unknown synthesizer kind");
}

SynthesizerKind synthesizer_from_name(const std::string& name) {
  if (name == "ideal") return SynthesizerKind::Ideal;
  if (name == "multiple") return SynthesizerKind::Multiple;
  if (name == "closest") return SynthesizerKind::Closest;
  if (name == "random") return SynthesizerKind::Random;
  throw std::runtime_error("unknown synthesizer '" + name +
                           "' (expected ideal|multiple|closest|random)");
}

SynthResult cross_entropy_to_target(std::span<const double> logits, const Bitstring& target,
                                    const GroupSpec& spec) {
  if (!is_one_hot_per_group(target, spec))
    throw std::runtime_error("synthesizer target is not one-hot per group");
  const ProbVector pv = smooth_ground(logits, spec);
  SynthResult res;
  res.grad.resize(logits.size());
  for (const auto& g : spec.groups) {
    for (uint32_t idx : g) {
      res.grad[idx] = pv[idx] - (target[idx] ? 1.0 : 0.0);
      if (target[idx]) res.loss += -std::log(std::max(pv[idx], kEpsFloor));
    }
  }
  return res;
}

SynthResult synthesize_ideal(std::span<const double> logits, const Bitstring& alpha_x,
                             const GroupSpec& spec) {
  return cross_entropy_to_target(logits, alpha_x, spec);
}

SynthResult synthesize_multiple(const AssignmentTable& table, std::span<const double> logits,
                                size_t label) {
  const ProbVector pv = smooth_ground(logits, table.spec());
  const ProbOutput po = prob_evaluate(table, pv);
  LossGrad lg = output_loss_and_input_grads(po, label, logits, table.spec());
  return SynthResult{lg.loss, std::move(lg.grad)};
}

SynthResult synthesize_closest(PreimageCache& cache, std::span<const double> logits, size_t label,
                               Bitstring* chosen) {
  const PreimageSet& ps = cache.preimage(label);
  const Bitstring& psi = closest_candidate(ps, logits, cache.table().spec());
  if (chosen) *chosen = psi;
  return cross_entropy_to_target(logits, psi, cache.table().spec());
}

SynthResult synthesize_random(PreimageCache& cache, std::span<const double> logits, size_t label,
                              std::optional<Bitstring>& psi, int epoch,
                              const AnnealSchedule& schedule, Rng& rng) {
  const PreimageSet& ps = cache.preimage(label);
  const GroupSpec& spec = cache.table().spec();
  if (!psi) {
    psi = ps.candidates[rng.uniform_index(ps.candidates.size())];
  } else {
    psi = random_walk_step(ps, *psi, logits, epoch, schedule, rng, spec);
  }
  return cross_entropy_to_target(logits, *psi, spec);
}

SynthesizerEngine::SynthesizerEngine(SynthesizerKind kind, const AssignmentTable& table,
                                     PreimageCache& cache, size_t sample_count, uint64_t seed,
                                     AnnealSchedule schedule)
    : kind_(kind),
      table_(table),
      cache_(cache),
      schedule_(schedule),
      rng_(mix_seed(seed, 0x73796e7468ULL)),  // decorrelate from other per-seed streams
      psi_(sample_count),
      first_psi_(sample_count),
      psi_changed_(sample_count, 0) {}

SynthResult SynthesizerEngine::run(std::span<const double> logits, size_t label,
                                   const Bitstring& alpha_x, size_t sample_index, int epoch) {
  if (sample_index >= psi_.size()) throw std::runtime_error("sample index out of range");
  switch (kind_) {
    case SynthesizerKind::Ideal:
      return synthesize_ideal(logits, alpha_x, table_.spec());
    case SynthesizerKind::Multiple:
      return synthesize_multiple(table_, logits, label);
    case SynthesizerKind::Closest: {
      Bitstring chosen;
      SynthResult res = synthesize_closest(cache_, logits, label, &chosen);
      record_psi(sample_index, epoch, chosen);
      return res;
    }
    case SynthesizerKind::Random: {
      SynthResult res =
          synthesize_random(cache_, logits, label, psi_[sample_index], epoch, schedule_, rng_);
      record_psi(sample_index, epoch, *psi_[sample_index]);
      return res;
    }
  }
  throw std::runtime_error("unknown synthesizer kind");
}

void SynthesizerEngine::record_psi(size_t sample_index, int epoch, const Bitstring& psi) {
  if (sample_index >= psi_.size()) throw std::runtime_error("sample index out of range");
  if (!first_psi_[sample_index]) {
    first_psi_[sample_index] = psi;
  } else if (*first_psi_[sample_index] != psi) {
    psi_changed_[sample_index] = 1;
  }
  if (kind_ == SynthesizerKind::Closest) psi_[sample_index] = psi;
  if (trace_) trace_(epoch, sample_index, psi);
}

double SynthesizerEngine::pseudolabel_stability() const {
  if (kind_ == SynthesizerKind::Ideal || kind_ == SynthesizerKind::Multiple) return 1.0;
  size_t tracked = 0;
  size_t stable = 0;
  for (size_t i = 0; i < psi_.size(); ++i) {
    if (!first_psi_[i]) continue;
    ++tracked;
    if (!psi_changed_[i]) ++stable;
  }
  if (tracked == 0) return 1.0;
  return static_cast<double>(stable) / static_cast<double>(tracked);
}

}  // namespace symcor
