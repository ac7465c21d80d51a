#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "symcor/preimage.hpp"

namespace symcor {

enum class SynthesizerKind { Ideal, Multiple, Closest, Random };

std::string to_string(SynthesizerKind kind);
SynthesizerKind synthesizer_from_name(const std::string& name);

struct SynthResult {
  double loss = 0.0;
  std::vector<double> grad;  // G_z, length n
};

// Per-group cross-entropy of softmax(logits) against a one-hot-per-group
// target, summed over groups; gradient is softmax(z) − target. Ideal,
// Closest and Random all reduce to this with different targets.
SynthResult cross_entropy_to_target(std::span<const double> logits, const Bitstring& target,
                                    const GroupSpec& spec);

// G_z = ∂_z ℓ(z, α_x): perfect supervision at the neural-symbolic interface.
SynthResult synthesize_ideal(std::span<const double> logits, const Bitstring& alpha_x,
                             const GroupSpec& spec);

// G_z = ∂_z ℓ(p̃(g̃(z)), y): the exact-marginalization chain.
SynthResult synthesize_multiple(const AssignmentTable& table, std::span<const double> logits,
                                size_t label);

// ψ_x = the preimage candidate closest to the current predictions; CE to ψ_x.
// When `chosen` is non-null the pseudolabel is copied out for diagnostics.
SynthResult synthesize_closest(PreimageCache& cache, std::span<const double> logits, size_t label,
                               Bitstring* chosen = nullptr);

// ψ_x ← annealed random walk over the preimage (uniform draw on the first
// encounter, then one walk step per epoch); CE to ψ_x. `psi` is the
// caller-owned per-sample state.
SynthResult synthesize_random(PreimageCache& cache, std::span<const double> logits, size_t label,
                              std::optional<Bitstring>& psi, int epoch,
                              const AnnealSchedule& schedule, Rng& rng);

// Owns per-run synthesizer state: the random stream, per-sample pseudolabel
// memory and the stability diagnostic. One engine per training run.
class SynthesizerEngine {
 public:
  using TraceFn = std::function<void(int epoch, size_t sample, const Bitstring& psi)>;

  SynthesizerEngine(SynthesizerKind kind, const AssignmentTable& table, PreimageCache& cache,
                    size_t sample_count, uint64_t seed, AnnealSchedule schedule);

  SynthResult run(std::span<const double> logits, size_t label, const Bitstring& alpha_x,
                  size_t sample_index, int epoch);

  SynthesizerKind kind() const { return kind_; }

  // Fraction of samples whose pseudolabel never changed from its first-epoch
  // value; 1.0 for the pseudolabel-free synthesizers (Ideal, Multiple).
  double pseudolabel_stability() const;

  void set_trace(TraceFn fn) { trace_ = std::move(fn); }

 private:
  void record_psi(size_t sample_index, int epoch, const Bitstring& psi);

  SynthesizerKind kind_;
  const AssignmentTable& table_;
  PreimageCache& cache_;
  AnnealSchedule schedule_;
  Rng rng_;
  std::vector<std::optional<Bitstring>> psi_;        // Random's walk state / Closest's last choice
  std::vector<std::optional<Bitstring>> first_psi_;  // for the stability diagnostic
  std::vector<uint8_t> psi_changed_;
  TraceFn trace_;
};

}  // namespace symcor
