#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "potemkin/interpretation.hpp"
#include "potemkin/solver.hpp"

namespace potemkin {

/// Structured human-space generator: each misinterpretation flips f* on one
/// contiguous block of instances, the stand-in for humans misunderstanding
/// concepts in structured ways.
struct HumanSpaceParams {
  std::size_t n_instances = 0;
  std::size_t n_rules = 0;
  std::size_t flip_block_size = 1;
  std::uint64_t seed = 0;
};

/// f* is all-ones; F_h adds one block-flip misinterpretation per rule.
/// Requires n_rules * flip_block_size <= n_instances.
ConceptSpec gen_human_space(const HumanSpaceParams& params);

/// Unstructured LLM-space generator: independent per-instance flips of f*.
struct LlmSpaceParams {
  std::size_t n_instances = 0;
  std::size_t n_interps = 0;
  double flip_probability = 0.0;
  std::uint64_t seed = 0;
};

std::vector<Interpretation> gen_llm_space(const LlmSpaceParams& params);

struct PotemkinWitness {
  std::string interp_id;
  std::string instance_id;  // some x with f(x) != f*(x)
};

struct PotemkinCount {
  std::size_t n_potemkin = 0;
  std::vector<PotemkinWitness> witnesses;  // one per counted interpretation
};

/// Counts candidate interpretations that agree with f* on every keystone
/// instance yet differ from f* somewhere. The keystone must pass is_keystone
/// unless it carries the declared certificate.
PotemkinCount count_potemkin_interps(const ConceptSpec& spec,
                                     const KeystoneSet& keystone,
                                     const std::vector<Interpretation>& candidates);

struct SweepPoint {
  double flip_probability = 0.0;
  std::size_t n_interps = 0;
  std::size_t n_potemkin = 0;
  double potemkin_fraction = 0.0;
};

/// For each grid point: generate the LLM space, compute a minimum keystone
/// against the human space, and report the fraction of LLM interpretations
/// that are potemkin interpretations. Deterministic under the given seeds.
std::vector<SweepPoint> validity_sweep(const HumanSpaceParams& human_params,
                                       const std::vector<LlmSpaceParams>& grid);

}  // namespace potemkin
