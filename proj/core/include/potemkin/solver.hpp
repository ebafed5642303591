#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "potemkin/interpretation.hpp"

namespace potemkin {

enum class KeystoneCertificate {
  /// No distinguishing set of smaller cardinality exists.
  exact_minimum,
  /// Verified minimal (no single removal preserves the property), but the
  /// cardinality is not proven minimum.
  greedy_minimal,
  /// User-asserted keystone; minimality is not enforced.
  declared,
};

std::string to_string(KeystoneCertificate cert);

struct KeystoneSet {
  std::vector<std::size_t> instance_indices;  // sorted ascending
  KeystoneCertificate certificate = KeystoneCertificate::greedy_minimal;
  std::size_t objective = 0;  // cardinality
  /// Set when the exact search ran out of node budget and returned its best
  /// incumbent instead of a proven minimum.
  bool search_budget_exhausted = false;

  std::vector<std::string> instance_ids(const InstanceSpace& space) const;
};

/// The hitting-set reduction of a concept: one disagreement set per non-f*
/// member of F_h (identical sets deduplicated), over the instance universe.
/// A candidate set is distinguishing iff it hits every one of these sets.
struct HittingInstance {
  std::size_t universe_size = 0;
  std::vector<std::vector<std::size_t>> sets_to_hit;  // sorted, non-empty, deduped
  std::vector<std::string> set_sources;  // interp_id of the first owner of each set
};

/// Throws UnsolvableConceptError if some misinterpretation has an empty
/// disagreement set; dedupe at concept load rules this out for loaded specs.
HittingInstance build_hitting_instance(const ConceptSpec& spec);

struct SolverOptions {
  /// Node budget for the exact search; node counts, not wall time, so behavior
  /// under test is deterministic.
  std::uint64_t node_budget = 10'000'000;
};

/// Greedy cover (pick the instance hitting the most un-hit sets, ties broken
/// by instance order) followed by reverse-insertion-order pruning so the
/// result is a true keystone. Certificate: greedy_minimal.
KeystoneSet greedy_keystone(const ConceptSpec& spec);

/// Branch-and-bound minimum-cardinality distinguishing set, then reduced to
/// the lexicographically smallest set of that size for reproducible output.
/// Certificate: exact_minimum, downgraded to greedy_minimal with
/// search_budget_exhausted set if the node budget runs out.
KeystoneSet minimum_keystone(const ConceptSpec& spec, const SolverOptions& options = {});

struct KeystoneEnumeration {
  std::vector<KeystoneSet> keystones;  // lexicographic order
  bool truncated = false;
};

/// All minimal (not necessarily minimum) keystones in lexicographic order,
/// truncated at limit.
KeystoneEnumeration enumerate_minimal_keystones(const ConceptSpec& spec,
                                                std::size_t limit,
                                                const SolverOptions& options = {});

/// Wraps a user-asserted keystone (e.g. a lone definition question) with the
/// declared certificate. Instance ids must exist; minimality is not checked.
KeystoneSet declared_keystone(const ConceptSpec& spec,
                              const std::vector<std::string>& instance_ids);

}  // namespace potemkin
