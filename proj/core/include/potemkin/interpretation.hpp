#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

namespace potemkin {

using Bit = std::uint8_t;

struct Instance {
  std::string id;
  std::string text;
};

/// A finite, explicitly enumerated instance space. Order is fixed and
/// deterministic for a given spec document; ids are unique.
class InstanceSpace {
 public:
  explicit InstanceSpace(std::vector<Instance> instances);

  std::size_t size() const { return instances_.size(); }
  const std::vector<Instance>& instances() const { return instances_; }
  const Instance& at(std::size_t index) const { return instances_.at(index); }

  /// Throws UnknownInstanceError naming the offending id.
  std::size_t index_of(const std::string& instance_id) const;
  bool contains(const std::string& instance_id) const;

 private:
  std::vector<Instance> instances_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// A total 0/1 valuation of every instance, in instance-space order.
struct Interpretation {
  std::string interp_id;
  std::vector<Bit> values;
};

/// An instance space plus the correct interpretation f*, the candidate human
/// interpretation space F_h (which contains f*), and an optional LLM space F_l.
/// Immutable after construction; duplicate value vectors in the human space
/// are dropped at load (they are semantically one interpretation).
class ConceptSpec {
 public:
  ConceptSpec(std::string concept_id, InstanceSpace space, Interpretation f_star,
              std::vector<Interpretation> human_space,
              std::vector<Interpretation> llm_space = {});

  const std::string& concept_id() const { return concept_id_; }
  const InstanceSpace& space() const { return space_; }
  const Interpretation& f_star() const { return f_star_; }
  /// Deduplicated; always contains f* (as its stored value vector).
  const std::vector<Interpretation>& human_space() const { return human_space_; }
  const std::vector<Interpretation>& llm_space() const { return llm_space_; }
  /// How many duplicate human-space entries were dropped at construction.
  std::size_t duplicates_dropped() const { return duplicates_dropped_; }

  /// Loads a concept spec document (JSON). Throws SchemaError with the field
  /// path on malformed input.
  static ConceptSpec load(const std::filesystem::path& path);
  static ConceptSpec from_json_text(const std::string& text,
                                    const std::string& origin = "<string>");
  std::string to_json_text() const;

 private:
  std::string concept_id_;
  InstanceSpace space_;
  Interpretation f_star_;
  std::vector<Interpretation> human_space_;
  std::vector<Interpretation> llm_space_;
  std::size_t duplicates_dropped_ = 0;
};

/// The instances on which f differs from f*. Empty iff f equals f*.
struct DisagreementSet {
  std::string interp_id;
  std::vector<std::size_t> instance_indices;  // sorted ascending

  bool empty() const { return instance_indices.empty(); }
  std::vector<std::string> instance_ids(const InstanceSpace& space) const;
};

/// Looks up f(x). Pure and total over the space the interpretation was built
/// against; throws UnknownInstanceError otherwise.
Bit evaluate(const Interpretation& f, const InstanceSpace& space,
             const std::string& instance_id);

/// {x : f(x) != f*(x)}. Throws DimensionMismatchError if lengths differ.
DisagreementSet disagreement_set(const Interpretation& f, const ConceptSpec& spec);

/// True iff every f in F_h other than f* disagrees with f* somewhere in the
/// candidate set, i.e. agreeing with f* on all of it forces f = f* within F_h.
bool is_distinguishing(const std::vector<std::size_t>& candidate_indices,
                       const ConceptSpec& spec);
bool is_distinguishing_ids(const std::vector<std::string>& candidate_ids,
                           const ConceptSpec& spec);

/// Distinguishing and minimal: removing any single element breaks the
/// property. By monotonicity this is equivalent to no proper subset being
/// distinguishing.
bool is_keystone(const std::vector<std::size_t>& candidate_indices,
                 const ConceptSpec& spec);
bool is_keystone_ids(const std::vector<std::string>& candidate_ids,
                     const ConceptSpec& spec);

}  // namespace potemkin
