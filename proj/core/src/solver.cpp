#include "potemkin/solver.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <sstream>

#include "potemkin/errors.hpp"

namespace potemkin {

std::string to_string(KeystoneCertificate cert) {
  switch (cert) {
    case KeystoneCertificate::exact_minimum: return "exact_minimum";
    case KeystoneCertificate::greedy_minimal: return "greedy_minimal";
    case KeystoneCertificate::declared: return "declared";
  }
  return "unknown";
}

std::vector<std::string> KeystoneSet::instance_ids(const InstanceSpace& space) const {
  std::vector<std::string> ids;
  ids.reserve(instance_indices.size());
  for (std::size_t i : instance_indices) ids.push_back(space.at(i).id);
  return ids;
}

HittingInstance build_hitting_instance(const ConceptSpec& spec) {
  HittingInstance out;
  out.universe_size = spec.space().size();
  std::map<std::vector<std::size_t>, std::string> seen;
  for (const auto& f : spec.human_space()) {
    if (f.values == spec.f_star().values) continue;
    auto d = disagreement_set(f, spec);
    if (d.empty()) {
      throw UnsolvableConceptError(
          "interpretation '" + f.interp_id +
          "' differs from f_star yet has an empty disagreement set");
    }
    seen.emplace(std::move(d.instance_indices), f.interp_id);
  }
  for (auto& [indices, source] : seen) {
    out.sets_to_hit.push_back(indices);
    out.set_sources.push_back(source);
  }
  return out;
}

namespace {

// Fixed-width bitset used for both domains of the search: instances of the
// universe and indices of the sets to hit.
class BitRow {
 public:
  BitRow() = default;
  explicit BitRow(std::size_t nbits) : nbits_(nbits), words_((nbits + 63) / 64, 0) {}

  void set(std::size_t i) { words_[i >> 6] |= (1ULL << (i & 63)); }
  bool test(std::size_t i) const { return (words_[i >> 6] >> (i & 63)) & 1ULL; }

  bool none() const {
    for (auto w : words_) {
      if (w) return false;
    }
    return true;
  }

  bool intersects(const BitRow& other) const {
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (words_[i] & other.words_[i]) return true;
    }
    return false;
  }

  std::size_t count_and(const BitRow& other) const {
    std::size_t c = 0;
    for (std::size_t i = 0; i < words_.size(); ++i) {
      c += static_cast<std::size_t>(__builtin_popcountll(words_[i] & other.words_[i]));
    }
    return c;
  }

  BitRow& operator|=(const BitRow& other) {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] |= other.words_[i];
    return *this;
  }

  /// this &= ~other
  BitRow& subtract(const BitRow& other) {
    for (std::size_t i = 0; i < words_.size(); ++i) words_[i] &= ~other.words_[i];
    return *this;
  }

  template <typename Fn>
  void for_each_set(Fn fn) const {
    for (std::size_t w = 0; w < words_.size(); ++w) {
      std::uint64_t bits = words_[w];
      while (bits) {
        unsigned tz = static_cast<unsigned>(__builtin_ctzll(bits));
        fn(w * 64 + tz);
        bits &= bits - 1;
      }
    }
  }

  std::size_t size() const { return nbits_; }

 private:
  std::size_t nbits_ = 0;
  std::vector<std::uint64_t> words_;
};

struct BudgetStop {};

// Search state shared by greedy, branch-and-bound, and enumeration.
class HittingSearch {
 public:
  HittingSearch(const HittingInstance& instance, std::uint64_t node_budget)
      : n_(instance.universe_size),
        m_(instance.sets_to_hit.size()),
        node_budget_(node_budget) {
    set_masks_.assign(m_, BitRow(n_));
    set_elems_ = instance.sets_to_hit;
    set_max_elem_.resize(m_);
    occurrence_.assign(n_, BitRow(m_));
    for (std::size_t s = 0; s < m_; ++s) {
      for (std::size_t x : set_elems_[s]) {
        set_masks_[s].set(x);
        occurrence_[x].set(s);
      }
      set_max_elem_[s] = set_elems_[s].back();
    }
    // Lower-bound selection order: small sets first, then index.
    lb_order_.resize(m_);
    std::iota(lb_order_.begin(), lb_order_.end(), std::size_t{0});
    std::stable_sort(lb_order_.begin(), lb_order_.end(),
                     [this](std::size_t a, std::size_t b) {
                       return set_elems_[a].size() < set_elems_[b].size();
                     });
  }

  std::size_t n_sets() const { return m_; }
  bool budget_exhausted() const { return budget_exhausted_; }

  BitRow all_sets() const {
    BitRow row(m_);
    for (std::size_t s = 0; s < m_; ++s) row.set(s);
    return row;
  }

  /// Greedy cover followed by reverse-insertion pruning; the result is minimal.
  std::vector<std::size_t> greedy_minimal_set() {
    std::vector<std::size_t> chosen;
    BitRow unhit = all_sets();
    while (!unhit.none()) {
      std::size_t best_x = 0;
      std::size_t best_count = 0;
      for (std::size_t x = 0; x < n_; ++x) {
        std::size_t c = occurrence_[x].count_and(unhit);
        if (c > best_count) {
          best_count = c;
          best_x = x;
        }
      }
      chosen.push_back(best_x);
      unhit.subtract(occurrence_[best_x]);
    }
    return prune_to_minimal(chosen);
  }

  /// Drops elements whose removal keeps every set hit, scanning in reverse
  /// insertion order. Input order matters; output is sorted.
  std::vector<std::size_t> prune_to_minimal(const std::vector<std::size_t>& chosen_in_order) {
    std::vector<std::size_t> cover(m_, 0);
    for (std::size_t x : chosen_in_order) {
      occurrence_[x].for_each_set([&](std::size_t s) { ++cover[s]; });
    }
    std::vector<bool> kept(chosen_in_order.size(), true);
    for (std::size_t i = chosen_in_order.size(); i-- > 0;) {
      std::size_t x = chosen_in_order[i];
      bool redundant = true;
      occurrence_[x].for_each_set([&](std::size_t s) {
        if (cover[s] < 2) redundant = false;
      });
      if (redundant) {
        kept[i] = false;
        occurrence_[x].for_each_set([&](std::size_t s) { --cover[s]; });
      }
    }
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < chosen_in_order.size(); ++i) {
      if (kept[i]) out.push_back(chosen_in_order[i]);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// Count of pairwise-disjoint un-hit sets: a valid lower bound on how many
  /// more elements any completion needs.
  std::size_t disjoint_lower_bound(const BitRow& unhit) const {
    BitRow used(n_);
    std::size_t count = 0;
    for (std::size_t s : lb_order_) {
      if (!unhit.test(s)) continue;
      if (!set_masks_[s].intersects(used)) {
        ++count;
        used |= set_masks_[s];
      }
    }
    return count;
  }

  /// Exact minimum cardinality via branch-and-bound seeded with the greedy
  /// upper bound. Returns (objective, some optimal-or-incumbent set, proven).
  struct ExactResult {
    std::size_t objective;
    std::vector<std::size_t> incumbent;  // insertion order
    bool proven;
  };

  ExactResult exact_minimum(const std::vector<std::size_t>& greedy_seed) {
    best_ = greedy_seed.size();
    incumbent_ = greedy_seed;
    bool proven = true;
    try {
      std::vector<std::size_t> chosen;
      branch(chosen, all_sets());
    } catch (const BudgetStop&) {
      budget_exhausted_ = true;
      proven = false;
    }
    return ExactResult{best_, incumbent_, proven};
  }

  /// Lexicographically smallest hitting set of size exactly `budget`, using
  /// only instances >= start. Empty optional-like flag via bool return.
  bool lex_smallest(BitRow unhit, std::size_t budget, std::size_t start,
                    std::vector<std::size_t>& out) {
    tick();
    if (unhit.none()) return true;
    if (budget == 0) return false;
    if (disjoint_lower_bound(unhit) > budget) return false;
    std::size_t hi = n_;  // inclusive upper bound for the next pick
    bool dead = false;
    unhit.for_each_set([&](std::size_t s) {
      if (set_max_elem_[s] < start) dead = true;
      hi = std::min(hi, set_max_elem_[s]);
    });
    if (dead) return false;
    for (std::size_t x = start; x <= hi; ++x) {
      if (!occurrence_[x].intersects(unhit)) continue;
      BitRow next = unhit;
      next.subtract(occurrence_[x]);
      if (lex_smallest(std::move(next), budget - 1, x + 1, out)) {
        out.insert(out.begin(), x);
        return true;
      }
    }
    return false;
  }

  /// Depth-first enumeration of minimal hitting sets in lexicographic order.
  /// Returns true when the space was fully explored (not truncated).
  bool enumerate_minimal(std::size_t limit,
                         std::vector<std::vector<std::size_t>>& out) {
    cover_.assign(m_, 0);
    chosen_.clear();
    limit_ = limit;
    out_ = &out;
    try {
      enum_rec(all_sets(), 0);
    } catch (const BudgetStop&) {
      budget_exhausted_ = true;
      return false;
    } catch (const EnumTruncated&) {
      return false;
    }
    return true;
  }

 private:
  struct EnumTruncated {};

  void tick() {
    if (++nodes_ > node_budget_) throw BudgetStop{};
  }

  void branch(std::vector<std::size_t>& chosen, const BitRow& unhit) {
    tick();
    if (unhit.none()) {
      if (chosen.size() < best_) {
        best_ = chosen.size();
        incumbent_ = chosen;
      }
      return;
    }
    if (chosen.size() + disjoint_lower_bound(unhit) >= best_) return;
    // Branch on the un-hit set with the fewest elements (tie: lowest index).
    std::size_t pick = m_;
    std::size_t pick_size = n_ + 1;
    unhit.for_each_set([&](std::size_t s) {
      if (set_elems_[s].size() < pick_size) {
        pick_size = set_elems_[s].size();
        pick = s;
      }
    });
    for (std::size_t x : set_elems_[pick]) {
      BitRow next = unhit;
      next.subtract(occurrence_[x]);
      chosen.push_back(x);
      branch(chosen, next);
      chosen.pop_back();
    }
  }

  void enum_rec(const BitRow& unhit, std::size_t start) {
    tick();
    if (unhit.none()) {
      // Minimal iff every chosen element has a set it alone hits.
      for (std::size_t x : chosen_) {
        bool has_private = false;
        occurrence_[x].for_each_set([&](std::size_t s) {
          if (cover_[s] == 1) has_private = true;
        });
        if (!has_private) return;
      }
      if (out_->size() == limit_) throw EnumTruncated{};
      out_->push_back(chosen_);
      return;
    }
    std::size_t hi = n_;
    bool dead = false;
    unhit.for_each_set([&](std::size_t s) {
      if (set_max_elem_[s] < start) dead = true;
      hi = std::min(hi, set_max_elem_[s]);
    });
    if (dead) return;
    for (std::size_t x = start; x <= hi; ++x) {
      if (!occurrence_[x].intersects(unhit)) continue;
      BitRow next = unhit;
      next.subtract(occurrence_[x]);
      chosen_.push_back(x);
      occurrence_[x].for_each_set([&](std::size_t s) { ++cover_[s]; });
      enum_rec(next, x + 1);
      occurrence_[x].for_each_set([&](std::size_t s) { --cover_[s]; });
      chosen_.pop_back();
    }
  }

  std::size_t n_;
  std::size_t m_;
  std::uint64_t node_budget_;
  std::uint64_t nodes_ = 0;
  bool budget_exhausted_ = false;

  std::vector<BitRow> set_masks_;                 // per set: instances it contains
  std::vector<std::vector<std::size_t>> set_elems_;
  std::vector<std::size_t> set_max_elem_;
  std::vector<BitRow> occurrence_;                // per instance: sets it hits
  std::vector<std::size_t> lb_order_;

  std::size_t best_ = 0;
  std::vector<std::size_t> incumbent_;

  std::vector<std::size_t> cover_;
  std::vector<std::size_t> chosen_;
  std::size_t limit_ = 0;
  std::vector<std::vector<std::size_t>>* out_ = nullptr;
};

KeystoneSet make_result(std::vector<std::size_t> indices, KeystoneCertificate cert) {
  KeystoneSet ks;
  ks.instance_indices = std::move(indices);
  std::sort(ks.instance_indices.begin(), ks.instance_indices.end());
  ks.certificate = cert;
  ks.objective = ks.instance_indices.size();
  return ks;
}

}  // namespace

KeystoneSet greedy_keystone(const ConceptSpec& spec) {
  auto instance = build_hitting_instance(spec);
  if (instance.sets_to_hit.empty()) {
    return make_result({}, KeystoneCertificate::greedy_minimal);
  }
  HittingSearch search(instance, /*node_budget=*/0);  // greedy never branches
  return make_result(search.greedy_minimal_set(), KeystoneCertificate::greedy_minimal);
}

KeystoneSet minimum_keystone(const ConceptSpec& spec, const SolverOptions& options) {
  auto instance = build_hitting_instance(spec);
  if (instance.sets_to_hit.empty()) {
    return make_result({}, KeystoneCertificate::exact_minimum);
  }
  HittingSearch search(instance, options.node_budget);
  auto greedy = search.greedy_minimal_set();
  auto exact = search.exact_minimum(greedy);
  if (!exact.proven) {
    auto ks = make_result(search.prune_to_minimal(exact.incumbent),
                          KeystoneCertificate::greedy_minimal);
    ks.search_budget_exhausted = true;
    return ks;
  }
  // Canonicalize to the lexicographically smallest optimum for reproducible
  // output and golden tests.
  std::vector<std::size_t> lex;
  bool found = false;
  try {
    found = search.lex_smallest(search.all_sets(), exact.objective, 0, lex);
  } catch (const BudgetStop&) {
    found = false;
  }
  if (!found) {
    // Only reachable if the node budget dies between the two phases.
    auto ks = make_result(search.prune_to_minimal(exact.incumbent),
                          KeystoneCertificate::greedy_minimal);
    ks.search_budget_exhausted = true;
    return ks;
  }
  return make_result(std::move(lex), KeystoneCertificate::exact_minimum);
}

KeystoneEnumeration enumerate_minimal_keystones(const ConceptSpec& spec,
                                                std::size_t limit,
                                                const SolverOptions& options) {
  if (limit < 1) throw Error("enumerate_minimal_keystones: limit must be >= 1");
  auto instance = build_hitting_instance(spec);
  KeystoneEnumeration result;
  if (instance.sets_to_hit.empty()) {
    result.keystones.push_back(make_result({}, KeystoneCertificate::greedy_minimal));
    return result;
  }
  HittingSearch search(instance, options.node_budget);
  std::vector<std::vector<std::size_t>> sets;
  bool complete = search.enumerate_minimal(limit, sets);
  result.truncated = !complete;
  for (auto& s : sets) {
    result.keystones.push_back(make_result(std::move(s), KeystoneCertificate::greedy_minimal));
  }
  return result;
}

KeystoneSet declared_keystone(const ConceptSpec& spec,
                              const std::vector<std::string>& instance_ids) {
  std::vector<std::size_t> indices;
  indices.reserve(instance_ids.size());
  for (const auto& id : instance_ids) indices.push_back(spec.space().index_of(id));
  std::sort(indices.begin(), indices.end());
  indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
  return make_result(std::move(indices), KeystoneCertificate::declared);
}

}  // namespace potemkin
