#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "potemkin/interpretation.hpp"  // Bit

namespace potemkin {

/// Counts for one scoring cell. trials = graded valid attempts; exclusions are
/// malformed responses kept out of every denominator and reported separately.
struct TallySheet {
  std::size_t successes = 0;
  std::size_t trials = 0;
  std::size_t exclusions = 0;

  std::size_t failures() const { return trials - successes; }
  std::size_t attempts() const { return trials + exclusions; }
};

/// A chance-rescaled error rate: scaled_rate = (1 - raw_accuracy) /
/// (1 - chance_accuracy), so chance-level performance scores 1 and rates above
/// 1 (worse than chance) are legal and never clamped.
struct ScoredRate {
  double raw_accuracy = 0.0;
  double chance_accuracy = 0.0;
  double scaled_rate = 0.0;
  double se = 0.0;  // scale * sqrt(p(1-p)/n) on the unscaled proportion
  std::size_t n = 0;
};

/// sqrt(p(1-p)/n).
double binomial_se(double p, std::size_t n);

/// Error rate conditional on keystone success, rescaled by the task's chance
/// accuracy. Requires trials >= 1 (EmptyTallyError otherwise) and
/// 0 <= chance_accuracy < 1.
ScoredRate potemkin_rate(const TallySheet& tally, double chance_accuracy);

/// One generate-then-reclassify exchange: the label the generation was asked
/// to instantiate and the label the model later assigned to its own output
/// (nullopt when the reclassification response was malformed).
struct ReclassificationPair {
  Bit intended = 0;
  std::optional<Bit> reclassified;
};

/// Twice the fraction of valid pairs whose reclassification contradicts the
/// intended label. Invalid pairs are excluded from the denominator.
ScoredRate incoherence_score(const std::vector<ReclassificationPair>& pairs);

enum class JudgeCall : std::uint8_t { correct, incorrect };

/// One self-grading check: the verdict the judge should give and the verdict
/// it actually gave (nullopt when the judge response was malformed).
struct JudgedPair {
  JudgeCall expected = JudgeCall::correct;
  std::optional<JudgeCall> judged;
};

/// 2 * (1 - agreement) over valid verdicts: the automated lower bound on the
/// potemkin rate.
ScoredRate autoeval_rate(const std::vector<JudgedPair>& verdicts);

/// One concept's contribution to the keystone-expansion curve.
struct ConceptFollowup {
  bool passed_keystone = false;
  std::size_t followup_correct = 0;
};

/// Fraction of keystone-passing concepts judged understood: by default all m
/// follow-ups must be correct; threshold < 1 relaxes the criterion to
/// followup_correct >= threshold * m. EmptyTallyError when nothing passed.
double understanding_value(const std::vector<ConceptFollowup>& per_concept,
                           std::size_t m, double threshold = 1.0);

}  // namespace potemkin
