#include "potemkin/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "potemkin/errors.hpp"

namespace potemkin {

double binomial_se(double p, std::size_t n) {
  if (p < 0.0 || p > 1.0) throw Error("binomial_se: p must be in [0, 1]");
  if (n < 1) throw Error("binomial_se: n must be >= 1");
  return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

namespace {

ScoredRate scaled_rate_from_accuracy(double accuracy, double chance,
                                     std::size_t n) {
  ScoredRate out;
  out.raw_accuracy = accuracy;
  out.chance_accuracy = chance;
  const double scale = 1.0 / (1.0 - chance);
  out.scaled_rate = scale * (1.0 - accuracy);
  out.se = scale * binomial_se(accuracy, n);
  out.n = n;
  return out;
}

}  // namespace

ScoredRate potemkin_rate(const TallySheet& tally, double chance_accuracy) {
  if (tally.trials == 0) {
    throw EmptyTallyError("potemkin_rate: no valid trials; report 'no data'");
  }
  if (tally.successes > tally.trials) {
    throw Error("potemkin_rate: successes exceed trials");
  }
  if (chance_accuracy < 0.0 || chance_accuracy >= 1.0) {
    throw Error("potemkin_rate: chance_accuracy must be in [0, 1)");
  }
  const double accuracy =
      static_cast<double>(tally.successes) / static_cast<double>(tally.trials);
  return scaled_rate_from_accuracy(accuracy, chance_accuracy, tally.trials);
}

ScoredRate incoherence_score(const std::vector<ReclassificationPair>& pairs) {
  std::size_t valid = 0;
  std::size_t matches = 0;
  for (const auto& pair : pairs) {
    if (!pair.reclassified.has_value()) continue;
    ++valid;
    if (*pair.reclassified == pair.intended) ++matches;
  }
  if (valid == 0) {
    throw EmptyTallyError("incoherence_score: no valid pairs");
  }
  const double accuracy = static_cast<double>(matches) / static_cast<double>(valid);
  return scaled_rate_from_accuracy(accuracy, 0.5, valid);
}

ScoredRate autoeval_rate(const std::vector<JudgedPair>& verdicts) {
  std::size_t valid = 0;
  std::size_t agree = 0;
  for (const auto& v : verdicts) {
    if (!v.judged.has_value()) continue;
    ++valid;
    if (*v.judged == v.expected) ++agree;
  }
  if (valid == 0) {
    throw EmptyTallyError("autoeval_rate: no valid verdicts");
  }
  const double accuracy = static_cast<double>(agree) / static_cast<double>(valid);
  return scaled_rate_from_accuracy(accuracy, 0.5, valid);
}

double understanding_value(const std::vector<ConceptFollowup>& per_concept,
                           std::size_t m, double threshold) {
  if (m < 1) throw Error("understanding_value: m must be >= 1");
  if (threshold < 0.0 || threshold > 1.0) {
    throw Error("understanding_value: threshold must be in [0, 1]");
  }
  std::size_t contributing = 0;
  std::size_t understood = 0;
  const double needed = threshold * static_cast<double>(m) - 1e-9;
  for (const auto& entry : per_concept) {
    if (!entry.passed_keystone) continue;
    ++contributing;
    if (static_cast<double>(entry.followup_correct) >= needed) ++understood;
  }
  if (contributing == 0) {
    throw EmptyTallyError("understanding_value: no concept passed the keystone");
  }
  return static_cast<double>(understood) / static_cast<double>(contributing);
}

}  // namespace potemkin
