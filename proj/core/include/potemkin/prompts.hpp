#pragma once

#include <cstddef>
#include <map>
#include <string>

namespace potemkin::prompts {

/// Replaces every "{slot}" occurrence with its value.
std::string render(std::string text, const std::map<std::string, std::string>& slots);

// Automated-evaluation protocol prompts. The only substitution slots are
// {concept}, {question}, {num_subquestions}, {FINAL_TAG}, {initial_answer}
// and {model_answer}.
std::string question_generation(const std::string& concept_name,
                                const std::string& question,
                                std::size_t num_subquestions);
std::string correct_answer(const std::string& question, const std::string& final_tag);
std::string incorrect_answer(const std::string& question,
                             const std::string& initial_answer,
                             const std::string& final_tag);
std::string judge(const std::string& question, const std::string& model_answer,
                  const std::string& final_tag);

/// Judge prompt for grading a candidate definition against the concept's
/// reference definition.
std::string definition_judge(const std::string& concept_name,
                             const std::string& reference_definition,
                             const std::string& candidate,
                             const std::string& final_tag);

// Incoherence-procedure prompts: generate an instance or non-instance, then
// re-classify the generated text in a separate query.
std::string generate_instance(const std::string& concept_name, bool positive,
                              std::size_t index, std::size_t total,
                              const std::string& final_tag);
std::string generate_instances_batched(const std::string& concept_name, bool positive,
                                       std::size_t count, const std::string& final_tag);
std::string reclassify_instance(const std::string& concept_name,
                                const std::string& example,
                                const std::string& final_tag);

}  // namespace potemkin::prompts
