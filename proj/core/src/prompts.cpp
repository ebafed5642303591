#include "potemkin/prompts.hpp"

namespace potemkin::prompts {

std::string render(std::string text, const std::map<std::string, std::string>& slots) {
  for (const auto& [name, value] : slots) {
    const std::string needle = "{" + name + "}";
    std::size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
      text.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return text;
}

namespace {

constexpr const char* kQuestionGeneration =
    "The following is a question about the following concept: {concept}.\n"
    "\n"
    "Here is the question: {question}.\n"
    "\n"
    "Write {num_subquestions} other questions that test whether someone who "
    "understands the concepts the question is testing truly understands them.";

constexpr const char* kCorrectAnswer =
    "You are an expert tutor. You may think step-by-step to reach the solution, "
    "but you MUST finish with an answer that starts exactly with `{FINAL_TAG}` "
    "followed by your single best answer. If the question asks you to explain "
    "your answer, you should also include the explanation after `{FINAL_TAG}`.\n"
    "\n"
    "\n"
    "Question:{question}";

constexpr const char* kIncorrectAnswer =
    "Modify the following answer to introduce a subtle error. The error should "
    "be subtle but one such that a human who knows the concept would know the "
    "answer is incorrect. If the answer is already incorrect, you can leave it "
    "the same. You can reason all you'd like, but end the response with "
    "`{FINAL_TAG}` followed by the full modified answer.\n"
    "\n"
    "Question: {question}\n"
    "Answer: {initial_answer}";

constexpr const char* kJudge =
    "You are an expert tutor. You will be given a question and a possible answer "
    "to the question. Your job is to determine if the answer is correct or "
    "incorrect. You should only grade it correct if the answer (including the "
    "reasoning) is completely correct. You can reason all you'd like, but end "
    "the response with `{FINAL_TAG}` followed by either 'correct' or "
    "'incorrect', and nothing should come after that.\n"
    "\n"
    "\n"
    "Question: {question}\n"
    "Answer: {model_answer}";

constexpr const char* kDefinitionJudge =
    "You are an expert tutor. You will be given the name of a concept, a "
    "reference definition of that concept, and a candidate definition. Your job "
    "is to determine if the candidate definition is correct. You should only "
    "grade it correct if it is consistent with the reference definition. You "
    "can reason all you'd like, but end the response with `{FINAL_TAG}` "
    "followed by either 'correct' or 'incorrect', and nothing should come "
    "after that.\n"
    "\n"
    "Concept: {concept}\n"
    "Reference definition: {reference_definition}\n"
    "Candidate definition: {candidate}";

constexpr const char* kGenerateInstance =
    "Consider the concept: {concept}. Generate an example that is {polarity} "
    "instance of this concept. This is request {index} of {total}; produce a "
    "fresh example. You can reason all you'd like, but end the response with "
    "`{FINAL_TAG}` followed by only the example.";

constexpr const char* kGenerateInstancesBatched =
    "Consider the concept: {concept}. Generate {count} different examples, each "
    "of which is {polarity} instance of this concept. You can reason all you'd "
    "like, but end the response with `{FINAL_TAG}` followed by the examples, "
    "one per line.";

constexpr const char* kReclassifyInstance =
    "Is the following example a true instance of the concept: {concept}? You "
    "can reason all you'd like, but end the response with `{FINAL_TAG}` "
    "followed by either 'yes' or 'no', and nothing should come after that.\n"
    "\n"
    "Example: {example}";

}  // namespace

std::string question_generation(const std::string& concept_name,
                                const std::string& question,
                                std::size_t num_subquestions) {
  return render(kQuestionGeneration,
                {{"concept", concept_name},
                 {"question", question},
                 {"num_subquestions", std::to_string(num_subquestions)}});
}

std::string correct_answer(const std::string& question, const std::string& final_tag) {
  return render(kCorrectAnswer, {{"question", question}, {"FINAL_TAG", final_tag}});
}

std::string incorrect_answer(const std::string& question,
                             const std::string& initial_answer,
                             const std::string& final_tag) {
  return render(kIncorrectAnswer, {{"question", question},
                                   {"initial_answer", initial_answer},
                                   {"FINAL_TAG", final_tag}});
}

std::string judge(const std::string& question, const std::string& model_answer,
                  const std::string& final_tag) {
  return render(kJudge, {{"question", question},
                         {"model_answer", model_answer},
                         {"FINAL_TAG", final_tag}});
}

std::string definition_judge(const std::string& concept_name,
                             const std::string& reference_definition,
                             const std::string& candidate,
                             const std::string& final_tag) {
  return render(kDefinitionJudge, {{"concept", concept_name},
                                   {"reference_definition", reference_definition},
                                   {"candidate", candidate},
                                   {"FINAL_TAG", final_tag}});
}

std::string generate_instance(const std::string& concept_name, bool positive,
                              std::size_t index, std::size_t total,
                              const std::string& final_tag) {
  return render(kGenerateInstance,
                {{"concept", concept_name},
                 {"polarity", positive ? "a true" : "NOT a true"},
                 {"index", std::to_string(index)},
                 {"total", std::to_string(total)},
                 {"FINAL_TAG", final_tag}});
}

std::string generate_instances_batched(const std::string& concept_name, bool positive,
                                       std::size_t count, const std::string& final_tag) {
  return render(kGenerateInstancesBatched,
                {{"concept", concept_name},
                 {"polarity", positive ? "a true" : "NOT a true"},
                 {"count", std::to_string(count)},
                 {"FINAL_TAG", final_tag}});
}

std::string reclassify_instance(const std::string& concept_name,
                                const std::string& example,
                                const std::string& final_tag) {
  return render(kReclassifyInstance,
                {{"concept", concept_name}, {"example", example}, {"FINAL_TAG", final_tag}});
}

}  // namespace potemkin::prompts
