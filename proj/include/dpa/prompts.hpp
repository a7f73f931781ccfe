// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_PROMPTS_HPP
#define DPA_PROMPTS_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "dpa/types.hpp"

namespace dpa {

// Every prompt emitted by the pipeline is rendered here and nowhere else.
// The rendered bytes are part of the external contract: golden-file tests
// pin each template, and training-file emission must be reproducible, so
// do not touch the literals without regenerating the goldens.

struct PromptDoc {
  std::string title;
  std::string text;
};

/// "document-1: (title) T (content) X" lines joined by newlines, 1-based.
inline std::string render_doc_block(const std::vector<PromptDoc>& docs) {
  std::string out;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (i > 0) out.push_back('\n');
    out += "document-" + std::to_string(i + 1) + ": (title) " + docs[i].title +
           " (content) " + docs[i].text;
  }
  return out;
}

/// Reader prompt for answering with retrieved documents (the SFT format).
inline std::string sft_prompt(const std::string& query,
                              const std::vector<PromptDoc>& docs) {
  return "Given the documents " + render_doc_block(docs) +
         ". Answer the following question based on the given information or "
         "your internal knowledge with few words without the source. Query: " +
         query + ".";
}

/// Reader prompt for answering without any documents.
inline std::string direct_prompt(const std::string& query) {
  return "Answer the following question based on your internal knowledge "
         "with few words without the source. Query: " +
         query + ".";
}

/// Pre-aligned-stage prompt: the SFT prompt plus the judgement question
/// about the planted document at 1-based `position`.
inline std::string prealigned_prompt(const std::string& query,
                                     const std::vector<PromptDoc>& docs,
                                     int position) {
  return sft_prompt(query, docs) + "\n[Judgement]: document-" +
         std::to_string(position) +
         " is Positive or Negative knowledge for answering question.";
}

/// Supervision string for the pre-aligned stage: the gold answer followed by
/// the resolved judgement sentence.
inline std::string prealigned_target(const std::string& gold_answer,
                                     int position, bool positive) {
  return gold_answer + "\n[Judgement]: document-" + std::to_string(position) +
         " is " + (positive ? "Positive" : "Negative") +
         " knowledge for answering question.";
}

/// The rewriting requirement sentence for each augmentation strategy.
inline const char* augmentation_requirement(AugStrategy strategy) {
  switch (strategy) {
    case AugStrategy::Rephrasing:
      return "Rephrase the original query with the same intention.";
    case AugStrategy::Complexity:
      return "Increase the semantic complexity of the original query.";
    case AugStrategy::Decomposition:
      return "Decompose the original query into several sub-problems.";
    case AugStrategy::Constraint:
      return "Add more conditional and constrained statements to the original query.";
    case AugStrategy::SPARQL:
      return "Rewrite the original query based on the SPARQL syntax and generate it directly.";
  }
  throw std::logic_error("bad AugStrategy");
}

inline std::string augmentation_prompt(const std::string& query,
                                       const std::vector<PromptDoc>& top_docs,
                                       const std::string& title,
                                       AugStrategy strategy) {
  return "You are an AI assistant helping me rewrite the query. I will give "
         "you the original query, reference document, title and rewriting "
         "requirements. Please rewrite the query based on the following "
         "information:\n\nOriginal Query: " +
         query + "\nReference Documents: " + render_doc_block(top_docs) +
         "\nTitle: " + title +
         "\nAugmentation Requirements: " + augmentation_requirement(strategy) +
         "\nNew Queries:";
}

/// 1-to-5 preference rating prompt (instruction-following readers).
inline std::string rating_prompt(const std::string& query, const PromptDoc& doc) {
  return "Rate how helpful the following document is for answering the "
         "query, on a scale from 1 to 5. Reply with a single integer.\n"
         "Query: " +
         query + "\n" + render_doc_block({doc}) + "\nScore:";
}

/// Pairwise preference prompt (strong readers); A/B order is the caller's.
inline std::string compare_prompt(const std::string& query, const PromptDoc& a,
                                  const PromptDoc& b) {
  return "Given a query and two documents A and B, reply with the single "
         "letter A or B to indicate which document better helps answer the "
         "query.\nQuery: " +
         query + "\nA: (title) " + a.title + " (content) " + a.text +
         "\nB: (title) " + b.title + " (content) " + b.text + "\nAnswer:";
}

/// Prompt used when NLI filtering is served by a chat endpoint.
inline std::string nli_prompt(const std::string& premise,
                              const std::string& hypothesis) {
  return "Classify the relationship between the premise and the hypothesis "
         "as exactly one word: entailment, neutral, or contradiction.\n"
         "Premise: " +
         premise + "\nHypothesis: " + hypothesis + "\nRelation:";
}

}  // namespace dpa

#endif  // DPA_PROMPTS_HPP
