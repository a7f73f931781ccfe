// SPDX-License-Identifier: Apache-2.0

#ifndef DPA_GATEWAY_HPP
#define DPA_GATEWAY_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dpa/concurrency.hpp"
#include "dpa/errors.hpp"
#include "dpa/prompts.hpp"
#include "dpa/text_norm.hpp"
#include "dpa/types.hpp"
#include "json.hpp"

namespace dpa {

struct CompletionRequest {
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 256;
  std::string model_name = "gpt-3.5-turbo";
};

struct CompletionResult {
  std::string text;
  std::optional<double> logprob;  // sequence log-probability, if reported
};

/// One round-trip to a completion backend. Implementations throw
/// GatewayError; Timeout/Transport kinds are considered transient.
class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual CompletionResult complete_once(const CompletionRequest& request) = 0;
};

struct RetryPolicy {
  std::uint64_t base_ms = 1000;
  std::uint64_t factor = 2;
  int max_attempts = 5;
};

/// Wraps a client with retry/backoff, an in-flight bound, and an optional
/// audit trail. Shareable across threads.
class Gateway {
 public:
  using SleepFn = std::function<void(std::uint64_t /*ms*/)>;
  using AuditFn = std::function<void(const nlohmann::ordered_json&)>;

  Gateway(std::shared_ptr<LlmClient> client, RetryPolicy policy = {},
          std::size_t max_in_flight = 4, SleepFn sleep = {})
      : client_(std::move(client)),
        policy_(policy),
        semaphore_(max_in_flight),
        sleep_(std::move(sleep)) {}

  void set_audit(AuditFn audit) { audit_ = std::move(audit); }

  CompletionResult complete_full(const CompletionRequest& request) {
    if (request.prompt.empty()) {
      throw std::invalid_argument("prompt must be non-empty");
    }
    std::uint64_t backoff = policy_.base_ms;
    int attempt = 0;
    for (;;) {
      ++attempt;
      try {
        CompletionResult result;
        {
          SemaphoreGuard guard(semaphore_);
          result = client_->complete_once(request);
        }
        audit(request, &result, nullptr, attempt);
        return result;
      } catch (const GatewayError& e) {
        const bool transient = e.kind() == GatewayError::Kind::Timeout ||
                               e.kind() == GatewayError::Kind::Transport;
        if (!transient || attempt >= policy_.max_attempts) {
          audit(request, nullptr, &e, attempt);
          throw;
        }
        if (sleep_) sleep_(backoff);
        backoff *= policy_.factor;
      }
    }
  }

  std::string complete(const CompletionRequest& request) {
    return complete_full(request).text;
  }

 private:
  void audit(const CompletionRequest& request, const CompletionResult* result,
             const GatewayError* error, int attempts) {
    if (!audit_) return;
    nlohmann::ordered_json entry;
    entry["prompt"] = request.prompt;
    entry["attempts"] = attempts;
    if (result) {
      entry["response"] = result->text;
      if (result->logprob) entry["logprob"] = *result->logprob;
    }
    if (error) entry["error"] = error->what();
    std::lock_guard lock(audit_mu_);
    audit_(entry);
  }

  std::shared_ptr<LlmClient> client_;
  RetryPolicy policy_;
  Semaphore semaphore_;
  SleepFn sleep_;
  AuditFn audit_;
  std::mutex audit_mu_;
};

// ---------------------------------------------------------------------------
// Deterministic mocks
// ---------------------------------------------------------------------------

/// Table-driven mock. For each prompt a sequence of scripted replies is
/// consumed in call order (the last entry repeats); entries may instead
/// throw a scripted error. Output depends only on (prompt, call count).
class MockChatClient : public LlmClient {
 public:
  struct Scripted {
    std::string text;
    std::optional<double> logprob;
    std::optional<GatewayError::Kind> fail;  // throw instead of replying
  };

  void add_reply(const std::string& prompt, std::string text,
                 std::optional<double> logprob = std::nullopt) {
    table_[prompt].push_back({std::move(text), logprob, std::nullopt});
  }

  void add_failure(const std::string& prompt, GatewayError::Kind kind) {
    table_[prompt].push_back({{}, std::nullopt, kind});
  }

  CompletionResult complete_once(const CompletionRequest& request) override {
    Scripted scripted;
    {
      std::lock_guard lock(mu_);
      auto it = table_.find(request.prompt);
      if (it == table_.end() || it->second.empty()) {
        throw GatewayError(GatewayError::Kind::UnmappedPrompt,
                           "unmapped prompt: " + request.prompt.substr(0, 80));
      }
      auto& count = calls_[request.prompt];
      const auto& seq = it->second;
      scripted = seq[std::min(count, seq.size() - 1)];
      ++count;
    }
    if (scripted.fail) {
      throw GatewayError(*scripted.fail, "scripted failure");
    }
    return {scripted.text, scripted.logprob};
  }

 private:
  std::mutex mu_;
  std::map<std::string, std::vector<Scripted>> table_;
  std::map<std::string, std::size_t> calls_;
};

// ---------------------------------------------------------------------------
// NLI
// ---------------------------------------------------------------------------

struct NliVerdict {
  NliLabel label = NliLabel::Neutral;
  double scores[3] = {0, 0, 0};  // entailment, neutral, contradiction

  void validate() const {
    double sum = 0;
    double best = -1;
    int best_idx = -1;
    for (int i = 0; i < 3; ++i) {
      if (scores[i] < 0) throw std::logic_error("NLI score < 0");
      sum += scores[i];
      if (scores[i] > best) {
        best = scores[i];
        best_idx = i;
      }
    }
    if (std::fabs(sum - 1.0) > 1e-6) throw std::logic_error("NLI scores must sum to 1");
    static const NliLabel order[3] = {NliLabel::Entailment, NliLabel::Neutral,
                                      NliLabel::Contradiction};
    if (order[best_idx] != label) throw std::logic_error("NLI label != argmax of scores");
  }
};

class NliScorer {
 public:
  virtual ~NliScorer() = default;
  virtual NliVerdict judge(const std::string& premise,
                           const std::string& hypothesis) = 0;
};

inline NliVerdict nli_judge(NliScorer& scorer, const std::string& premise,
                            const std::string& hypothesis) {
  if (premise.empty() || hypothesis.empty()) {
    throw std::invalid_argument("premise and hypothesis must be non-empty");
  }
  auto verdict = scorer.judge(premise, hypothesis);
  verdict.validate();
  return verdict;
}

/// Offline stand-in scoring by Jaccard overlap of normalized token sets:
/// >= 0.8 entailment, < 0.2 contradiction, otherwise neutral.
class LexicalNliScorer : public NliScorer {
 public:
  NliVerdict judge(const std::string& premise, const std::string& hypothesis) override {
    const auto a_tokens = normalize_tokens(premise);
    const auto b_tokens = normalize_tokens(hypothesis);
    const std::set<std::string> a(a_tokens.begin(), a_tokens.end());
    const std::set<std::string> b(b_tokens.begin(), b_tokens.end());

    double jaccard;
    if (a.empty() && b.empty()) {
      jaccard = 1.0;
    } else {
      std::size_t inter = 0;
      for (const auto& t : a) inter += b.count(t);
      jaccard = static_cast<double>(inter) / static_cast<double>(a.size() + b.size() - inter);
    }

    NliVerdict v;
    if (jaccard >= 0.8) {
      v.label = NliLabel::Entailment;
    } else if (jaccard < 0.2) {
      v.label = NliLabel::Contradiction;
    } else {
      v.label = NliLabel::Neutral;
    }
    v.scores[0] = v.scores[1] = v.scores[2] = 0.1;
    v.scores[static_cast<int>(v.label)] = 0.8;
    return v;
  }
};

/// NLI over a chat endpoint: asks for one word and reports it one-hot.
class RemoteNliScorer : public NliScorer {
 public:
  explicit RemoteNliScorer(std::shared_ptr<Gateway> gateway)
      : gateway_(std::move(gateway)) {}

  NliVerdict judge(const std::string& premise, const std::string& hypothesis) override {
    CompletionRequest req;
    req.prompt = nli_prompt(premise, hypothesis);
    req.max_tokens = 4;
    std::string reply = gateway_->complete(req);
    // trim
    const auto first = reply.find_first_not_of(" \t\r\n");
    const auto last = reply.find_last_not_of(" \t\r\n");
    if (first == std::string::npos) {
      throw GatewayError(GatewayError::Kind::BadReply, "empty NLI reply");
    }
    reply = reply.substr(first, last - first + 1);
    std::transform(reply.begin(), reply.end(), reply.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });

    NliVerdict v;
    try {
      v.label = nli_label_from(reply);
    } catch (const std::invalid_argument&) {
      throw GatewayError(GatewayError::Kind::BadReply,
                         "NLI reply not one of entailment/neutral/contradiction: " + reply);
    }
    v.scores[0] = v.scores[1] = v.scores[2] = 0.0;
    v.scores[static_cast<int>(v.label)] = 1.0;
    return v;
  }

 private:
  std::shared_ptr<Gateway> gateway_;
};

// ---------------------------------------------------------------------------
// Preference scoring through the reader
// ---------------------------------------------------------------------------

enum class ScoreMode { Logit, Rating };

inline ScoreMode score_mode_from(const std::string& s) {
  if (s == "logit") return ScoreMode::Logit;
  if (s == "rating") return ScoreMode::Rating;
  throw std::invalid_argument("unknown score mode: " + s);
}

/// Logit mode returns the backend's reported sequence log-probability for
/// the answer prompt; rating mode asks for an integer 1..5 and parses it.
inline double score_document(Gateway& reader, const std::string& query,
                             const PromptDoc& doc, ScoreMode mode) {
  if (mode == ScoreMode::Logit) {
    CompletionRequest req;
    req.prompt = sft_prompt(query, {doc});
    const auto result = reader.complete_full(req);
    if (!result.logprob) {
      throw GatewayError(GatewayError::Kind::MalformedBody,
                         "backend reported no log-probability for logit scoring");
    }
    return *result.logprob;
  }

  CompletionRequest req;
  req.prompt = rating_prompt(query, doc);
  req.max_tokens = 4;
  const std::string reply = reader.complete(req);
  const auto first = reply.find_first_not_of(" \t\r\n");
  const auto last = reply.find_last_not_of(" \t\r\n");
  const std::string trimmed =
      first == std::string::npos ? "" : reply.substr(first, last - first + 1);
  if (trimmed.size() == 1 && trimmed[0] >= '1' && trimmed[0] <= '5') {
    return static_cast<double>(trimmed[0] - '0');
  }
  throw GatewayError(GatewayError::Kind::BadReply,
                     "unparseable rating reply: \"" + reply + "\"");
}

enum class CompareWinner { A, B };

inline CompareWinner compare_documents(Gateway& reader, const std::string& query,
                                       const PromptDoc& doc_a, const PromptDoc& doc_b) {
  CompletionRequest req;
  req.prompt = compare_prompt(query, doc_a, doc_b);
  req.max_tokens = 2;
  const std::string reply = reader.complete(req);
  const auto first = reply.find_first_not_of(" \t\r\n");
  const auto last = reply.find_last_not_of(" \t\r\n");
  const std::string trimmed =
      first == std::string::npos ? "" : reply.substr(first, last - first + 1);
  if (trimmed == "A") return CompareWinner::A;
  if (trimmed == "B") return CompareWinner::B;
  throw GatewayError(GatewayError::Kind::BadReply,
                     "comparison reply is neither A nor B: \"" + reply + "\"");
}

}  // namespace dpa

#endif  // DPA_GATEWAY_HPP
