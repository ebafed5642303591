#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "potemkin/metrics.hpp"  // JudgeCall

namespace potemkin {

/// Response protocol marker. Matched case-sensitively at its last occurrence;
/// the text after it is the machine-readable answer.
struct FinalTag {
  std::string tag_text = "FINAL ANSWER:";
};

struct CompletionRequest {
  std::string model_id;
  std::string prompt;
  double temperature = 0.0;
  std::size_t max_tokens = 1024;
  /// When set, complete() parses the final answer out of the raw completion.
  std::optional<FinalTag> tag_protocol;
};

/// Canonical serialization of the digest-relevant request fields
/// (model_id, prompt, temperature, max_tokens) as JSON with sorted keys.
std::string canonical_request_json(const CompletionRequest& request);

/// Lowercase hex SHA-256 of canonical_request_json. Cache key for the store.
std::string request_digest(const CompletionRequest& request);

enum class TranscriptSource { live, cache, scripted };

std::string to_string(TranscriptSource source);

/// One cached model exchange.
struct Transcript {
  std::string request_digest;
  std::string raw_completion;
  std::optional<std::string> parsed_final;  // present iff tag parsing succeeded
  std::string created_at;                   // ISO-8601 UTC
  TranscriptSource source = TranscriptSource::live;
};

/// Returns the trimmed text after the LAST occurrence of the tag, or nullopt
/// when the tag is absent or nothing follows it (a malformed response; the
/// caller keeps the raw text for the exclusion report).
std::optional<std::string> parse_final(std::string_view raw, const FinalTag& tag = {});

/// Maps a parsed final answer to a judge verdict. The leading token must be
/// "correct" or "incorrect" (case-insensitive); only trailing punctuation is
/// tolerated after it. Anything else is malformed (nullopt).
std::optional<JudgeCall> judge_verdict(std::string_view parsed);

/// Same tolerance rules for yes/no answers; true for "yes".
std::optional<bool> yes_no_verdict(std::string_view parsed);

/// A model backend. complete() returns the raw completion text or throws
/// (TransportError for retryable failures, AuthFailureError otherwise).
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string complete(const CompletionRequest& request) = 0;
  virtual TranscriptSource source() const = 0;
};

/// Deterministic fake backend. Either a rule table (first match wins) or a
/// programmable function, used for reproducible tests and known-ground-truth
/// constructions.
class ScriptedBackend : public Backend {
 public:
  struct Rule {
    std::optional<std::string> model_id;  // match any model when unset
    enum class Match { exact, prefix, contains } match = Match::contains;
    std::string pattern;
    std::string completion;
  };

  explicit ScriptedBackend(std::vector<Rule> rules);
  explicit ScriptedBackend(std::function<std::string(const CompletionRequest&)> fn);

  /// Loads a rule table: {"rules": [{"model_id"?, "match"?, "pattern",
  /// "completion"}]}. match is one of exact|prefix|contains (default contains).
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

  std::string complete(const CompletionRequest& request) override;
  TranscriptSource source() const override { return TranscriptSource::scripted; }

 private:
  std::vector<Rule> rules_;
  std::function<std::string(const CompletionRequest&)> fn_;
};

/// HTTP JSON chat-completion client. Sends the request as a single user
/// message; the first choice's message content is the raw completion. The
/// bearer credential is read from the environment, never from flags.
struct RemoteConfig {
  std::string base_url;                          // e.g. "http://localhost:8080"
  std::string path = "/v1/chat/completions";
  std::string api_key_env = "POTEMKIN_API_KEY";  // name of the env var
  int connect_timeout_ms = 10'000;
  int read_timeout_ms = 120'000;
};

class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig config);
  std::string complete(const CompletionRequest& request) override;
  TranscriptSource source() const override { return TranscriptSource::live; }

 private:
  RemoteConfig config_;
};

/// Append-only line-delimited JSON store of transcripts keyed by request
/// digest. One corrupted line invalidates only that line. Appends are
/// serialized; reads go through an in-memory index maintained under the same
/// lock.
class TranscriptStore {
 public:
  explicit TranscriptStore(std::filesystem::path file, bool read_only = false);

  std::optional<Transcript> find(const std::string& digest) const;
  void append(const Transcript& transcript);

  std::size_t size() const;
  std::size_t corrupt_lines_skipped() const { return corrupt_lines_; }
  const std::filesystem::path& file() const { return file_; }
  bool read_only() const { return read_only_; }

  /// Rewrites the file with records sorted by digest (atomic tmp + rename).
  /// Called at the end of successful runs so output trees are byte-stable
  /// regardless of request parallelism.
  void compact();

  static std::string to_line(const Transcript& transcript);
  static std::optional<Transcript> from_line(const std::string& line);

 private:
  std::filesystem::path file_;
  bool read_only_;
  mutable std::mutex mutex_;
  std::unordered_map<std::string, Transcript> index_;
  std::vector<std::string> order_;  // digests in append order
  std::size_t corrupt_lines_ = 0;
};

struct OracleOptions {
  std::size_t max_attempts = 5;       // transient transport failures, with
  std::size_t backoff_base_ms = 250;  // exponential backoff between attempts
  std::optional<std::size_t> max_backend_calls;  // BudgetExceededError beyond
  /// Clock used to stamp new transcripts. Scripted and cache-only runs use a
  /// fixed clock so output trees are bit-reproducible.
  std::function<std::string()> clock;
};

std::string system_utc_iso8601();
std::function<std::string()> fixed_clock();  // "1970-01-01T00:00:00Z"

/// Cache-first completion front end. A null backend means cache-only: any
/// miss throws CacheMissError. A null store disables caching.
class ModelOracle {
 public:
  ModelOracle(std::shared_ptr<Backend> backend,
              std::shared_ptr<TranscriptStore> store, OracleOptions options = {});

  Transcript complete(const CompletionRequest& request);

  std::size_t backend_calls() const { return backend_calls_; }
  TranscriptStore* store() const { return store_.get(); }

 private:
  std::shared_ptr<Backend> backend_;
  std::shared_ptr<TranscriptStore> store_;
  OracleOptions options_;
  std::mutex budget_mutex_;
  std::size_t backend_calls_ = 0;
};

}  // namespace potemkin
