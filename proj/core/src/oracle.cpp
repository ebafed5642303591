#include "potemkin/oracle.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

#include "potemkin/digest.hpp"
#include "potemkin/errors.hpp"

namespace potemkin {

using nlohmann::json;

std::string canonical_request_json(const CompletionRequest& request) {
  json doc;
  doc["max_tokens"] = request.max_tokens;
  doc["model_id"] = request.model_id;
  doc["prompt"] = request.prompt;
  doc["temperature"] = request.temperature;
  return doc.dump();  // keys are emitted sorted
}

std::string request_digest(const CompletionRequest& request) {
  return sha256_hex(canonical_request_json(request));
}

std::string to_string(TranscriptSource source) {
  switch (source) {
    case TranscriptSource::live: return "live";
    case TranscriptSource::cache: return "cache";
    case TranscriptSource::scripted: return "scripted";
  }
  return "unknown";
}

namespace {

TranscriptSource source_from_string(const std::string& s) {
  if (s == "live") return TranscriptSource::live;
  if (s == "cache") return TranscriptSource::cache;
  if (s == "scripted") return TranscriptSource::scripted;
  throw SchemaError("unknown transcript source '" + s + "'");
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

bool is_punct_char(char c) {
  return std::string_view{".,;:!?'\"`)]}"}.find(c) != std::string_view::npos;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

/// Leading token with only trailing punctuation allowed after it, lowercased
/// and stripped of that punctuation; nullopt when extra content follows.
std::optional<std::string> sole_token(std::string_view parsed) {
  auto text = trim(parsed);
  if (text.empty()) return std::nullopt;
  std::size_t end = 0;
  while (end < text.size() && !std::isspace(static_cast<unsigned char>(text[end]))) {
    ++end;
  }
  std::string_view token = text.substr(0, end);
  std::string_view rest = text.substr(end);
  for (char c : rest) {
    if (!std::isspace(static_cast<unsigned char>(c)) && !is_punct_char(c)) {
      return std::nullopt;
    }
  }
  while (!token.empty() && is_punct_char(token.back())) token.remove_suffix(1);
  if (token.empty()) return std::nullopt;
  return lower(token);
}

}  // namespace

std::optional<std::string> parse_final(std::string_view raw, const FinalTag& tag) {
  if (tag.tag_text.empty()) throw Error("parse_final: tag_text must be non-empty");
  auto pos = raw.rfind(tag.tag_text);
  if (pos == std::string_view::npos) return std::nullopt;
  auto after = trim(raw.substr(pos + tag.tag_text.size()));
  if (after.empty()) return std::nullopt;
  return std::string(after);
}

std::optional<JudgeCall> judge_verdict(std::string_view parsed) {
  auto token = sole_token(parsed);
  if (!token) return std::nullopt;
  if (*token == "correct") return JudgeCall::correct;
  if (*token == "incorrect") return JudgeCall::incorrect;
  return std::nullopt;
}

std::optional<bool> yes_no_verdict(std::string_view parsed) {
  auto token = sole_token(parsed);
  if (!token) return std::nullopt;
  if (*token == "yes") return true;
  if (*token == "no") return false;
  return std::nullopt;
}

// --- Scripted backend -------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<Rule> rules) : rules_(std::move(rules)) {}

ScriptedBackend::ScriptedBackend(std::function<std::string(const CompletionRequest&)> fn)
    : fn_(std::move(fn)) {}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open scripted backend file " + path.string());
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": invalid JSON: " + e.what());
  }
  if (!doc.is_object() || !doc.contains("rules") || !doc["rules"].is_array()) {
    throw SchemaError(path.string() + ": expected {rules: [...]}");
  }
  std::vector<Rule> rules;
  std::size_t i = 0;
  for (const auto& entry : doc["rules"]) {
    const std::string where = path.string() + ": rules[" + std::to_string(i++) + "]";
    if (!entry.is_object() || !entry.contains("pattern") || !entry.contains("completion")) {
      throw SchemaError(where + ": expected {pattern, completion}");
    }
    Rule rule;
    if (entry.contains("model_id")) rule.model_id = entry["model_id"].get<std::string>();
    const std::string match = entry.value("match", std::string{"contains"});
    if (match == "exact") {
      rule.match = Rule::Match::exact;
    } else if (match == "prefix") {
      rule.match = Rule::Match::prefix;
    } else if (match == "contains") {
      rule.match = Rule::Match::contains;
    } else {
      throw SchemaError(where + ".match: expected exact|prefix|contains");
    }
    rule.pattern = entry["pattern"].get<std::string>();
    rule.completion = entry["completion"].get<std::string>();
    rules.push_back(std::move(rule));
  }
  return std::make_shared<ScriptedBackend>(std::move(rules));
}

std::string ScriptedBackend::complete(const CompletionRequest& request) {
  if (fn_) return fn_(request);
  for (const auto& rule : rules_) {
    if (rule.model_id && *rule.model_id != request.model_id) continue;
    bool hit = false;
    switch (rule.match) {
      case Rule::Match::exact:
        hit = request.prompt == rule.pattern;
        break;
      case Rule::Match::prefix:
        hit = request.prompt.rfind(rule.pattern, 0) == 0;
        break;
      case Rule::Match::contains:
        hit = request.prompt.find(rule.pattern) != std::string::npos;
        break;
    }
    if (hit) return rule.completion;
  }
  throw BackendUnavailableError("scripted backend has no completion for model '" +
                                request.model_id + "' prompt: " +
                                request.prompt.substr(0, 120));
}

// --- Remote backend ---------------------------------------------------------

RemoteBackend::RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
  if (config_.base_url.empty()) {
    throw SchemaError("remote backend requires a base_url");
  }
}

std::string RemoteBackend::complete(const CompletionRequest& request) {
  httplib::Client client(config_.base_url);
  client.set_connection_timeout(0, config_.connect_timeout_ms * 1000);
  client.set_read_timeout(config_.read_timeout_ms / 1000,
                          (config_.read_timeout_ms % 1000) * 1000);

  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str());
      key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  json body;
  body["model"] = request.model_id;
  body["messages"] = json::array({{{"role", "user"}, {"content", request.prompt}}});
  body["temperature"] = request.temperature;
  body["max_tokens"] = request.max_tokens;

  auto result = client.Post(config_.path, headers, body.dump(), "application/json");
  if (!result) {
    throw TransportError("remote backend: transport failure: " +
                         httplib::to_string(result.error()));
  }
  if (result->status == 401 || result->status == 403) {
    throw AuthFailureError("remote backend: authorization rejected (HTTP " +
                           std::to_string(result->status) + ")");
  }
  if (result->status == 429 || result->status >= 500) {
    throw TransportError("remote backend: HTTP " + std::to_string(result->status));
  }
  if (result->status != 200) {
    throw BackendUnavailableError("remote backend: HTTP " +
                                  std::to_string(result->status) + ": " +
                                  result->body.substr(0, 200));
  }
  json doc;
  try {
    doc = json::parse(result->body);
  } catch (const json::parse_error& e) {
    throw BackendUnavailableError(std::string("remote backend: invalid JSON: ") +
                                  e.what());
  }
  try {
    const auto& choices = doc.at("choices");
    if (choices.empty()) {
      throw BackendUnavailableError("remote backend: empty choices");
    }
    const auto& first = choices.at(0);
    if (first.contains("message")) {
      return first.at("message").at("content").get<std::string>();
    }
    return first.at("text").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendUnavailableError(std::string("remote backend: unexpected shape: ") +
                                  e.what());
  }
}

// --- Transcript store -------------------------------------------------------

std::string TranscriptStore::to_line(const Transcript& transcript) {
  json doc;
  doc["request_digest"] = transcript.request_digest;
  doc["raw_completion"] = transcript.raw_completion;
  if (transcript.parsed_final) {
    doc["parsed_final"] = *transcript.parsed_final;
  } else {
    doc["parsed_final"] = nullptr;
  }
  doc["created_at"] = transcript.created_at;
  doc["source"] = to_string(transcript.source);
  return doc.dump();
}

std::optional<Transcript> TranscriptStore::from_line(const std::string& line) {
  try {
    json doc = json::parse(line);
    Transcript t;
    t.request_digest = doc.at("request_digest").get<std::string>();
    t.raw_completion = doc.at("raw_completion").get<std::string>();
    if (doc.contains("parsed_final") && !doc["parsed_final"].is_null()) {
      t.parsed_final = doc["parsed_final"].get<std::string>();
    }
    t.created_at = doc.at("created_at").get<std::string>();
    t.source = source_from_string(doc.at("source").get<std::string>());
    return t;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

TranscriptStore::TranscriptStore(std::filesystem::path file, bool read_only)
    : file_(std::move(file)), read_only_(read_only) {
  std::ifstream in(file_);
  if (!in) {
    if (read_only_) {
      throw CacheMissError("transcript store not found: " + file_.string());
    }
    if (file_.has_parent_path()) {
      std::filesystem::create_directories(file_.parent_path());
    }
    std::ofstream touch(file_, std::ios::app);  // fresh store starts empty
    if (!touch) throw Error("cannot create transcript store " + file_.string());
    return;
  }
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto t = from_line(line);
    if (!t) {
      ++corrupt_lines_;
      continue;
    }
    auto [it, inserted] = index_.emplace(t->request_digest, std::move(*t));
    if (inserted) order_.push_back(it->first);
  }
}

std::optional<Transcript> TranscriptStore::find(const std::string& digest) const {
  std::lock_guard lock(mutex_);
  auto it = index_.find(digest);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

void TranscriptStore::append(const Transcript& transcript) {
  std::lock_guard lock(mutex_);
  if (read_only_) {
    throw Error("transcript store is read-only: " + file_.string());
  }
  if (index_.count(transcript.request_digest)) return;  // content-addressed
  std::ofstream out(file_, std::ios::app);
  if (!out) throw Error("cannot append to transcript store " + file_.string());
  out << to_line(transcript) << '\n';
  out.flush();
  auto [it, inserted] = index_.emplace(transcript.request_digest, transcript);
  if (inserted) order_.push_back(it->first);
}

std::size_t TranscriptStore::size() const {
  std::lock_guard lock(mutex_);
  return index_.size();
}

void TranscriptStore::compact() {
  std::lock_guard lock(mutex_);
  if (read_only_) return;
  std::vector<std::string> digests = order_;
  std::sort(digests.begin(), digests.end());
  auto tmp = file_;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot write transcript store " + tmp.string());
    for (const auto& digest : digests) {
      out << to_line(index_.at(digest)) << '\n';
    }
  }
  std::filesystem::rename(tmp, file_);
}

// --- Clocks -----------------------------------------------------------------

std::string system_utc_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::function<std::string()> fixed_clock() {
  return [] { return std::string("1970-01-01T00:00:00Z"); };
}

// --- Oracle -------------------------------------------------------------------

ModelOracle::ModelOracle(std::shared_ptr<Backend> backend,
                         std::shared_ptr<TranscriptStore> store,
                         OracleOptions options)
    : backend_(std::move(backend)),
      store_(std::move(store)),
      options_(std::move(options)) {
  if (!options_.clock) options_.clock = system_utc_iso8601;
}

Transcript ModelOracle::complete(const CompletionRequest& request) {
  if (request.prompt.empty()) throw Error("complete: prompt must be non-empty");
  const std::string digest = request_digest(request);

  if (store_) {
    if (auto cached = store_->find(digest)) {
      cached->source = TranscriptSource::cache;
      return *cached;
    }
  }
  if (!backend_) {
    throw CacheMissError("cache-only run: no transcript for digest " + digest);
  }

  {
    std::lock_guard lock(budget_mutex_);
    if (options_.max_backend_calls && backend_calls_ >= *options_.max_backend_calls) {
      throw BudgetExceededError("backend call budget of " +
                                std::to_string(*options_.max_backend_calls) +
                                " exhausted");
    }
    ++backend_calls_;
  }

  std::string raw;
  std::string last_error;
  bool done = false;
  for (std::size_t attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    try {
      raw = backend_->complete(request);
      done = true;
      break;
    } catch (const TransportError& e) {
      last_error = e.what();
      if (attempt == options_.max_attempts) break;
      const auto delay = options_.backoff_base_ms * (1ULL << (attempt - 1));
      if (delay > 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(delay));
      }
      std::lock_guard lock(budget_mutex_);
      if (options_.max_backend_calls &&
          backend_calls_ >= *options_.max_backend_calls) {
        throw BudgetExceededError("backend call budget exhausted mid-retry");
      }
      ++backend_calls_;
    }
  }
  if (!done) {
    throw BackendUnavailableError("backend unavailable after " +
                                  std::to_string(options_.max_attempts) +
                                  " attempts: " + last_error);
  }

  Transcript t;
  t.request_digest = digest;
  t.raw_completion = raw;
  if (request.tag_protocol) {
    t.parsed_final = parse_final(raw, *request.tag_protocol);
  }
  t.created_at = options_.clock();
  t.source = backend_->source();
  if (store_) store_->append(t);
  return t;
}

}  // namespace potemkin
