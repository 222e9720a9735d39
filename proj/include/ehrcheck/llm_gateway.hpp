#pragma once

// Prompt templates and extraction backends. Every model call in the pipeline
// goes through Backend::complete.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace ehrcheck {

struct PromptInstance {
  std::string template_name;
  std::map<std::string, std::string> placeholders;
  std::string rendered_text;
  /// Script lookup keys; not part of the rendered text.
  std::string note_id;
  std::string entity;
};

class PromptLibrary {
 public:
  /// The templates compiled in from data/prompts.
  static PromptLibrary bundled();
  /// Bundled templates overridden by any `<name>.txt` files in `dir`.
  static PromptLibrary with_overrides(const std::filesystem::path& dir);

  const std::string& text(const std::string& name) const;
  std::vector<std::string> names() const;
  /// Placeholder names used by a template, in order of first use.
  std::vector<std::string> placeholders(const std::string& name) const;

  /// Binds every placeholder. Throws std::invalid_argument when a
  /// placeholder is unbound or a binding is unused. Values have any `<<<<`
  /// broken up so the result carries no residual markers.
  PromptInstance render(const std::string& name, const std::map<std::string, std::string>& values,
                        const std::string& note_id, const std::string& entity) const;

 private:
  std::map<std::string, std::string> templates_;
};

class BackendError : public std::runtime_error {
 public:
  enum class Kind { Timeout, Transport, MissingScriptKey, Http };
  BackendError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

std::string_view to_string(BackendError::Kind kind);

struct RetryPolicy {
  int max_attempts = 3;
  int initial_backoff_ms = 250;
  double backoff_multiplier = 2.0;
};

struct BackendConfig {
  enum class Kind { Remote, Scripted };
  Kind kind = Kind::Scripted;
  std::string endpoint_url;  // e.g. https://api.example.com/v1
  std::string model;
  double temperature = 0.0;
  int max_concurrent_requests = 4;
  int timeout_ms = 60000;
  RetryPolicy retry;
  std::filesystem::path script_path;
  /// Remote only: optional JSONL file the response cache is loaded from and
  /// appended to.
  std::filesystem::path cache_path;
  /// Name of the environment variable holding the API key.
  std::string api_key_env = "EHRCON_API_KEY";

  /// Throws ConfigError.
  void validate() const;
};

class Backend {
 public:
  virtual ~Backend() = default;
  /// Thread-safe. Throws BackendError.
  virtual std::string complete(const PromptInstance& prompt) = 0;
};

/// Answers from a JSON script keyed by (template, note, entity):
///   {"responses": {"<template>": {"<noteId>": {"<entity>": "<answer>"}}},
///    "defaults": {"<template>": "<answer>"}}
/// A missing key falls back to the template default, else throws
/// BackendError(MissingScriptKey).
class ScriptedBackend : public Backend {
 public:
  explicit ScriptedBackend(nlohmann::json script);
  static std::unique_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);
  std::string complete(const PromptInstance& prompt) override;
  bool has(const std::string& template_name, const std::string& note_id, const std::string& entity) const;

 private:
  std::unordered_map<std::string, std::string> responses_;
  std::unordered_map<std::string, std::string> defaults_;
};

/// Builds a scripted-response document incrementally (used by the fixture
/// generator and tests).
class ScriptBuilder {
 public:
  void add(const std::string& template_name, const std::string& note_id, const std::string& entity, std::string answer);
  void set_default(const std::string& template_name, std::string answer);
  const nlohmann::json& json() const { return doc_; }

 private:
  nlohmann::json doc_ = nlohmann::json{{"responses", nlohmann::json::object()}, {"defaults", nlohmann::json::object()}};
};

/// Chat-completion client over HTTP(S). Responses are cached by a hash of
/// the rendered prompt, model and temperature.
class RemoteBackend : public Backend {
 public:
  explicit RemoteBackend(BackendConfig cfg);
  ~RemoteBackend() override;
  std::string complete(const PromptInstance& prompt) override;
  std::size_t cache_hits() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg);

/// Request body sent to `{endpoint}/chat/completions`.
nlohmann::json chat_request_body(const BackendConfig& cfg, const std::string& prompt);
/// Extracts choices[0].message.content. Throws BackendError(Http).
std::string chat_response_text(const std::string& body);

}  // namespace ehrcheck
