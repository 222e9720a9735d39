#include "ehrcheck/llm_gateway.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include "ehrcheck/assets.hpp"
#include "ehrcheck/errors.hpp"
#include "ehrcheck/text_util.hpp"

namespace ehrcheck {

using nlohmann::json;

namespace {

const std::regex& placeholder_re() {
  static const std::regex re("<<<<([A-Z0-9_]+)>>>>");
  return re;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string script_key(const std::string& t, const std::string& n, const std::string& e) { return t + '\x1f' + n + '\x1f' + e; }

}  // namespace

PromptLibrary PromptLibrary::bundled() {
  PromptLibrary lib;
  for (const auto& name : embedded_asset_names()) {
    if (name.rfind("prompts/", 0) != 0) continue;
    auto stem = std::filesystem::path(name).stem().string();
    lib.templates_[stem] = std::string(*embedded_asset(name));
  }
  return lib;
}

PromptLibrary PromptLibrary::with_overrides(const std::filesystem::path& dir) {
  auto lib = bundled();
  if (!std::filesystem::is_directory(dir)) throw ConfigError("prompt directory not found: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.path().extension() != ".txt") continue;
    lib.templates_[entry.path().stem().string()] = read_file(entry.path());
  }
  return lib;
}

const std::string& PromptLibrary::text(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw std::invalid_argument("unknown prompt template '" + name + "'");
  return it->second;
}

std::vector<std::string> PromptLibrary::names() const {
  std::vector<std::string> out;
  for (const auto& [k, v] : templates_) out.push_back(k);
  return out;
}

std::vector<std::string> PromptLibrary::placeholders(const std::string& name) const {
  const auto& t = text(name);
  std::vector<std::string> out;
  for (std::sregex_iterator it(t.begin(), t.end(), placeholder_re()), end; it != end; ++it) {
    auto p = (*it)[1].str();
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  return out;
}

PromptInstance PromptLibrary::render(const std::string& name, const std::map<std::string, std::string>& values,
                                     const std::string& note_id, const std::string& entity) const {
  const auto& t = text(name);
  auto needed = placeholders(name);
  for (const auto& p : needed)
    if (!values.count(p)) throw std::invalid_argument("prompt '" + name + "': placeholder " + p + " is unbound");
  for (const auto& [k, v] : values)
    if (std::find(needed.begin(), needed.end(), k) == needed.end())
      throw std::invalid_argument("prompt '" + name + "' has no placeholder " + k);
  PromptInstance p;
  p.template_name = name;
  p.note_id = note_id;
  p.entity = entity;
  for (const auto& [k, v] : values) p.placeholders[k] = replace_all(v, "<<<<", "<<< <");
  std::string out;
  std::size_t last = 0;
  for (std::sregex_iterator it(t.begin(), t.end(), placeholder_re()), end; it != end; ++it) {
    out.append(t, last, static_cast<std::size_t>(it->position()) - last);
    out += p.placeholders.at((*it)[1].str());
    last = static_cast<std::size_t>(it->position() + it->length());
  }
  out.append(t, last, std::string::npos);
  p.rendered_text = std::move(out);
  return p;
}

std::string_view to_string(BackendError::Kind kind) {
  switch (kind) {
    case BackendError::Kind::Timeout: return "timeout";
    case BackendError::Kind::Transport: return "transport";
    case BackendError::Kind::MissingScriptKey: return "missing-script-key";
    case BackendError::Kind::Http: return "http";
  }
  return "?";
}

void BackendConfig::validate() const {
  if (kind == Kind::Scripted) {
    if (script_path.empty()) throw ConfigError("scripted backend needs a script path");
    return;
  }
  if (endpoint_url.empty()) throw ConfigError("remote backend needs an endpoint URL");
  if (endpoint_url.rfind("http://", 0) != 0 && endpoint_url.rfind("https://", 0) != 0)
    throw ConfigError("endpoint URL must start with http:// or https://");
  if (model.empty()) throw ConfigError("remote backend needs a model name");
  if (max_concurrent_requests < 1) throw ConfigError("max concurrent requests must be >= 1");
  if (timeout_ms < 1) throw ConfigError("timeout must be positive");
  if (retry.max_attempts < 1) throw ConfigError("retry attempts must be >= 1");
  if (temperature < 0.0 || temperature > 2.0) throw ConfigError("temperature must lie in [0, 2]");
}

ScriptedBackend::ScriptedBackend(json script) {
  if (!script.is_object()) throw ParseError("script must be a JSON object");
  if (script.contains("responses")) {
    for (const auto& [tmpl, notes] : script["responses"].items()) {
      if (!notes.is_object()) throw ParseError("script responses for '" + tmpl + "' must be an object");
      for (const auto& [note, entities] : notes.items()) {
        if (!entities.is_object()) throw ParseError("script responses for '" + tmpl + "/" + note + "' must be an object");
        for (const auto& [entity, answer] : entities.items()) {
          if (!answer.is_string()) throw ParseError("script answer for '" + tmpl + "/" + note + "/" + entity + "' is not a string");
          responses_[script_key(tmpl, note, entity)] = answer.get<std::string>();
        }
      }
    }
  }
  if (script.contains("defaults"))
    for (const auto& [tmpl, answer] : script["defaults"].items()) {
      if (!answer.is_string()) throw ParseError("script default for '" + tmpl + "' is not a string");
      defaults_[tmpl] = answer.get<std::string>();
    }
}

std::unique_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  return std::make_unique<ScriptedBackend>(std::move(j));
}

bool ScriptedBackend::has(const std::string& t, const std::string& n, const std::string& e) const {
  return responses_.count(script_key(t, n, e)) > 0;
}

std::string ScriptedBackend::complete(const PromptInstance& prompt) {
  auto it = responses_.find(script_key(prompt.template_name, prompt.note_id, prompt.entity));
  if (it != responses_.end()) return it->second;
  auto d = defaults_.find(prompt.template_name);
  if (d != defaults_.end()) return d->second;
  throw BackendError(BackendError::Kind::MissingScriptKey,
                     "no scripted answer for " + prompt.template_name + " / " + prompt.note_id + " / " + prompt.entity);
}

void ScriptBuilder::add(const std::string& t, const std::string& n, const std::string& e, std::string answer) {
  doc_["responses"][t][n][e] = std::move(answer);
}

void ScriptBuilder::set_default(const std::string& t, std::string answer) { doc_["defaults"][t] = std::move(answer); }

json chat_request_body(const BackendConfig& cfg, const std::string& prompt) {
  return json{{"model", cfg.model},
              {"temperature", cfg.temperature},
              {"messages", json::array({json{{"role", "user"}, {"content", prompt}}})}};
}

std::string chat_response_text(const std::string& body) {
  try {
    auto j = json::parse(body);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const json::exception& e) {
    throw BackendError(BackendError::Kind::Http, std::string("unexpected chat-completion reply: ") + e.what());
  }
}

std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
  cfg.validate();
  if (cfg.kind == BackendConfig::Kind::Scripted) return ScriptedBackend::from_file(cfg.script_path);
  return std::make_unique<RemoteBackend>(cfg);
}

}  // namespace ehrcheck
