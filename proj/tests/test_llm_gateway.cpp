#include <gtest/gtest.h>

#include <thread>

#include "httplib.h"

#include "ehrcheck/errors.hpp"
#include "ehrcheck/llm_gateway.hpp"

using namespace ehrcheck;
using nlohmann::json;

TEST(PromptLibrary, BundledTemplatesRenderWithoutResidualMarkers) {
  auto lib = PromptLibrary::bundled();
  auto names = lib.names();
  for (const char* n : {"segmentation", "ner", "time_filter", "table_identification", "pseudo_table", "self_correction",
                        "reformat"})
    EXPECT_NE(std::find(names.begin(), names.end(), n), names.end()) << n;
  for (const auto& name : names) {
    std::map<std::string, std::string> values;
    for (const auto& p : lib.placeholders(name)) values[p] = "x <<<<INJECT>>>> y";
    auto inst = lib.render(name, values, "n1", "e");
    EXPECT_EQ(inst.rendered_text.find("<<<<"), std::string::npos) << name;
    EXPECT_EQ(inst.template_name, name);
  }
}

TEST(PromptLibrary, RenderRejectsUnboundAndUnusedPlaceholders) {
  auto lib = PromptLibrary::bundled();
  EXPECT_THROW(lib.render("ner", {}, "n", "e"), std::invalid_argument);
  EXPECT_THROW(lib.render("ner", {{"CLINICAL_NOTE", "a"}, {"EXTRA", "b"}}, "n", "e"), std::invalid_argument);
  EXPECT_THROW(lib.text("nope"), std::invalid_argument);
  auto inst = lib.render("ner", {{"CLINICAL_NOTE", "1 HR 88"}}, "n", "e");
  EXPECT_NE(inst.rendered_text.find("1 HR 88"), std::string::npos);
}

TEST(ScriptedBackend, LooksUpAnswersAndDefaults) {
  ScriptBuilder b;
  b.add("ner", "F1", "1-12", "Answer: t - category 1 (numeric value: 99.6)");
  b.set_default("time_filter", "[Answer 1] Yes\n[Answer 3] 1");
  ScriptedBackend backend(b.json());
  PromptInstance p{"ner", {}, "prompt", "F1", "1-12"};
  EXPECT_EQ(backend.complete(p), "Answer: t - category 1 (numeric value: 99.6)");
  EXPECT_EQ(backend.complete(p), backend.complete(p));
  PromptInstance t{"time_filter", {}, "prompt", "F1", "HR@3"};
  EXPECT_EQ(backend.complete(t), "[Answer 1] Yes\n[Answer 3] 1");
  PromptInstance missing{"ner", {}, "prompt", "F2", "1-12"};
  try {
    backend.complete(missing);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::MissingScriptKey);
  }
}

TEST(ScriptedBackend, RejectsMalformedScripts) {
  EXPECT_THROW(ScriptedBackend(json::array()), ParseError);
  EXPECT_THROW(ScriptedBackend(json{{"responses", {{"ner", {{"n", {{"e", 3}}}}}}}}), ParseError);
}

TEST(BackendConfig, Validation) {
  BackendConfig c;
  EXPECT_THROW(c.validate(), ConfigError);
  c.script_path = "s.json";
  EXPECT_NO_THROW(c.validate());
  c.kind = BackendConfig::Kind::Remote;
  EXPECT_THROW(c.validate(), ConfigError);
  c.endpoint_url = "ftp://x";
  c.model = "m";
  EXPECT_THROW(c.validate(), ConfigError);
  c.endpoint_url = "http://localhost:1/v1";
  EXPECT_NO_THROW(c.validate());
  c.max_concurrent_requests = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(RemoteBackend, UnreachableEndpointFailsWithTransportErrorAfterRetries) {
  BackendConfig c;
  c.kind = BackendConfig::Kind::Remote;
  c.endpoint_url = "http://127.0.0.1:9/v1";
  c.model = "m";
  c.timeout_ms = 500;
  c.retry = RetryPolicy{3, 1, 1.0};
  RemoteBackend backend(c);
  PromptInstance p{"ner", {}, "hello", "n", "e"};
  try {
    backend.complete(p);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_TRUE(e.kind() == BackendError::Kind::Transport || e.kind() == BackendError::Kind::Timeout);
  }
}

TEST(RemoteBackend, ChatCompletionRoundTripAndCache) {
  httplib::Server server;
  std::atomic<int> calls{0};
  std::string seen_auth;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    ++calls;
    seen_auth = req.get_header_value("Authorization");
    auto body = json::parse(req.body);
    auto content = body["messages"][0]["content"].get<std::string>();
    json reply{{"choices", json::array({json{{"message", {{"role", "assistant"}, {"content", "echo:" + content}}}}})}};
    res.set_content(reply.dump(), "application/json");
  });
  server.Post("/bad/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 400;
  });
  int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  setenv("EHRCHECK_TEST_KEY", "secret", 1);
  BackendConfig c;
  c.kind = BackendConfig::Kind::Remote;
  c.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/v1/";
  c.model = "m";
  c.timeout_ms = 5000;
  c.api_key_env = "EHRCHECK_TEST_KEY";
  RemoteBackend backend(c);
  PromptInstance p{"ner", {}, "hello", "n", "e"};
  EXPECT_EQ(backend.complete(p), "echo:hello");
  EXPECT_EQ(backend.complete(p), "echo:hello");
  EXPECT_EQ(calls.load(), 1);
  EXPECT_EQ(backend.cache_hits(), 1u);
  EXPECT_EQ(seen_auth, "Bearer secret");

  c.endpoint_url = "http://127.0.0.1:" + std::to_string(port) + "/bad";
  c.retry = RetryPolicy{3, 1, 1.0};
  RemoteBackend bad(c);
  try {
    bad.complete(p);
    FAIL();
  } catch (const BackendError& e) {
    EXPECT_EQ(e.kind(), BackendError::Kind::Http);
  }
  EXPECT_EQ(calls.load(), 2);  // 4xx is not retried

  server.stop();
  th.join();
}

TEST(ChatWire, RequestBodyAndResponseParsing) {
  BackendConfig c;
  c.model = "gpt";
  c.temperature = 0.0;
  auto body = chat_request_body(c, "hi");
  EXPECT_EQ(body["model"], "gpt");
  EXPECT_EQ(body["messages"][0]["role"], "user");
  EXPECT_EQ(body["messages"][0]["content"], "hi");
  EXPECT_THROW(chat_response_text("{}"), BackendError);
  EXPECT_EQ(chat_response_text(R"({"choices":[{"message":{"content":"ok"}}]})"), "ok");
}
