#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <thread>

#include "test_util.hpp"
#include "vgen/backend.hpp"

using namespace vgen;

namespace {

ChatRequest make_request(Actor role, const std::string& user = "hello") {
    ChatRequest req;
    req.role_tag = role;
    req.messages = {{"system", "sys"}, {"user", user}};
    return req;
}

} // namespace

TEST_CASE("scripted backend pops per-role FIFO") {
    ScriptedBackend be;
    be.push(Actor::Researcher, "r1");
    be.push(Actor::Researcher, "r2");
    be.push(Actor::CodeGen, "c1");
    CHECK(be.complete(make_request(Actor::Researcher)).content == "r1");
    CHECK(be.complete(make_request(Actor::CodeGen)).content == "c1");
    CHECK(be.complete(make_request(Actor::Researcher)).content == "r2");
}

TEST_CASE("scripted backend exhausts per role") {
    ScriptedBackend be;
    be.push(Actor::Researcher, "r1");
    CHECK_THROWS_AS(be.complete(make_request(Actor::Prosecutor)), ScriptExhausted);
    CHECK_NOTHROW(be.complete(make_request(Actor::Researcher)));
    CHECK_THROWS_AS(be.complete(make_request(Actor::Researcher)), ScriptExhausted);
}

TEST_CASE("script file round trip") {
    testutil::TempDir dir("backend");
    auto path = dir.path() / "script.jsonl";
    testutil::write_file(path,
                         R"({"role_tag":"code_gen","request_digest":"x","content":"resp1"})"
                         "\n"
                         R"({"role_tag":"code_gen","request_digest":"y","content":"resp2"})"
                         "\n");
    auto be = ScriptedBackend::from_file(path.string());
    CHECK(be->complete(make_request(Actor::CodeGen)).content == "resp1");
    CHECK(be->complete(make_request(Actor::CodeGen)).content == "resp2");
}

TEST_CASE("replay backend matches by request digest") {
    ChatRequest req = make_request(Actor::Researcher, "the exact prompt");
    testutil::TempDir dir("replay");
    auto path = dir.path() / "rec.jsonl";
    nlohmann::json rec = {{"role_tag", "researcher"},
                          {"request_digest", request_digest(req)},
                          {"content", "recorded answer"}};
    testutil::write_file(path, rec.dump() + "\n");
    auto be = ReplayBackend::from_file(path.string());
    CHECK(be->complete(req).content == "recorded answer");
    ChatRequest other = make_request(Actor::Researcher, "a different prompt");
    CHECK_THROWS_AS(be->complete(other), ReplayMismatch);
}

TEST_CASE("request digest is stable and content-sensitive") {
    ChatRequest a = make_request(Actor::Researcher, "p");
    CHECK(request_digest(a) == request_digest(a));
    ChatRequest b = make_request(Actor::Researcher, "q");
    CHECK(request_digest(a) != request_digest(b));
    ChatRequest c = make_request(Actor::Prosecutor, "p");
    CHECK(request_digest(a) != request_digest(c));
}

TEST_CASE("backend config validation") {
    BackendConfig cfg;
    cfg.kind = BackendKind::Scripted;
    CHECK_THROWS_AS(cfg.validate(), ConfigError); // no script path
    cfg.script_path = "x.jsonl";
    CHECK_NOTHROW(cfg.validate());
    cfg.kind = BackendKind::Live;
    CHECK_THROWS_AS(cfg.validate(), ConfigError); // no base_url / model
    cfg.base_url = "http://localhost:1";
    cfg.model_name = "m";
    CHECK_NOTHROW(cfg.validate());
    cfg.retry.max_attempts = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("live backend retries transient failures then succeeds") {
    std::atomic<int> hits{0};
    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        if (hits.fetch_add(1) == 0) {
            res.status = 503;
            res.set_content("busy", "text/plain");
            return;
        }
        nlohmann::json body = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "ok"}}}}}},
            {"usage", {{"prompt_tokens", 5}, {"completion_tokens", 1}}}};
        res.set_content(body.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("VGEN_TEST_KEY", "sekrit", 1);
    BackendConfig cfg;
    cfg.kind = BackendKind::Live;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    cfg.model_name = "test-model";
    cfg.api_key_env = "VGEN_TEST_KEY";
    cfg.retry.max_attempts = 3;
    cfg.retry.base_backoff_ms = 10;
    LiveBackend be(cfg);

    ChatResponse resp = be.complete(make_request(Actor::CodeGen));
    CHECK(resp.content == "ok");
    CHECK(resp.prompt_tokens == 5);
    CHECK(be.last_attempts() == 2);
    CHECK(hits.load() == 2);

    server.stop();
    th.join();
}

TEST_CASE("live backend treats non-429 4xx as permanent") {
    std::atomic<int> hits{0};
    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        hits.fetch_add(1);
        res.status = 400;
        res.set_content("bad request", "text/plain");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("VGEN_TEST_KEY", "sekrit", 1);
    BackendConfig cfg;
    cfg.kind = BackendKind::Live;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    cfg.model_name = "test-model";
    cfg.api_key_env = "VGEN_TEST_KEY";
    cfg.retry.max_attempts = 5;
    cfg.retry.base_backoff_ms = 10;
    LiveBackend be(cfg);
    CHECK_THROWS_AS(be.complete(make_request(Actor::CodeGen)), RetriesExhausted);
    CHECK(hits.load() == 1); // no retry on a permanent failure

    server.stop();
    th.join();
}

TEST_CASE("live backend bounds in-flight requests") {
    std::atomic<int> in_flight{0};
    std::atomic<int> max_in_flight{0};
    httplib::Server server;
    server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        int now = in_flight.fetch_add(1) + 1;
        int seen = max_in_flight.load();
        while (now > seen && !max_in_flight.compare_exchange_weak(seen, now)) {}
        std::this_thread::sleep_for(std::chrono::milliseconds(30));
        in_flight.fetch_sub(1);
        nlohmann::json body = {
            {"choices", {{{"message", {{"role", "assistant"}, {"content", "ok"}}}}}}};
        res.set_content(body.dump(), "application/json");
    });
    int port = server.bind_to_any_port("127.0.0.1");
    std::thread th([&] { server.listen_after_bind(); });
    server.wait_until_ready();

    setenv("VGEN_TEST_KEY", "sekrit", 1);
    BackendConfig cfg;
    cfg.kind = BackendKind::Live;
    cfg.base_url = "http://127.0.0.1:" + std::to_string(port);
    cfg.model_name = "test-model";
    cfg.api_key_env = "VGEN_TEST_KEY";
    cfg.rate_limit = 2;
    LiveBackend be(cfg);

    std::vector<std::thread> callers;
    for (int i = 0; i < 6; ++i)
        callers.emplace_back([&] { be.complete(make_request(Actor::CodeGen)); });
    for (auto& c : callers) c.join();
    CHECK(max_in_flight.load() <= 2);

    server.stop();
    th.join();
}

TEST_CASE("auth env var is required for live backends") {
    unsetenv("VGEN_MISSING_KEY");
    BackendConfig cfg;
    cfg.kind = BackendKind::Live;
    cfg.base_url = "http://127.0.0.1:1";
    cfg.model_name = "m";
    cfg.api_key_env = "VGEN_MISSING_KEY";
    CHECK_THROWS_AS(LiveBackend{cfg}, AuthMissing);
}
