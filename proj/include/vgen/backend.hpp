#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "vgen/domain.hpp"
#include "vgen/errors.hpp"
#include "vgen/transcript.hpp"

namespace vgen {

struct ChatMessage {
    std::string role; // system | user | assistant
    std::string content;
};

struct ChatRequest {
    Actor role_tag = Actor::CodeGen;
    std::vector<ChatMessage> messages; // non-empty, first role = system
    double temperature = 0.7;
    int max_tokens = 4096;
    std::optional<int> seed_hint;
};

struct ChatResponse {
    std::string content;
    int prompt_tokens = 0;
    int completion_tokens = 0;
    std::string backend_id;
    int latency_ms = 0;
};

struct RetryPolicy {
    int max_attempts = 3;
    int base_backoff_ms = 100;
    int max_backoff_ms = 2000;
};

enum class BackendKind { Live, Scripted, Replay, Record };

inline BackendKind parse_backend_kind(const std::string& s) {
    if (s == "live") return BackendKind::Live;
    if (s == "scripted") return BackendKind::Scripted;
    if (s == "replay") return BackendKind::Replay;
    if (s == "record") return BackendKind::Record;
    throw ConfigError("unknown backend kind '" + s + "'");
}

struct BackendConfig {
    BackendKind kind = BackendKind::Scripted;
    std::string base_url;              // live
    std::string model_name;           // live
    std::string api_key_env;          // live
    std::string script_path;          // scripted / replay / record
    RetryPolicy retry;
    int rate_limit = 4; // max in-flight live requests

    void validate() const {
        if (kind == BackendKind::Live || kind == BackendKind::Record) {
            if (base_url.empty()) throw ConfigError("live backend requires base_url");
            if (model_name.empty()) throw ConfigError("live backend requires model_name");
        }
        if (kind != BackendKind::Live && script_path.empty())
            throw ConfigError("scripted/replay/record backend requires script_path");
        if (retry.max_attempts < 1) throw ConfigError("retry.max_attempts must be >= 1");
        if (rate_limit < 1) throw ConfigError("rate_limit must be >= 1");
    }
};

// Digest over everything that determines a response: role, messages, sampling.
inline std::string request_digest(const ChatRequest& req) {
    nlohmann::json j;
    j["role_tag"] = to_string(req.role_tag);
    j["temperature"] = req.temperature;
    j["max_tokens"] = req.max_tokens;
    nlohmann::json msgs = nlohmann::json::array();
    for (const ChatMessage& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
    j["messages"] = msgs;
    return hash_hex(fnv1a64(j.dump()));
}

class Backend {
public:
    virtual ~Backend() = default;
    virtual ChatResponse complete(const ChatRequest& req) = 0;
};

// ---------------------------------------------------------------------------
// Scripted backend: per-role FIFO queues, deterministic, no network.
// ---------------------------------------------------------------------------

class ScriptedBackend : public Backend {
public:
    ScriptedBackend() = default;

    // Script file: line-delimited JSON {role_tag, request_digest, content}.
    static std::unique_ptr<ScriptedBackend> from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open backend script '" + path + "'");
        auto be = std::make_unique<ScriptedBackend>();
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(path + ", line " + std::to_string(lineno) + ": " + e.what());
            }
            be->push(parse_actor(j.at("role_tag").get<std::string>()),
                     j.at("content").get<std::string>());
        }
        return be;
    }

    void push(Actor role, std::string content) {
        std::lock_guard lock(mu_);
        queues_[role].push_back(std::move(content));
    }

    ChatResponse complete(const ChatRequest& req) override {
        std::lock_guard lock(mu_);
        auto it = queues_.find(req.role_tag);
        if (it == queues_.end() || it->second.empty())
            throw ScriptExhausted(std::string("no scripted response left for role ") +
                                  to_string(req.role_tag));
        ChatResponse resp;
        resp.content = std::move(it->second.front());
        it->second.pop_front();
        resp.prompt_tokens = 0;
        resp.completion_tokens = static_cast<int>(resp.content.size() / 4);
        resp.backend_id = "scripted";
        return resp;
    }

private:
    std::mutex mu_;
    std::map<Actor, std::deque<std::string>> queues_;
};

// ---------------------------------------------------------------------------
// Replay backend: responses keyed by request digest.
// ---------------------------------------------------------------------------

class ReplayBackend : public Backend {
public:
    static std::unique_ptr<ReplayBackend> from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw ConfigError("cannot open replay script '" + path + "'");
        auto be = std::make_unique<ReplayBackend>();
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            nlohmann::json j;
            try {
                j = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw ParseError(path + ", line " + std::to_string(lineno) + ": " + e.what());
            }
            be->records_[j.at("request_digest").get<std::string>()] =
                j.at("content").get<std::string>();
        }
        return be;
    }

    ChatResponse complete(const ChatRequest& req) override {
        std::string digest = request_digest(req);
        std::lock_guard lock(mu_);
        auto it = records_.find(digest);
        if (it == records_.end())
            throw ReplayMismatch("no recorded response for digest " + digest + " (role " +
                                 to_string(req.role_tag) + ")");
        ChatResponse resp;
        resp.content = it->second;
        resp.backend_id = "replay";
        return resp;
    }

    std::map<std::string, std::string> records_;

private:
    std::mutex mu_;
};

// ---------------------------------------------------------------------------
// Live backend: chat-completion JSON over HTTP(S) with bounded retries and
// an in-flight rate limiter.
// ---------------------------------------------------------------------------

namespace detail {

struct HttpResult {
    bool transport_error = false;
    int status = 0;
    std::string body;
};

inline HttpResult http_post_json(const std::string& base_url, const std::string& path,
                                 const std::string& bearer, const std::string& body,
                                 int timeout_s) {
    httplib::Client client(base_url);
    client.set_connection_timeout(timeout_s, 0);
    client.set_read_timeout(timeout_s, 0);
    httplib::Headers headers;
    if (!bearer.empty()) headers.emplace("Authorization", "Bearer " + bearer);
    auto res = client.Post(path, headers, body, "application/json");
    HttpResult out;
    if (!res) {
        out.transport_error = true;
        return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
}

// Counting semaphore bounding concurrent live requests.
class RateLimiter {
public:
    explicit RateLimiter(int limit) : limit_(limit) {}

    void acquire() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return in_flight_ < limit_; });
        ++in_flight_;
    }

    void release() {
        {
            std::lock_guard lock(mu_);
            --in_flight_;
        }
        cv_.notify_one();
    }

private:
    int limit_;
    int in_flight_ = 0;
    std::mutex mu_;
    std::condition_variable cv_;
};

} // namespace detail

class LiveBackend : public Backend {
public:
    explicit LiveBackend(BackendConfig cfg)
        : cfg_(std::move(cfg)), limiter_(cfg_.rate_limit) {
        if (!cfg_.api_key_env.empty()) {
            const char* key = std::getenv(cfg_.api_key_env.c_str());
            if (!key || !*key)
                throw AuthMissing("environment variable '" + cfg_.api_key_env + "' is not set");
            api_key_ = key;
        }
    }

    ChatResponse complete(const ChatRequest& req) override {
        nlohmann::json body;
        body["model"] = cfg_.model_name;
        body["temperature"] = req.temperature;
        body["max_tokens"] = req.max_tokens;
        if (req.seed_hint) body["seed"] = *req.seed_hint;
        nlohmann::json msgs = nlohmann::json::array();
        for (const ChatMessage& m : req.messages)
            msgs.push_back({{"role", m.role}, {"content", m.content}});
        body["messages"] = msgs;
        const std::string payload = body.dump();

        int backoff = cfg_.retry.base_backoff_ms;
        std::string last_error;
        auto t0 = std::chrono::steady_clock::now();
        for (int attempt = 1; attempt <= cfg_.retry.max_attempts; ++attempt) {
            last_attempts_ = attempt;
            limiter_.acquire();
            detail::HttpResult res;
            try {
                res = detail::http_post_json(cfg_.base_url, "/v1/chat/completions", api_key_,
                                             payload, 120);
            } catch (...) {
                limiter_.release();
                throw;
            }
            limiter_.release();

            if (!res.transport_error && res.status == 200) {
                ChatResponse resp = parse_response(res.body);
                resp.backend_id = "live:" + cfg_.model_name;
                resp.latency_ms = static_cast<int>(
                    std::chrono::duration_cast<std::chrono::milliseconds>(
                        std::chrono::steady_clock::now() - t0)
                        .count());
                return resp;
            }

            bool transient = res.transport_error || res.status == 429 || res.status >= 500;
            last_error = res.transport_error
                             ? "transport error"
                             : "HTTP " + std::to_string(res.status) + ": " + res.body;
            if (!transient)
                throw RetriesExhausted("permanent failure: " + last_error);
            if (attempt < cfg_.retry.max_attempts) {
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
                backoff = std::min(backoff * 2, cfg_.retry.max_backoff_ms);
            }
        }
        throw RetriesExhausted("after " + std::to_string(cfg_.retry.max_attempts) +
                               " attempts: " + last_error);
    }

    int last_attempts() const { return last_attempts_; }

private:
    static ChatResponse parse_response(const std::string& body) {
        nlohmann::json j = nlohmann::json::parse(body);
        ChatResponse resp;
        const auto& choice = j.at("choices").at(0);
        resp.content = choice.at("message").at("content").get<std::string>();
        if (j.contains("usage")) {
            resp.prompt_tokens = j["usage"].value("prompt_tokens", 0);
            resp.completion_tokens = j["usage"].value("completion_tokens", 0);
        }
        if (resp.content.empty()) {
            const std::string reason = choice.value("finish_reason", "");
            if (reason != "length")
                throw RetriesExhausted("backend returned empty content without truncation");
        }
        return resp;
    }

    BackendConfig cfg_;
    std::string api_key_;
    detail::RateLimiter limiter_;
    int last_attempts_ = 0;
};

// Record: live round trips, each appended to the script file for replay.
class RecordBackend : public Backend {
public:
    explicit RecordBackend(BackendConfig cfg) : live_(cfg), path_(cfg.script_path) {}

    ChatResponse complete(const ChatRequest& req) override {
        ChatResponse resp = live_.complete(req);
        nlohmann::json rec = {{"role_tag", to_string(req.role_tag)},
                              {"request_digest", request_digest(req)},
                              {"content", resp.content}};
        std::lock_guard lock(mu_);
        std::ofstream out(path_, std::ios::app);
        if (!out) throw WorkdirIO("cannot append to record script '" + path_ + "'");
        out << rec.dump() << '\n';
        return resp;
    }

private:
    LiveBackend live_;
    std::string path_;
    std::mutex mu_;
};

inline std::unique_ptr<Backend> make_backend(const BackendConfig& cfg) {
    cfg.validate();
    switch (cfg.kind) {
        case BackendKind::Scripted: return ScriptedBackend::from_file(cfg.script_path);
        case BackendKind::Replay: return ReplayBackend::from_file(cfg.script_path);
        case BackendKind::Live: return std::make_unique<LiveBackend>(cfg);
        case BackendKind::Record: return std::make_unique<RecordBackend>(cfg);
    }
    throw ConfigError("unreachable backend kind");
}

} // namespace vgen
