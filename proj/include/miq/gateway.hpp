#pragma once

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "miq/corpus.hpp"
#include "miq/errors.hpp"
#include "miq/hash.hpp"
#include "miq/promptgen.hpp"

namespace miq {

struct GenerationParams {
    double temperature = 0.0;
    int max_tokens = 512;
};

struct ChatMessage {
    Speaker role = Speaker::Client;
    std::string text;
};

struct ChatRequest {
    std::string system_prompt;
    std::vector<ChatMessage> history;  // consecutive same-role turns merged
    GenerationParams params;
};

// Canonical serialization: sorted keys, no insignificant whitespace, so the
// hash survives field reordering in any producer.
inline std::string canonical_request_json(const ChatRequest& req) {
    nlohmann::json history = nlohmann::json::array();
    for (const auto& m : req.history) {
        history.push_back({{"role", m.role == Speaker::Client ? "client" : "therapist"},
                           {"text", m.text}});
    }
    const nlohmann::json doc = {{"history", history},
                                {"params",
                                 {{"max_tokens", req.params.max_tokens},
                                  {"temperature", req.params.temperature}}},
                                {"system_prompt", req.system_prompt}};
    return doc.dump();
}

inline std::string request_hash(const ChatRequest& req) {
    return content_hash(canonical_request_json(req));
}

// Chat-completion transport contract. Implementations must be safe for
// concurrent independent calls.
class Transport {
public:
    virtual ~Transport() = default;
    virtual std::string generate(const ChatRequest& req) = 0;
    virtual std::string kind() const = 0;
};

// Deterministic offline transport: answers from a recorded hash -> response
// table and never opens a socket.
class ReplayTransport final : public Transport {
public:
    explicit ReplayTransport(std::map<std::string, std::string> responses)
        : responses_(std::move(responses)) {}

    // JSONL of {"hash": str, "response": str}
    static ReplayTransport from_file(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw IoError("cannot open replay file '" + path + "'");
        std::map<std::string, std::string> responses;
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            nlohmann::json doc;
            try {
                doc = nlohmann::json::parse(line);
            } catch (const nlohmann::json::exception& e) {
                throw SchemaError(line_no, "<replay>", e.what());
            }
            if (!doc.contains("hash") || !doc.contains("response")) {
                throw SchemaError(line_no, "hash", "replay entries need 'hash' and 'response'");
            }
            responses[doc["hash"].get<std::string>()] = doc["response"].get<std::string>();
        }
        return ReplayTransport(std::move(responses));
    }

    std::string generate(const ChatRequest& req) override {
        const std::string hash = request_hash(req);
        const auto it = responses_.find(hash);
        if (it == responses_.end()) throw MissingReplay(hash);
        return it->second;
    }

    std::string kind() const override { return "file_replay"; }

private:
    std::map<std::string, std::string> responses_;
};

inline void append_replay_entry(const std::string& path, const std::string& hash,
                                const std::string& response) {
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw IoError("cannot write replay file '" + path + "'");
    out << nlohmann::json{{"hash", hash}, {"response", response}}.dump() << "\n";
}

struct HttpConfig {
    std::string host = "https://api.openai.com";
    std::string path = "/v1/chat/completions";
    std::string model = "gpt-4";
    std::string api_key_env = "MIQ_API_KEY";  // key read from the environment, never stored
    int max_retries = 3;
    int backoff_ms = 250;  // doubled per retry
    int timeout_s = 60;
};

// Generic chat-completion JSON transport. Client turns map to the "user"
// role and therapist turns to "assistant"; the reply text is read from the
// first choice. Transient failures (429, 5xx, connection errors) retry up
// to max_retries with exponential backoff.
class HttpTransport final : public Transport {
public:
    explicit HttpTransport(HttpConfig config) : config_(std::move(config)) {}

    std::string generate(const ChatRequest& req) override {
        nlohmann::json messages = nlohmann::json::array();
        messages.push_back({{"role", "system"}, {"content", req.system_prompt}});
        for (const auto& m : req.history) {
            messages.push_back({{"role", m.role == Speaker::Client ? "user" : "assistant"},
                                {"content", m.text}});
        }
        const nlohmann::json body = {{"model", config_.model},
                                     {"messages", messages},
                                     {"temperature", req.params.temperature},
                                     {"max_tokens", req.params.max_tokens}};

        httplib::Client client(config_.host);
        client.set_read_timeout(config_.timeout_s, 0);
        client.set_connection_timeout(config_.timeout_s, 0);
        httplib::Headers headers;
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key) {
            headers.emplace("Authorization", std::string("Bearer ") + key);
        }

        last_retries_ = 0;
        int backoff = config_.backoff_ms;
        int last_status = 0;
        std::string last_body;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
                backoff *= 2;
                ++last_retries_;
            }
            auto res = client.Post(config_.path, headers, body.dump(), "application/json");
            if (!res) {
                last_status = 0;
                last_body = httplib::to_string(res.error());
                continue;  // connection-level failure: retry
            }
            last_status = res->status;
            last_body = res->body;
            if (res->status == 200) {
                try {
                    const auto doc = nlohmann::json::parse(res->body);
                    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
                } catch (const nlohmann::json::exception& e) {
                    throw TransportError(res->status, std::string("malformed response: ") + e.what());
                }
            }
            if (res->status != 429 && res->status < 500) {
                throw TransportError(res->status, res->body);
            }
        }
        if (last_status == 429) throw RateLimited();
        throw TransportError(last_status, last_body);
    }

    std::string kind() const override { return "http_json"; }

    int last_retries() const { return last_retries_; }

private:
    HttpConfig config_;
    int last_retries_ = 0;
};

inline std::string generate_turn(const ChatRequest& req, Transport& transport) {
    return transport.generate(req);
}

namespace detail {

// History for the wire: consecutive same-role utterances merge so roles
// alternate.
inline std::vector<ChatMessage> merged_history(const std::vector<Utterance>& utterances,
                                               std::size_t end) {
    std::vector<ChatMessage> history;
    for (std::size_t i = 0; i < end; ++i) {
        const Speaker role = utterances[i].speaker;
        if (!history.empty() && history.back().role == role) {
            history.back().text += "\n" + utterances[i].text;
        } else {
            history.push_back({role, utterances[i].text});
        }
    }
    return history;
}

}  // namespace detail

struct RegenerationFailure {
    std::string id;
    std::size_t turn_index = 0;
    std::string error;
};

struct RegenerationResult {
    Corpus corpus;  // responder switched to model_prompted, ids preserved
    std::vector<RegenerationFailure> failures;
};

// Replaces every therapist turn of each human transcript with a generated
// turn conditioned on the composed prompt plus the prior context. Client
// turns are kept verbatim (teacher forcing); earlier generated therapist
// turns feed later context. A transcript that fails mid-way lands in the
// failure manifest and is excluded from the output corpus.
inline RegenerationResult regenerate_corpus(const Corpus& corpus, const PromptTemplate& prompt,
                                            Transport& transport,
                                            const GenerationParams& params = {}) {
    bool any_human = false;
    RegenerationResult result;
    for (const auto& source : corpus.transcripts()) {
        if (source.responder != Responder::Human) continue;
        any_human = true;
        Transcript generated = source;
        generated.responder = Responder::ModelPrompted;
        generated.upq = UpqLabel::Unlabeled;  // new responses are unscored
        bool failed = false;
        for (std::size_t i = 0; i < generated.utterances.size() && !failed; ++i) {
            if (generated.utterances[i].speaker != Speaker::Therapist) continue;
            ChatRequest req;
            req.system_prompt = prompt.composed;
            req.history = detail::merged_history(generated.utterances, i);
            req.params = params;
            try {
                generated.utterances[i].text = transport.generate(req);
                generated.utterances[i].strategies.clear();  // generated turns are unannotated
            } catch (const Error& e) {
                result.failures.push_back({source.id, i, e.what()});
                failed = true;
            }
        }
        if (!failed) result.corpus.add(std::move(generated));
    }
    if (!any_human) throw Error("corpus has no human-responder transcripts to regenerate");
    return result;
}

}  // namespace miq
