#pragma once

#include <chrono>
#include <thread>

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include "tidygrid/backend.hpp"

namespace tidygrid {

struct HttpBackendConfig {
    std::string base_url;  // e.g. https://api.openai.com/v1
    std::string api_key;
    std::string model;
    std::string model_aux;  // room classification; falls back to model
    double temperature = 0.0;
    int max_retries = 3;
    double backoff_base_s = 0.5;
    int timeout_s = 120;

    static HttpBackendConfig from_env() {
        HttpBackendConfig c;
        if (const char* v = std::getenv("LLM_BASE_URL")) c.base_url = v;
        if (const char* v = std::getenv("LLM_API_KEY")) c.api_key = v;
        if (const char* v = std::getenv("LLM_MODEL")) c.model = v;
        if (const char* v = std::getenv("LLM_MODEL_AUX")) c.model_aux = v;
        return c;
    }
};

// OpenAI-compatible chat-completions client: temperature 0 by default,
// exponential backoff on transport errors, 429 and 5xx.
class HttpBackend : public LlmBackend {
public:
    explicit HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
        if (config_.base_url.empty())
            throw BackendError("http backend needs LLM_BASE_URL");
        if (config_.api_key.empty()) throw BackendError("http backend needs LLM_API_KEY");
        if (config_.model.empty()) throw BackendError("http backend needs LLM_MODEL");
        auto scheme_end = config_.base_url.find("://");
        size_t host_start = scheme_end == std::string::npos ? 0 : scheme_end + 3;
        auto path_start = config_.base_url.find('/', host_start);
        if (path_start == std::string::npos) {
            origin_ = config_.base_url;
        } else {
            origin_ = config_.base_url.substr(0, path_start);
            path_prefix_ = config_.base_url.substr(path_start);
            while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
        }
    }

    std::string complete(const MessageList& messages, Slot slot) override {
        json body{{"model", slot == Slot::Aux && !config_.model_aux.empty() ? config_.model_aux
                                                                            : config_.model},
                  {"temperature", config_.temperature},
                  {"messages", messages_to_json(messages)}};
        std::string payload = body.dump();
        std::string last_error;
        for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
            if (attempt > 0) {
                auto delay = std::chrono::duration<double>(config_.backoff_base_s *
                                                           std::pow(2.0, attempt - 1));
                std::this_thread::sleep_for(
                    std::chrono::duration_cast<std::chrono::milliseconds>(delay));
            }
            httplib::Client client(origin_);
            client.set_read_timeout(config_.timeout_s, 0);
            client.set_connection_timeout(10, 0);
            httplib::Headers headers{{"Authorization", "Bearer " + config_.api_key}};
            auto res = client.Post(path_prefix_ + "/chat/completions", headers, payload,
                                   "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status == 429 || res->status >= 500) {
                last_error = "http status " + std::to_string(res->status);
                continue;
            }
            if (res->status != 200)
                throw BackendError("chat completion failed with status " +
                                   std::to_string(res->status) + ": " + res->body);
            try {
                json reply = json::parse(res->body);
                return reply.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const std::exception& e) {
                throw BackendError(std::string("malformed chat completion response: ") + e.what());
            }
        }
        throw BackendError("chat completion failed after " + std::to_string(config_.max_retries + 1) +
                           " attempts: " + last_error);
    }

    std::string kind() const override { return "http"; }

private:
    HttpBackendConfig config_;
    std::string origin_;
    std::string path_prefix_;
};

}  // namespace tidygrid
