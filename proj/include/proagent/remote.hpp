#pragma once

#include "proagent/embedder.hpp"
#include "proagent/reasoner.hpp"

#include <httplib.h>

namespace proagent {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline Endpoint split_url(const std::string& url, const std::string& default_path) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ConfigError("endpoint URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, default_path};
  return {url.substr(0, slash), url.substr(slash)};
}

namespace detail {
inline json post_json(const Endpoint& ep, const json& body, double timeout_s) {
  httplib::Client cli(ep.origin);
  const auto sec = static_cast<time_t>(timeout_s);
  const auto usec = static_cast<time_t>((timeout_s - static_cast<double>(sec)) * 1e6);
  cli.set_connection_timeout(sec, usec);
  cli.set_read_timeout(sec, usec);
  cli.set_write_timeout(sec, usec);
  auto res = cli.Post(ep.path, body.dump(), "application/json");
  if (!res) throw BackendUnavailable("request to " + ep.origin + ep.path + " failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw BackendUnavailable("endpoint returned HTTP " + std::to_string(res->status));
  json j = json::parse(res->body, nullptr, false);
  if (j.is_discarded()) throw BackendUnavailable("endpoint returned non-JSON body");
  return j;
}
}  // namespace detail

// Chat-style JSON over HTTP: one user message carrying the prompt text and,
// when present, the image reference. Accepts {"choices":[{"message":
// {"content":...}}]} or {"content":...} responses.
class RemoteBackend final : public ReasonerBackend {
 public:
  RemoteBackend(const std::string& url, std::string model, double timeout_s)
      : ep_(split_url(url, "/v1/chat/completions")), model_(std::move(model)), timeout_s_(timeout_s) {}

  json request_body(const PromptBundle& prompt) const {
    json msg{{"role", "user"}, {"content", prompt.text()}};
    if (prompt.image_ref) msg["image"] = *prompt.image_ref;
    return json{{"model", model_}, {"messages", json::array({msg})}};
  }

  std::string invoke(const PromptBundle& prompt) override {
    const json j = detail::post_json(ep_, request_body(prompt), timeout_s_);
    if (auto c = j.find("choices"); c != j.end() && c->is_array() && !c->empty()) {
      const json& first = (*c)[0];
      if (first.contains("message") && first["message"].contains("content") && first["message"]["content"].is_string())
        return first["message"]["content"].get<std::string>();
    }
    if (auto c = j.find("content"); c != j.end() && c->is_string()) return c->get<std::string>();
    throw BackendUnavailable("endpoint response has no message content");
  }

 private:
  Endpoint ep_;
  std::string model_;
  double timeout_s_;
};

// Embedding endpoint: {"input": text} -> {"embedding":[...]} or
// {"data":[{"embedding":[...]}]}. Calls are serialized.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(const std::string& url, std::string model, double timeout_s)
      : ep_(split_url(url, "/v1/embeddings")), model_(std::move(model)), timeout_s_(timeout_s) {}

  Embedding embed(std::string_view text) const override {
    if (trim(text).empty()) return Embedding(DenseVector{});
    std::lock_guard lock(mu_);
    const json j = detail::post_json(ep_, json{{"model", model_}, {"input", std::string(text)}}, timeout_s_);
    const json* vec = nullptr;
    if (auto e = j.find("embedding"); e != j.end()) vec = &*e;
    else if (auto d = j.find("data"); d != j.end() && d->is_array() && !d->empty() && (*d)[0].contains("embedding"))
      vec = &(*d)[0]["embedding"];
    if (!vec || !vec->is_array()) throw BackendUnavailable("embedding response has no vector");
    DenseVector v;
    for (const auto& x : *vec) {
      if (!x.is_number()) throw BackendUnavailable("embedding vector holds a non-number");
      v.push_back(x.get<double>());
    }
    if (dim_ == 0) dim_ = v.size();
    if (v.size() != dim_) throw BackendUnavailable("embedding dimension changed");
    return Embedding(std::move(v)).normalized();
  }

 private:
  Endpoint ep_;
  std::string model_;
  double timeout_s_;
  mutable std::mutex mu_;
  mutable std::size_t dim_ = 0;
};

}  // namespace proagent
