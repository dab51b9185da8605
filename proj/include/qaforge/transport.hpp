// Copyright 2026 The qaforge Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "qaforge/corpus_model.hpp"
#include "qaforge/error.hpp"
#include "qaforge/evalharness.hpp"
#include "qaforge/filter.hpp"
#include "qaforge/genio.hpp"
#include "qaforge/metrics.hpp"
#include "qaforge/sampling.hpp"
#include "qaforge/textproc.hpp"

namespace qaforge {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string prefix;  // path prefix without trailing '/'

  static Endpoint parse(std::string_view url) {
    const auto scheme = url.find("://");
    if (scheme == std::string_view::npos || url.substr(0, scheme) != "http")
      throw ValidationError("endpoint '" + std::string(url) + "' must start with http://");
    const auto slash = url.find('/', scheme + 3);
    Endpoint e;
    e.origin = std::string(url.substr(0, slash));
    if (slash != std::string_view::npos) e.prefix = std::string(url.substr(slash));
    while (!e.prefix.empty() && e.prefix.back() == '/') e.prefix.pop_back();
    if (e.origin.size() <= scheme + 3) throw ValidationError("endpoint has no host");
    return e;
  }
};

struct TransportOptions {
  double timeout_seconds = 120.0;
  int retries = 2;  // extra attempts after an unavailable failure
  double backoff_seconds = 0.5;
};

/// JSON-over-HTTP call shared by every provider client. Connection
/// failures and 5xx are unavailable; 503 {"error":"role_unavailable"} is
/// role-unavailable; other statuses and malformed bodies are bad responses.
class HttpChannel {
 public:
  HttpChannel(std::string role, const std::string& url, TransportOptions options = {})
      : role_(std::move(role)), endpoint_(Endpoint::parse(url)), options_(options) {}

  const std::string& role() const { return role_; }

  json post(const std::string& path, const json& body) const {
    return call(path, &body);
  }

  json get(const std::string& path) const { return call(path, nullptr); }

 private:
  json call(const std::string& path, const json* body) const {
    for (int attempt = 0;; ++attempt) {
      try {
        return call_once(path, body);
      } catch (const ProviderError& e) {
        if (e.kind() != ProviderError::Kind::kUnavailable || attempt >= options_.retries) throw;
        spdlog::warn("{} {}: {}; retrying", role_, path, e.what());
        std::this_thread::sleep_for(std::chrono::duration<double>(
            options_.backoff_seconds * static_cast<double>(1 << attempt)));
      }
    }
  }

  json call_once(const std::string& path, const json* body) const {
    httplib::Client client(endpoint_.origin);
    const auto secs = static_cast<time_t>(options_.timeout_seconds);
    const auto usecs = static_cast<time_t>((options_.timeout_seconds - static_cast<double>(secs)) * 1e6);
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    const std::string target = endpoint_.prefix + path;
    httplib::Result res = body ? client.Post(target, body->dump(-1, ' ', false,
                                                                json::error_handler_t::replace),
                                             "application/json")
                               : client.Get(target);
    if (!res)
      throw ProviderError(ProviderError::Kind::kUnavailable, role_,
                          role_ + " endpoint unreachable: " + httplib::to_string(res.error()));
    json parsed;
    bool parsed_ok = true;
    try {
      parsed = json::parse(res->body);
    } catch (const json::parse_error&) {
      parsed_ok = false;
    }
    if (res->status == 503 && parsed_ok && parsed.is_object() &&
        parsed.value("error", "") == "role_unavailable")
      throw ProviderError(ProviderError::Kind::kRoleUnavailable, role_,
                          role_ + " role not loaded by the provider");
    if (res->status >= 500)
      throw ProviderError(ProviderError::Kind::kUnavailable, role_,
                          role_ + " provider returned HTTP " + std::to_string(res->status));
    if (res->status != 200)
      throw ProviderError(ProviderError::Kind::kBadResponse, role_,
                          role_ + " provider returned HTTP " + std::to_string(res->status));
    if (!parsed_ok)
      throw ProviderError(ProviderError::Kind::kBadResponse, role_,
                          role_ + " provider returned malformed JSON");
    return parsed;
  }

  std::string role_;
  Endpoint endpoint_;
  TransportOptions options_;
};

namespace detail {

template <typename F>
auto decode_response(const std::string& role, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ProviderError(ProviderError::Kind::kBadResponse, role,
                        role + " response does not match the protocol: " + e.what());
  }
}

}  // namespace detail

class HttpGenerator final : public Generator {
 public:
  explicit HttpGenerator(const std::string& url, TransportOptions options = {})
      : channel_("generator", url, options) {}
  std::string name() const override { return "http-generator"; }
  std::string generate(const std::string& prompt, const PromptStyle& style,
                       const GenParams& params) const override {
    const json res = channel_.post(
        "/generate", json{{"text", prompt},
                          {"style", style.style_tag == ModelTag::kT5Style ? "t5" : "gpt"},
                          {"params", params.to_json()}});
    return detail::decode_response(channel_.role(),
                                   [&] { return res.at("raw").get<std::string>(); });
  }

 private:
  HttpChannel channel_;
};

class HttpReader final : public Reader {
 public:
  explicit HttpReader(const std::string& url, TransportOptions options = {})
      : channel_("reader", url, options) {}
  std::string name() const override { return "http-reader"; }
  ReaderAnswer answer(std::string_view context, std::string_view question) const override {
    const json res = channel_.post("/answer", json{{"context", context}, {"question", question}});
    ReaderAnswer a = detail::decode_response(channel_.role(), [&] {
      return ReaderAnswer{res.at("answer").get<std::string>(), res.at("score").get<double>()};
    });
    if (!(a.score >= 0.0 && a.score <= 1.0))
      throw ProviderError(ProviderError::Kind::kBadResponse, channel_.role(),
                          "reader score outside [0,1]");
    return a;
  }

 private:
  HttpChannel channel_;
};

class HttpEntityRecognizer final : public EntityRecognizer {
 public:
  explicit HttpEntityRecognizer(const std::string& url, TransportOptions options = {})
      : channel_("ner", url, options) {}
  std::string name() const override { return "http-ner"; }
  std::vector<Entity> recognize(std::string_view text) const override {
    const json res = channel_.post("/ner", json{{"text", text}});
    return detail::decode_response(channel_.role(), [&] {
      std::vector<Entity> out;
      for (const auto& e : res) {
        Entity ent{e.at("text").get<std::string>(),
                   entity_kind_from_string(e.at("kind").get<std::string>()),
                   e.at("start").get<std::size_t>(), e.at("end").get<std::size_t>()};
        if (ent.start > ent.end || ent.end > text.size())
          throw ProviderError(ProviderError::Kind::kBadResponse, channel_.role(),
                              "entity span outside the text");
        out.push_back(std::move(ent));
      }
      return out;
    });
  }

 private:
  HttpChannel channel_;
};

class HttpLemmatizer final : public Lemmatizer {
 public:
  explicit HttpLemmatizer(const std::string& url, TransportOptions options = {})
      : channel_("lemmatizer", url, options) {}
  std::string name() const override { return "http-lemmatizer"; }
  std::vector<std::string> lemmatize(const std::vector<std::string>& tokens) const override {
    const json res = channel_.post("/lemmatize", json{{"tokens", tokens}});
    auto lemmas = detail::decode_response(
        channel_.role(), [&] { return res.at("lemmas").get<std::vector<std::string>>(); });
    if (lemmas.size() != tokens.size())
      throw ProviderError(ProviderError::Kind::kBadResponse, channel_.role(),
                          "lemma count differs from token count");
    return lemmas;
  }

 private:
  HttpChannel channel_;
};

class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(const std::string& url, TransportOptions options = {})
      : channel_("embedder", url, options) {}
  std::string name() const override { return "http-embedder"; }
  std::vector<std::optional<std::vector<double>>> embed(
      const std::vector<std::string>& words) const override {
    const json res = channel_.post("/embed", json{{"words", words}});
    return detail::decode_response(channel_.role(), [&] {
      const auto dim = res.at("dim").get<std::size_t>();
      std::vector<std::optional<std::vector<double>>> out;
      for (const auto& v : res.at("vectors")) {
        if (v.is_null()) {
          out.emplace_back();
          continue;
        }
        auto vec = v.get<std::vector<double>>();
        if (vec.size() != dim)
          throw ProviderError(ProviderError::Kind::kBadResponse, channel_.role(),
                              "vector length differs from dim");
        out.emplace_back(std::move(vec));
      }
      if (out.size() != words.size())
        throw ProviderError(ProviderError::Kind::kBadResponse, channel_.role(),
                            "vector count differs from word count");
      return out;
    });
  }

 private:
  HttpChannel channel_;
};

/// Samples travel by reference: they are written as JSONL under
/// `samples_dir` and the path is sent.
class HttpTrainer final : public Trainer {
 public:
  HttpTrainer(const std::string& url, std::filesystem::path samples_dir,
              TransportOptions options = {})
      : channel_("trainer", url, options), samples_dir_(std::move(samples_dir)) {}
  std::string name() const override { return "http-trainer"; }

  std::string train(const std::vector<SquadItem>& samples, const json& params,
                    const std::optional<std::string>& base) override {
    std::error_code ec;
    std::filesystem::create_directories(samples_dir_, ec);
    std::uint64_t h = fnv1a64("");
    for (const auto& s : samples) h = fnv1a64(s.id, h);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    const auto path = samples_dir_ / ("samples-" + std::string(hex) + ".jsonl");
    {
      std::ofstream out(path, std::ios::binary | std::ios::trunc);
      if (!out) throw IoError("cannot write samples file '" + path.string() + "'");
      for (const auto& s : samples) out << to_json(s).dump() << '\n';
      if (!out) throw IoError("failed writing samples file '" + path.string() + "'");
    }
    json body{{"samples_ref", path.string()}, {"params", params}};
    if (base) body["base"] = *base;
    const json res = channel_.post("/train", body);
    return detail::decode_response(channel_.role(),
                                   [&] { return res.at("handle").get<std::string>(); });
  }

  std::vector<std::string> predict(const std::string& handle,
                                   const std::vector<SquadItem>& items) override {
    json list = json::array();
    for (const auto& i : items)
      list.push_back(json{{"id", i.id}, {"context", i.context}, {"question", i.question}});
    const json res = channel_.post("/predict", json{{"handle", handle}, {"items", list}});
    return detail::decode_response(
        channel_.role(), [&] { return res.at("answers").get<std::vector<std::string>>(); });
  }

 private:
  HttpChannel channel_;
  std::filesystem::path samples_dir_;
};

/// GET /health of a provider; throws ProviderError when unreachable.
inline json provider_health(const std::string& url, TransportOptions options = {}) {
  return HttpChannel("health", url, options).get("/health");
}

}  // namespace qaforge
