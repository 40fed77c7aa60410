// Completion endpoint client. The request asks the server to echo the prompt
// with per-token log-probabilities and generate nothing:
//
//   POST <endpoint_url>
//   {"model": ..., "prompt": "<prompt> <answer>", "max_tokens": 0,
//    "logprobs": true, "echo": true}
//
// and reads choices[0].logprobs.{token_logprobs,text_offset}. Tokens whose
// text offset lies at or beyond the end of the prompt belong to the answer.

#include <cstdlib>

#include "httplib.h"
#include "json.hpp"
#include "ragmi/answer_scorer.hpp"
#include "ragmi/error.hpp"

namespace ragmi {

using nlohmann::json;

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("scorer: endpoint_url must include a scheme: '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpBackend::HttpBackend(const ScorerConfig& cfg) : cfg_(cfg) {
  if (cfg_.endpoint_url.empty()) throw ConfigError("scorer: endpoint_url is empty");
  split_url(cfg_.endpoint_url);
  if (!cfg_.api_key_env_var.empty())
    if (const char* key = std::getenv(cfg_.api_key_env_var.c_str())) api_key_ = key;
}

ContinuationScore HttpBackend::score(const std::string& prompt, const std::string& answer) {
  const Endpoint ep = split_url(cfg_.endpoint_url);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(10);
  client.set_read_timeout(120);

  const std::string full = prompt + " " + answer;
  json body = {{"model", cfg_.model_id}, {"prompt", full},  {"max_tokens", 0},
               {"logprobs", true},       {"echo", true}};
  httplib::Headers headers;
  if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

  auto res = client.Post(ep.path, headers, body.dump(), "application/json");
  if (!res) throw TransportError("scorer: request failed: " + httplib::to_string(res.error()));
  if (res->status == 408 || res->status == 429 || res->status >= 500)
    throw TransportError("scorer: endpoint returned HTTP " + std::to_string(res->status));
  if (res->status != 200)
    throw Error("scorer: endpoint rejected request with HTTP " + std::to_string(res->status) +
                ": " + res->body.substr(0, 200));

  json reply;
  try {
    reply = json::parse(res->body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("scorer: unparseable response: ") + e.what());
  }
  const json* lp = nullptr;
  if (reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
    const json& choice = reply["choices"][0];
    if (choice.contains("logprobs") && choice["logprobs"].is_object()) lp = &choice["logprobs"];
  }
  if (!lp || !lp->contains("token_logprobs") || !lp->contains("text_offset"))
    throw CapabilityError("scorer: endpoint did not return per-token log-probabilities");
  const json& values = (*lp)["token_logprobs"];
  const json& offsets = (*lp)["text_offset"];
  if (!values.is_array() || !offsets.is_array() || values.size() != offsets.size())
    throw CapabilityError("scorer: malformed logprobs block");

  ContinuationScore out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (offsets[i].get<long long>() < static_cast<long long>(prompt.size())) continue;
    if (!values[i].is_number())
      throw CapabilityError("scorer: missing log-probability for an answer token");
    out.total_logprob += values[i].get<double>();
    ++out.token_count;
  }
  if (out.token_count == 0)
    throw CapabilityError("scorer: response did not echo the answer tokens");
  return out;
}

}  // namespace ragmi
