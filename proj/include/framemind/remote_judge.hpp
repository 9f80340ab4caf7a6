// SPDX-License-Identifier: Apache-2.0
#pragma once

// HTTP judge client. POSTs {"prompt", "question", "standard_answer",
// "model_answer"} as JSON to `<base_url><path>` and reads "Judgement: 0|1"
// from the response body (plain text, or a JSON object with a "content" field).

#include <string>

#include "httplib.h"
#include "json.hpp"

#include "framemind/reward.hpp"

namespace framemind {

class RemoteJudgeClient final : public JudgeClient {
public:
    explicit RemoteJudgeClient(std::string base_url, std::string path = "/judge", int timeout_seconds = 30)
        : base_url_(std::move(base_url)), path_(std::move(path)), timeout_seconds_(timeout_seconds) {}

    JudgeVerdict judge(const JudgeRequest& request) const override {
        // One client per call keeps concurrent requests independent.
        httplib::Client client(base_url_);
        client.set_connection_timeout(timeout_seconds_, 0);
        client.set_read_timeout(timeout_seconds_, 0);
        const nlohmann::json body{{"prompt", render_judge_prompt(request)},
                                  {"question", request.question},
                                  {"standard_answer", request.standard_answer},
                                  {"model_answer", request.model_answer}};
        auto res = client.Post(path_, body.dump(), "application/json");
        if (!res) throw JudgeTransportError("judge request failed: " + httplib::to_string(res.error()));
        if (res->status != 200) throw JudgeTransportError("judge returned HTTP " + std::to_string(res->status));

        std::string text = res->body;
        const auto parsed = nlohmann::json::parse(text, nullptr, false);
        if (!parsed.is_discarded() && parsed.is_object() && parsed.contains("content") &&
            parsed["content"].is_string())
            text = parsed["content"].get<std::string>();
        const auto verdict = parse_judgement(text);
        if (!verdict) throw JudgeTransportError("judge response has no Judgement line");
        return {*verdict, text};
    }

private:
    std::string base_url_;
    std::string path_;
    int timeout_seconds_;
};

} // namespace framemind
