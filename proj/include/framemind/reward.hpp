// SPDX-License-Identifier: Apache-2.0
#pragma once

// Trajectory reward: accuracy + format + goal-gated tool incentive + turn bonus.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <regex>
#include <set>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "framemind/log.hpp"
#include "framemind/prompts.hpp"
#include "framemind/protocol.hpp"
#include "framemind/videotool.hpp"

namespace framemind {

enum class QuestionKind { exact_match, open_ended };

/// How an answer is checked against gold. `numeric_tolerance` applies to
/// exact-match answers that are both plain numbers.
struct AnswerScoring {
    QuestionKind kind = QuestionKind::exact_match;
    double numeric_tolerance = 0.0;
};

struct JudgeRequest {
    std::string question;
    std::string standard_answer;
    std::string model_answer;
};

struct JudgeVerdict {
    int judgement = 0;
    std::string raw;
};

struct JudgeTransportError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Scores open-ended answers. Implementations must tolerate concurrent calls.
class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    /// Throws JudgeTransportError when no verdict could be obtained.
    virtual JudgeVerdict judge(const JudgeRequest& request) const = 0;
};

inline std::string render_judge_prompt(const JudgeRequest& r) {
    std::string out(prompts::kJudge);
    out += "\n[Question]: " + r.question;
    out += "\n[Standard Answer]: " + r.standard_answer;
    out += "\n[Model_answer]: " + r.model_answer + "\n";
    return out;
}

inline std::optional<int> parse_judgement(std::string_view text) {
    static const std::regex re(R"(Judgement:\s*([01]))");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(text.begin(), text.end(), m, re)) return std::nullopt;
    return m[1].str() == "1" ? 1 : 0;
}

/// Trim, case-fold, collapse inner whitespace, strip trailing punctuation.
inline std::string normalize_answer(std::string_view answer) {
    std::string out;
    bool pending_space = false;
    for (unsigned char c : protocol::trim(answer)) {
        if (std::isspace(c)) {
            pending_space = true;
            continue;
        }
        if (pending_space && !out.empty()) out += ' ';
        pending_space = false;
        out += static_cast<char>(std::tolower(c));
    }
    while (!out.empty() && std::string_view(".,!?;:").find(out.back()) != std::string_view::npos) out.pop_back();
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

inline std::vector<std::string> answer_tokens(std::string_view answer) {
    std::vector<std::string> tokens;
    std::string cur;
    for (unsigned char c : normalize_answer(answer)) {
        if (std::isalnum(c)) {
            cur += static_cast<char>(c);
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

/// Local judge: accepts when at least `threshold` of the standard answer's
/// distinct tokens appear in the model answer.
class StubJudge final : public JudgeClient {
public:
    explicit StubJudge(double threshold = 0.5) : threshold_(threshold) {}

    JudgeVerdict judge(const JudgeRequest& r) const override {
        const auto std_tokens = answer_tokens(r.standard_answer);
        const auto model_tokens = answer_tokens(r.model_answer);
        const std::set<std::string> gold(std_tokens.begin(), std_tokens.end());
        const std::set<std::string> seen(model_tokens.begin(), model_tokens.end());
        std::size_t hit = 0;
        for (const auto& t : gold) hit += seen.count(t);
        const double overlap = gold.empty() ? 0.0 : static_cast<double>(hit) / static_cast<double>(gold.size());
        const int verdict = overlap >= threshold_ ? 1 : 0;
        return {verdict, "token overlap " + std::to_string(overlap) + "\nJudgement: " + std::to_string(verdict)};
    }

private:
    double threshold_;
};

namespace detail {

inline std::optional<double> as_number(const std::string& s) {
    static const std::regex num(R"(^[-+]?(\d+\.?\d*|\.\d+)$)");
    if (!std::regex_match(s, num)) return std::nullopt;
    return std::stod(s);
}

} // namespace detail

/// 1 when the answer is correct, else 0. A missing answer scores 0, and so
/// does a judge that cannot be reached.
inline int score_accuracy(std::string_view answer, std::string_view gold, const AnswerScoring& scoring,
                          const JudgeClient* judge = nullptr, std::string_view question = {}) {
    if (protocol::trim(answer).empty()) return 0;
    if (scoring.kind == QuestionKind::exact_match) {
        const std::string a = normalize_answer(answer);
        const std::string g = normalize_answer(gold);
        if (a == g) return 1;
        if (scoring.numeric_tolerance > 0.0) {
            const auto an = detail::as_number(a);
            const auto gn = detail::as_number(g);
            if (an && gn && std::abs(*an - *gn) <= scoring.numeric_tolerance) return 1;
        }
        return 0;
    }
    if (judge == nullptr) {
        log::warning("no judge configured for an open-ended question; scoring 0");
        return 0;
    }
    try {
        return judge->judge({std::string(question), std::string(gold), std::string(answer)}).judgement == 1 ? 1 : 0;
    } catch (const JudgeTransportError& e) {
        log::warning("judge transport failure, scoring 0: {}", e.what());
        return 0;
    }
}

struct RewardConfig {
    double turn_bonus = 0.5;
    double single_tool_score = 1.0;
    double synergy_tool_score = 1.2;
    double gating_base = 0.2;
    /// Drop the unconditional exploration share: R_tool = s_tool * acc.
    bool strict_gating = false;
};

/// Raw tool score from the set of tool types that ran successfully.
inline double tool_score(std::span<const ToolKind> successful, const RewardConfig& cfg = {}) {
    const std::set<ToolKind> unique(successful.begin(), successful.end());
    if (unique.empty()) return 0.0;
    return unique.size() == 1 ? cfg.single_tool_score : cfg.synergy_tool_score;
}

inline double tool_reward(double s_tool, int acc, const RewardConfig& cfg = {}) {
    const double base = cfg.strict_gating ? 0.0 : cfg.gating_base;
    return s_tool * (base + (1.0 - base) * acc);
}

inline double turn_reward(int turn_sums, const RewardConfig& cfg = {}) {
    return (turn_sums >= 2 && turn_sums <= 3) ? cfg.turn_bonus : 0.0;
}

struct RewardBreakdown {
    int acc = 0;
    int format = 0;
    double tool = 0.0;
    double turn = 0.0;
    double total = 0.0;
    double tool_score = 0.0;
    int turn_sums = 0;
};

inline void to_json(nlohmann::json& j, const RewardBreakdown& r) {
    j = nlohmann::json{{"acc", r.acc},   {"format", r.format},          {"tool", r.tool},
                       {"turn", r.turn}, {"tool_score", r.tool_score}, {"turn_sums", r.turn_sums},
                       {"total", r.total}};
}

/// Everything the reward needs from a finished trajectory.
struct RewardInputs {
    std::string question;
    std::optional<std::string> final_answer;
    std::string response; // concatenated policy turns
    std::vector<ToolKind> successful_tools;
};

inline RewardBreakdown total_reward(const RewardInputs& in, std::string_view gold, const AnswerScoring& scoring,
                                    const RewardConfig& cfg = {}, const JudgeClient* judge = nullptr) {
    RewardBreakdown r;
    r.acc = in.final_answer ? score_accuracy(*in.final_answer, gold, scoring, judge, in.question) : 0;
    r.format = protocol::check_format(in.response).penalty;
    r.tool_score = tool_score(in.successful_tools, cfg);
    r.tool = tool_reward(r.tool_score, r.acc, cfg);
    r.turn_sums = protocol::count_turn_sums(in.response);
    r.turn = turn_reward(r.turn_sums, cfg);
    r.total = r.acc + r.format + r.tool + r.turn;
    return r;
}

} // namespace framemind
