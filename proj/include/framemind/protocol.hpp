// SPDX-License-Identifier: Apache-2.0
#pragma once

// Tag grammar of the frame-interleaved dialogue and the turn controller.
//
// The grammar is flat: a block is `<kind>content</kind>` with a literal,
// case-sensitive tag name. Blocks of the same kind never nest; an opening
// tag seen again before its close leaves the outer one unclosed. Text between
// blocks is not captured. See docs/grammar.md for the full reference.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace framemind::protocol {

enum class TagKind { think, tool_call, turn_sum, answer, tool_response };

inline constexpr std::array kAllTagKinds{TagKind::think, TagKind::tool_call, TagKind::turn_sum,
                                         TagKind::answer, TagKind::tool_response};

inline constexpr std::size_t kMaxToolCallsPerTurn = 3;
inline constexpr int kDefaultMaxTurns = 3;

constexpr std::string_view tag_name(TagKind kind) {
    switch (kind) {
    case TagKind::think: return "think";
    case TagKind::tool_call: return "tool_call";
    case TagKind::turn_sum: return "turn_sum";
    case TagKind::answer: return "answer";
    case TagKind::tool_response: return "tool_response";
    }
    return "";
}

inline std::string open_tag(TagKind kind) { return "<" + std::string(tag_name(kind)) + ">"; }
inline std::string close_tag(TagKind kind) { return "</" + std::string(tag_name(kind)) + ">"; }

inline std::string render_block(TagKind kind, std::string_view content) {
    std::string out = open_tag(kind);
    out.append(content);
    out += close_tag(kind);
    return out;
}

/// Byte range [start, end) of a whole block, tags included.
struct Span {
    std::size_t start = 0;
    std::size_t end = 0;
    friend bool operator==(const Span&, const Span&) = default;
};

struct TagBlock {
    TagKind kind{};
    std::string content;
    Span span;
    friend bool operator==(const TagBlock&, const TagBlock&) = default;
};

enum class IssueKind { unclosed, nested, stray_close };

struct TagIssue {
    IssueKind kind{};
    TagKind tag{};
    std::size_t offset = 0;
};

inline std::string describe(const TagIssue& issue) {
    std::string tag(tag_name(issue.tag));
    switch (issue.kind) {
    case IssueKind::unclosed: return "unclosed <" + tag + "> at byte " + std::to_string(issue.offset);
    case IssueKind::nested: return "nested <" + tag + "> at byte " + std::to_string(issue.offset);
    case IssueKind::stray_close:
        return "stray </" + tag + "> at byte " + std::to_string(issue.offset);
    }
    return {};
}

struct ScanResult {
    std::vector<TagBlock> blocks;
    std::vector<TagIssue> issues;
};

namespace detail {

inline bool starts_with_at(std::string_view text, std::size_t pos, std::string_view prefix) {
    return text.size() - pos >= prefix.size() && text.compare(pos, prefix.size(), prefix) == 0;
}

// Tag names share no prefix, so at most one opener or closer matches at a position.
inline std::optional<TagKind> opener_at(std::string_view text, std::size_t pos) {
    for (TagKind kind : kAllTagKinds)
        if (starts_with_at(text, pos, open_tag(kind))) return kind;
    return std::nullopt;
}

inline std::optional<TagKind> closer_at(std::string_view text, std::size_t pos) {
    for (TagKind kind : kAllTagKinds)
        if (starts_with_at(text, pos, close_tag(kind))) return kind;
    return std::nullopt;
}

inline bool is_blank(std::string_view text) {
    return std::all_of(text.begin(), text.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

} // namespace detail

/// Single left-to-right pass that pairs openers with their closers.
inline ScanResult scan_tags(std::string_view text) {
    ScanResult out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t lt = text.find('<', pos);
        if (lt == std::string_view::npos) break;
        if (auto kind = detail::opener_at(text, lt)) {
            const std::string open = open_tag(*kind);
            const std::string close = close_tag(*kind);
            const std::size_t body = lt + open.size();
            const std::size_t closer = text.find(close, body);
            const std::size_t reopen = text.find(open, body);
            if (closer != std::string_view::npos && (reopen == std::string_view::npos || closer < reopen)) {
                out.blocks.push_back(TagBlock{*kind, std::string(text.substr(body, closer - body)),
                                              Span{lt, closer + close.size()}});
                pos = closer + close.size();
            } else {
                out.issues.push_back(TagIssue{closer == std::string_view::npos ? IssueKind::unclosed
                                                                              : IssueKind::nested,
                                              *kind, lt});
                pos = body;
            }
        } else if (auto kind = detail::closer_at(text, lt)) {
            out.issues.push_back(TagIssue{IssueKind::stray_close, *kind, lt});
            pos = lt + close_tag(*kind).size();
        } else {
            pos = lt + 1;
        }
    }
    return out;
}

/// One policy turn after parsing. Malformedness is recorded, never thrown.
struct TurnOutput {
    std::vector<TagBlock> blocks;
    std::string thought;
    std::string raw;
    bool malformed = false;
    std::vector<std::string> violations;
    std::size_t dropped_tool_calls = 0;

    std::size_t count(TagKind kind) const {
        return static_cast<std::size_t>(
            std::count_if(blocks.begin(), blocks.end(), [&](const TagBlock& b) { return b.kind == kind; }));
    }

    const TagBlock* first(TagKind kind) const {
        auto it = std::find_if(blocks.begin(), blocks.end(), [&](const TagBlock& b) { return b.kind == kind; });
        return it == blocks.end() ? nullptr : &*it;
    }

    std::vector<std::string> tool_calls() const {
        std::vector<std::string> calls;
        for (const auto& b : blocks)
            if (b.kind == TagKind::tool_call) calls.push_back(b.content);
        return calls;
    }
};

inline TurnOutput parse_turn(std::string_view raw) {
    ScanResult scanned = scan_tags(raw);
    TurnOutput out;
    out.raw = std::string(raw);
    for (const auto& issue : scanned.issues) out.violations.push_back(describe(issue));

    std::size_t tool_calls = 0;
    for (auto& block : scanned.blocks) {
        if (block.kind == TagKind::tool_call && ++tool_calls > kMaxToolCallsPerTurn) {
            ++out.dropped_tool_calls;
            continue;
        }
        out.blocks.push_back(std::move(block));
    }
    if (out.dropped_tool_calls > 0)
        out.violations.push_back(std::to_string(out.dropped_tool_calls) + " tool_call block(s) beyond the limit of " +
                                 std::to_string(kMaxToolCallsPerTurn) + " ignored");

    for (const auto& b : out.blocks) {
        if (b.kind != TagKind::think) continue;
        if (!out.thought.empty()) out.thought += '\n';
        out.thought += b.content;
    }
    if (out.count(TagKind::think) == 0) out.violations.push_back("no closed <think> block");
    if (out.count(TagKind::answer) > 0 && out.count(TagKind::turn_sum) > 0)
        out.violations.push_back("both <answer> and <turn_sum> present");
    if (out.count(TagKind::answer) > 1) out.violations.push_back("more than one <answer> block");
    if (out.count(TagKind::turn_sum) > 1) out.violations.push_back("more than one <turn_sum> block");

    out.malformed = !out.violations.empty();
    return out;
}

struct FormatVerdict {
    bool valid = false;
    int penalty = -1;
    std::optional<std::string> violation;
};

/// Whole-response rule: every think/answer tag balanced, exactly one closed
/// answer block, and only whitespace after it.
inline FormatVerdict check_format(std::string_view full_response) {
    const ScanResult scanned = scan_tags(full_response);
    auto invalid = [](std::string why) { return FormatVerdict{false, -1, std::move(why)}; };

    for (const auto& issue : scanned.issues)
        if (issue.tag == TagKind::think || issue.tag == TagKind::answer) return invalid(describe(issue));

    const TagBlock* answer = nullptr;
    std::size_t answers = 0;
    for (const auto& b : scanned.blocks) {
        if (b.kind != TagKind::answer) continue;
        ++answers;
        answer = &b;
    }
    if (answers == 0) return invalid("no closed <answer> block");
    if (answers > 1) return invalid("more than one <answer> block");
    if (!detail::is_blank(full_response.substr(answer->span.end)))
        return invalid("content after </answer>");
    return FormatVerdict{true, 0, std::nullopt};
}

class Transition {
public:
    enum class Kind { Continue, StopWithAnswer, StopAtCap };

    static Transition proceed() { return Transition(Kind::Continue, {}); }
    static Transition stop_at_cap() { return Transition(Kind::StopAtCap, {}); }
    static Transition stop_with_answer(std::string answer) {
        return Transition(Kind::StopWithAnswer, std::move(answer));
    }

    Kind kind() const { return kind_; }
    bool terminal() const { return kind_ != Kind::Continue; }
    const std::string& answer() const { return answer_; }

    friend bool operator==(const Transition&, const Transition&) = default;

private:
    Transition(Kind kind, std::string answer) : kind_(kind), answer_(std::move(answer)) {}

    Kind kind_;
    std::string answer_;
};

inline std::string_view trim(std::string_view s) {
    auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && is_space(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && is_space(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

/// Loop control for turn `turn_index` (1-based). An answer always stops the
/// rollout; a whitespace-only answer stops it without one.
inline Transition decide_transition(const TurnOutput& turn, int turn_index, int max_turns = kDefaultMaxTurns) {
    if (const TagBlock* answer = turn.first(TagKind::answer)) {
        const std::string_view text = trim(answer->content);
        if (text.empty()) return Transition::stop_at_cap();
        return Transition::stop_with_answer(std::string(text));
    }
    if (turn.first(TagKind::turn_sum) != nullptr && turn_index < max_turns) return Transition::proceed();
    return Transition::stop_at_cap();
}

inline int count_turn_sums(std::string_view trajectory_text) {
    const ScanResult scanned = scan_tags(trajectory_text);
    return static_cast<int>(std::count_if(scanned.blocks.begin(), scanned.blocks.end(),
                                          [](const TagBlock& b) { return b.kind == TagKind::turn_sum; }));
}

} // namespace framemind::protocol
