// SPDX-License-Identifier: Apache-2.0
#pragma once

// Prompt templates for the frame-interleaved dialogue and the remote judge.
// These must stay byte-identical to assets/prompts/*.txt (checked by test_prompts).

#include <string_view>

namespace framemind::prompts {

inline constexpr std::string_view kSystem = R"prompt({{ content | trim }} You are an expert video analysis assistant.

# Tools
You are provided with function signatures within <tool_call></tool_call> XML tags:
<tool_call>
{
  "type": "function",
  "function": {
    "name": "FrameAt",
    "parameters": {
      "type": "object",
      "properties": {
        "time": {
          "type": "number",
        }
      },
      "required": ["time"]
    }
  }
}
</tool_call>
<tool_call>
{
  "type": "function",
  "function": {
    "name": "VideoClip",
    "parameters": {
      "type": "object",
      "properties": {
        "t_start": { "type": "number", "Start time (s)" },
        "t_end":   { "type": "number", "End time (s)" }
      },
      "required": ["t_start", "t_end"]
    }
  }
}
</tool_call>

# How to call a tool
Return a json object with function name and arguments within <tool_call></tool_call> XML tags:
<tool_call>
{ "name": <function-name>, "arguments": <args-json-object> }
</tool_call>
You may call one or more functions to assist with the user query.

# How to call a turn summary:
Return a JSON object with name and arguments within <turn_sum></turn_sum> XML tags:
<turn_sum>
{ "name": "TurnSum", "arguments": { "attempt": "...", "observation": "...", "status": "need_more_info|partial_progress|blocked", "next_step": "..." } }
</turn_sum>

# Output Protocol (STRICT)
- Per-turn pattern: Tool turn -> <think>...</think> ( <tool_call>{...}</tool_call> ){1,3}<turn_sum>...</turn_sum>;
- Every turn MUST summary the content of the turn and end with a closed <turn_sum>... </turn_sum>.
)prompt";

inline constexpr std::string_view kUserTurn1 = R"prompt(Start with <think>.
Format strictly as: <think>...</think> <tool_call>...</tool_call> <turn_sum>...</turn_sum>.
Please think about this question as if you were a human pondering deeply. It’s encouraged to include self-reflection or verification in the reasoning process. Provide your detailed reasoning between the <think> and </think> tags. All your formal output should be a brief sentence, less than 100 tokens.
You MUST end in <turn_sum>...</turn_sum>. Use <tool_call> to get the specific segments of videos or frames.
)prompt";

inline constexpr std::string_view kTurnK = R"prompt(<tool_response>{visual_content}</tool_response>
Based on the tool response above, analyze the video content and answer the original question. 
Start with <think> and analyze the time information and the content shown in these frames.
You can use <tool_call> if you need to get the specific segments of videos or frames.
If the information is enough, output your answer after <answer> and end in </answer>. If not, summary the content of the turn after <turn_sum> and end in </turn_sum>.
)prompt";

inline constexpr std::string_view kJudge = R"prompt(You are an expert evaluating video understanding accuracy for free-form questions. Below are two answers to a video question: [Question] is the task, [Standard Answer] is correct, and [Model_answer] is the model's response.

**General Evaluation Principles:**
- Both answers should demonstrate understanding of the same video content
- Accept different wording, style, and organization if meaning is equivalent
- Be lenient with minor details but strict with major factual errors
- Consider the overall coherence and completeness of understanding
- Focus on whether both answers would be considered correct by a human evaluator

**Scoring Guidelines:**
- Score 1 if answers show equivalent video understanding despite different expression
- Score 0 if answers show fundamentally different understanding of the video content
- Be generous with semantic equivalence but strict with factual accuracy

If the video understanding is consistent, output Judgement: 1; if different, output Judgement: 0.
)prompt";

} // namespace framemind::prompts
