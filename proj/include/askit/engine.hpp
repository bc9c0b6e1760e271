#pragma once

#include <string>
#include <vector>

#include "askit/llm_client.hpp"
#include "askit/prompt_codec.hpp"

namespace askit {

struct EngineConfig {
    int max_direct_retries = 9;
    double temperature = 1.0;

    void check() const;
};

struct DirectResult {
    Json value;
    std::string reason;
    int attempts = 0;
    Dialogue dialogue;
};

/// Every attempt produced a response that failed the response criteria.
class RetriesExhausted : public Error {
public:
    RetriesExhausted(Violation last, Dialogue dialogue, int attempts);
    const Violation& violation() const noexcept { return last_; }
    const Dialogue& dialogue() const noexcept { return dialogue_; }
    int attempts() const noexcept { return attempts_; }

private:
    Violation last_;
    Dialogue dialogue_;
    int attempts_;
};

/// Fixed corrective instruction for a response violation.
std::string feedback_text(const Violation& violation);

/// Sends the direct prompt and re-asks with feedback until the answer
/// validates or `max_direct_retries + 1` attempts have been made.
DirectResult ask_until_valid(LlmClient& client, const PromptTemplate& tpl, const ArgBinding& args,
                             const TypeSchema& answer_schema, const std::vector<Example>& fewshot,
                             const EngineConfig& config = {});

} // namespace askit
