#include "askit/engine.hpp"

namespace askit {

void EngineConfig::check() const
{
    if (max_direct_retries < 0) throw Error("max_direct_retries must be >= 0");
    if (!(temperature >= 0.0 && temperature <= 2.0)) throw Error("temperature must be within [0.0, 2.0]");
}

RetriesExhausted::RetriesExhausted(Violation last, Dialogue dialogue, int attempts)
    : Error("no valid answer after " + std::to_string(attempts) + " attempts; last violation " +
            std::string(violation_name(last.kind)) + ": " + last.detail),
      last_(std::move(last)),
      dialogue_(std::move(dialogue)),
      attempts_(attempts)
{
}

std::string feedback_text(const Violation& violation)
{
    switch (violation.kind) {
    case Violation::Kind::NoJsonBlock:
        return "Your response did not contain a JSON code block. Respond again with a JSON code block enclosed "
               "with ```json and ```.";
    case Violation::Kind::MissingAnswerField:
        return "Your JSON object did not include the 'answer' field. Respond again including both 'reason' and "
               "'answer'.";
    case Violation::Kind::TypeMismatch:
        return "The 'answer' field did not match the required type at " + violation.report.path + ": expected " +
               violation.report.expected + ", found " + violation.report.found +
               ". Respond again with a conforming 'answer'.";
    default:
        throw Error("no feedback text for violation " + std::string(violation_name(violation.kind)));
    }
}

DirectResult ask_until_valid(LlmClient& client, const PromptTemplate& tpl, const ArgBinding& args,
                             const TypeSchema& answer_schema, const std::vector<Example>& fewshot,
                             const EngineConfig& config)
{
    config.check();
    auto prompt = build_direct(tpl, args, answer_schema, fewshot);
    Dialogue dialogue(std::move(prompt.text));
    const int max_attempts = config.max_direct_retries + 1;
    for (int attempt = 1;; ++attempt) {
        auto response = client.complete(dialogue, config.temperature);
        auto outcome = parse_answer(response, answer_schema);
        if (auto* parsed = std::get_if<ParsedAnswer>(&outcome)) {
            return DirectResult{std::move(parsed->value), std::move(parsed->reason), attempt, std::move(dialogue)};
        }
        auto& violation = std::get<Violation>(outcome);
        dialogue.add_assistant(std::move(response));
        dialogue.add_user(feedback_text(violation));
        if (attempt >= max_attempts) throw RetriesExhausted(std::move(violation), std::move(dialogue), attempt);
    }
}

} // namespace askit
