#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "askit/codegen.hpp"
#include "askit/engine.hpp"

namespace askit {

struct Answer {
    Json value;
    std::string reason;
    int attempts = 0;
};

/// One-off direct question: `ask(TypeSchema::integer(), "What is 7 times 8?")`.
Answer ask(LlmClient& client, const TypeSchema& answer_schema, std::string_view template_text,
           const ArgBinding& args = Json::object(), const std::vector<Example>& fewshot = {},
           const EngineConfig& config = {});

struct DefineOptions {
    std::optional<ParamSchemas> param_schemas;
    std::vector<Example> fewshot;
    std::vector<Example> tests;
    /// Defaults to `task_<8 hex>` derived from the template.
    std::optional<std::string> name;
    Target target = Target::TypeScript;
    /// Reuse few-shot examples as tests when no tests are given.
    bool fewshot_as_tests = false;
};

class CompiledFunction;

/// A task defined from a prompt template. Calling it queries the model.
class DefinedFunction {
public:
    DefinedFunction(TaskSpec spec, std::shared_ptr<LlmClient> client, EngineConfig config = {});

    Answer operator()(const ArgBinding& args) const;

    const TaskSpec& spec() const noexcept { return spec_; }
    const std::shared_ptr<LlmClient>& client() const noexcept { return client_; }

    /// Generates (or loads from cache) code for this task.
    CompiledFunction compile(const CodegenConfig& config = {}) const;

private:
    TaskSpec spec_;
    std::shared_ptr<LlmClient> client_;
    EngineConfig config_;
};

/// `answer_schema` nullopt declares a task with no result (`void`);
/// such tasks can be compiled but not asked directly.
DefinedFunction define(std::shared_ptr<LlmClient> client, std::optional<TypeSchema> answer_schema,
                       std::string_view template_text, DefineOptions options = {}, EngineConfig config = {});

/// A task backed by validated generated code. Calls never reach the model.
class CompiledFunction {
public:
    CompiledFunction(TaskSpec spec, GeneratedFunction generated, CodegenConfig config);

    Json operator()(const ArgBinding& args) const;

    const TaskSpec& spec() const noexcept { return spec_; }
    const GeneratedFunction& generated() const noexcept { return generated_; }

private:
    TaskSpec spec_;
    GeneratedFunction generated_;
    std::shared_ptr<FunctionRunner> runner_;
};

} // namespace askit
