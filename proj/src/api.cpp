#include "askit/api.hpp"

#include "askit/digest.hpp"

namespace askit {

Answer ask(LlmClient& client, const TypeSchema& answer_schema, std::string_view template_text,
           const ArgBinding& args, const std::vector<Example>& fewshot, const EngineConfig& config)
{
    auto tpl = PromptTemplate::parse(template_text);
    auto result = ask_until_valid(client, tpl, args, answer_schema, fewshot, config);
    return Answer{std::move(result.value), std::move(result.reason), result.attempts};
}

DefinedFunction::DefinedFunction(TaskSpec spec, std::shared_ptr<LlmClient> client, EngineConfig config)
    : spec_(std::move(spec)), client_(std::move(client)), config_(config)
{
    spec_.check();
    config_.check();
}

Answer DefinedFunction::operator()(const ArgBinding& args) const
{
    if (!spec_.return_schema) throw SpecError("task '" + spec_.name + "' returns nothing; compile it instead");
    if (!client_) throw Error("task '" + spec_.name + "' has no client");
    auto result = ask_until_valid(*client_, spec_.tpl, args, *spec_.return_schema, spec_.fewshot, config_);
    return Answer{std::move(result.value), std::move(result.reason), result.attempts};
}

CompiledFunction DefinedFunction::compile(const CodegenConfig& config) const
{
    if (config.codable_allowlist && !config.codable_allowlist->permits(spec_.name)) {
        throw NotCodable("task '" + spec_.name + "' is not designated as codable");
    }
    if (!client_) throw Error("task '" + spec_.name + "' has no client");
    auto generated = compile_task(*client_, spec_, config);
    return CompiledFunction(spec_, std::move(generated), config);
}

DefinedFunction define(std::shared_ptr<LlmClient> client, std::optional<TypeSchema> answer_schema,
                       std::string_view template_text, DefineOptions options, EngineConfig config)
{
    TaskSpec spec;
    spec.tpl = PromptTemplate::parse(template_text);
    spec.name = options.name ? *options.name : "task_" + sha256_hex(spec.tpl.raw()).substr(0, 8);
    spec.return_schema = std::move(answer_schema);
    spec.param_schemas = std::move(options.param_schemas);
    spec.fewshot = std::move(options.fewshot);
    spec.tests = std::move(options.tests);
    if (spec.tests.empty() && options.fewshot_as_tests) spec.tests = spec.fewshot;
    spec.target = options.target;
    return DefinedFunction(std::move(spec), std::move(client), config);
}

CompiledFunction::CompiledFunction(TaskSpec spec, GeneratedFunction generated, CodegenConfig config)
    : spec_(std::move(spec)),
      generated_(std::move(generated)),
      runner_(std::make_shared<FunctionRunner>(generated_, std::move(config)))
{
}

Json CompiledFunction::operator()(const ArgBinding& args) const { return runner_->call(args); }

} // namespace askit
