#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "askit/template.hpp"
#include "askit/typeschema.hpp"

namespace askit {

/// Input/output demonstration or test case.
struct Example {
    ArgBinding input = Json::object();
    Json output;
};

enum class Target { TypeScript, Python };

std::string_view target_name(Target t) noexcept;
/// Accepts `typescript`/`ts` and `python`/`py`. Throws Error otherwise.
Target parse_target(std::string_view name);
/// Fence tag used in codegen prompts and when extracting code from responses.
std::string_view fence_tag(Target t) noexcept;
std::string_view file_extension(Target t) noexcept;

using ParamSchemas = std::vector<std::pair<std::string, TypeSchema>>;

/// Everything a `define` call captures.
struct TaskSpec {
    std::string name;
    PromptTemplate tpl;
    /// nullopt means the task returns nothing (`void`).
    std::optional<TypeSchema> return_schema;
    /// nullopt when parameter types were not declared.
    std::optional<ParamSchemas> param_schemas;
    std::vector<Example> fewshot;
    std::vector<Example> tests;
    Target target = Target::TypeScript;

    /// Checks the name, the param/template agreement and example keys.
    /// Throws SpecError.
    void check() const;
};

class SpecError : public Error {
public:
    using Error::Error;
};

} // namespace askit
