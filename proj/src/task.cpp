#include "askit/task.hpp"

#include <algorithm>
#include <set>

namespace askit {

std::string_view target_name(Target t) noexcept
{
    return t == Target::TypeScript ? "typescript" : "python";
}

Target parse_target(std::string_view name)
{
    if (name == "typescript" || name == "ts") return Target::TypeScript;
    if (name == "python" || name == "py") return Target::Python;
    throw Error("unknown target language '" + std::string(name) + "'");
}

std::string_view fence_tag(Target t) noexcept { return target_name(t); }

std::string_view file_extension(Target t) noexcept { return t == Target::TypeScript ? "ts" : "py"; }

void TaskSpec::check() const
{
    if (!is_identifier(name)) throw SpecError("task name '" + name + "' is not a valid identifier");
    const auto& params = tpl.params();
    if (param_schemas) {
        std::set<std::string> declared;
        for (const auto& [pname, _] : *param_schemas) {
            if (!declared.insert(pname).second) {
                throw SpecError("task '" + name + "': parameter '" + pname + "' declared twice");
            }
        }
        std::set<std::string> used(params.begin(), params.end());
        if (declared != used) {
            throw SpecError("task '" + name + "': parameter types must name exactly the template parameters");
        }
    }
    auto check_examples = [&](const std::vector<Example>& examples, const char* what) {
        for (const auto& ex : examples) {
            if (!ex.input.is_object()) throw SpecError(std::string(what) + " input must be an object");
            for (const auto& [key, _] : ex.input.items()) {
                if (std::find(params.begin(), params.end(), key) == params.end()) {
                    throw SpecError("task '" + name + "': " + what + " input key '" + key +
                                    "' is not a template parameter");
                }
            }
        }
    };
    check_examples(fewshot, "few-shot example");
    check_examples(tests, "test example");
}

} // namespace askit
