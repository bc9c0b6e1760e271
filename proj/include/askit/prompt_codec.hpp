#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "askit/task.hpp"

namespace askit {

struct DirectPrompt {
    std::string text;
    /// The `{reason, answer}` envelope rendered into the prompt.
    TypeSchema schema;
};

struct CodegenPrompt {
    std::string text;
    std::string fence_tag;
    std::string skeleton;
};

struct Violation {
    enum class Kind { NoJsonBlock, MissingAnswerField, TypeMismatch, NoCodeBlock, SyntaxError, TestFailure };

    Kind kind;
    std::string detail;
    /// Populated for TypeMismatch.
    ValidationReport report;
};

std::string_view violation_name(Violation::Kind kind) noexcept;

/// Direct-answer prompt: JSON envelope preamble, the `ts` type block,
/// few-shot demonstrations, then the substituted task.
DirectPrompt build_direct(const PromptTemplate& tpl, const ArgBinding& args, const TypeSchema& answer_schema,
                          const std::vector<Example>& fewshot = {});

/// One-shot code generation prompt for the task's target language.
CodegenPrompt build_codegen(const TaskSpec& spec);

/// `export function <name>({a, b}: {a: T, b: U}): R`. A missing return
/// schema renders as `void`; a missing param schema list renders `any` types.
std::string synthesize_signature(std::string_view name, const std::optional<TypeSchema>& return_schema,
                                 const std::vector<std::string>& param_names,
                                 const std::optional<ParamSchemas>& param_schemas);

/// Python counterpart: `def <name>(*, a: int, b: int) -> int:`.
std::string synthesize_python_signature(std::string_view name, const std::optional<TypeSchema>& return_schema,
                                        const std::vector<std::string>& param_names,
                                        const std::optional<ParamSchemas>& param_schemas);

/// Python annotation for a schema (`list[int]`, `Literal['yes'] | Literal['no']`).
std::string render_python(const TypeSchema& schema);

/// Contents of the first fenced block opened with exactly ```` ```<tag> ````.
std::optional<std::string> extract_block(std::string_view text, std::string_view tag);

struct ParsedAnswer {
    Json value;
    std::string reason;
};

/// Applies the three response criteria in order: JSON block present,
/// object with `answer`, `answer` matches the schema.
std::variant<ParsedAnswer, Violation> parse_answer(std::string_view text, const TypeSchema& answer_schema);

} // namespace askit
