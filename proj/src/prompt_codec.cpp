#include "askit/prompt_codec.hpp"

#include <cctype>
#include <sstream>

namespace askit {

namespace {

constexpr std::string_view kDirectPreamble =
    "You are a helpful assistant that generates responses in JSON format enclosed with ```json and ``` like:\n"
    "```json\n"
    "{ \"reason\": \"Step-by-step reason for the answer\", \"answer\": \"Final answer or result\" }\n"
    "```\n"
    "The response in the JSON code block should match the type defined as follows:\n";

constexpr std::string_view kExplainLine = "Explain your answer step-by-step in the 'reason' field.\n";

constexpr std::string_view kQuestion = "Q: Implement the following function:\n";

constexpr std::string_view kTypeScriptOneShot =
    "Q: Implement the following function:\n"
    "```typescript\n"
    "export function func({x, y}: {x: number, y: number}): number {\n"
    "  // add 'x' and 'y'\n"
    "}\n"
    "```\n"
    "\n"
    "A:\n"
    "```typescript\n"
    "export function func({x, y}: {x: number, y: number}): number {\n"
    "  // add 'x' and 'y'\n"
    "  return x + y;\n"
    "}\n"
    "```\n"
    "\n";

constexpr std::string_view kPythonOneShot =
    "Q: Implement the following function:\n"
    "```python\n"
    "def func(*, x: int, y: int) -> int:\n"
    "    # add 'x' and 'y'\n"
    "```\n"
    "\n"
    "A:\n"
    "```python\n"
    "def func(*, x: int, y: int) -> int:\n"
    "    # add 'x' and 'y'\n"
    "    return x + y\n"
    "```\n"
    "\n";

std::vector<std::string> split_lines(const std::string& text)
{
    std::vector<std::string> lines;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    if (lines.empty()) lines.emplace_back();
    return lines;
}

std::string param_type(const std::string& name, const std::optional<ParamSchemas>& schemas, bool python)
{
    if (!schemas) return python ? "Any" : "any";
    for (const auto& [pname, schema] : *schemas) {
        if (pname == name) return python ? render_python(schema) : render(schema);
    }
    return python ? "Any" : "any";
}

} // namespace

std::string_view violation_name(Violation::Kind kind) noexcept
{
    switch (kind) {
    case Violation::Kind::NoJsonBlock: return "NoJsonBlock";
    case Violation::Kind::MissingAnswerField: return "MissingAnswerField";
    case Violation::Kind::TypeMismatch: return "TypeMismatch";
    case Violation::Kind::NoCodeBlock: return "NoCodeBlock";
    case Violation::Kind::SyntaxError: return "SyntaxError";
    case Violation::Kind::TestFailure: return "TestFailure";
    }
    return "Unknown";
}

DirectPrompt build_direct(const PromptTemplate& tpl, const ArgBinding& args, const TypeSchema& answer_schema,
                          const std::vector<Example>& fewshot)
{
    // Substitute first so binding errors surface before any assembly.
    std::string task = substitute_direct(tpl, args);

    auto envelope = wrap_response(answer_schema);
    std::string text(kDirectPreamble);
    text += "```ts\n" + render(envelope) + "\n```\n";
    text += kExplainLine;
    text += "\n";
    for (const auto& ex : fewshot) {
        text += substitute_partial(tpl, ex.input) + "\n";
        text += "```json\n{\"reason\": \"\", \"answer\": " + compact_json(ex.output) + "}\n```\n\n";
    }
    text += task;
    return DirectPrompt{std::move(text), std::move(envelope)};
}

std::string synthesize_signature(std::string_view name, const std::optional<TypeSchema>& return_schema,
                                 const std::vector<std::string>& param_names,
                                 const std::optional<ParamSchemas>& param_schemas)
{
    std::string names;
    std::string types;
    for (const auto& p : param_names) {
        if (!names.empty()) {
            names += ", ";
            types += ", ";
        }
        names += p;
        types += p + ": " + param_type(p, param_schemas, false);
    }
    std::string ret = return_schema ? render(*return_schema) : "void";
    return "export function " + std::string(name) + "({" + names + "}: {" + types + "}): " + ret;
}

std::string render_python(const TypeSchema& schema)
{
    using K = TypeSchema::Kind;
    switch (schema.kind()) {
    case K::Integer: return "int";
    case K::Float: return "float";
    case K::Boolean: return "bool";
    case K::Text: return "str";
    case K::Literal: {
        const auto& v = schema.literal_value();
        if (v.is_boolean()) return v.get<bool>() ? "Literal[True]" : "Literal[False]";
        if (v.is_string()) return "Literal[" + render(schema) + "]";
        return "Literal[" + v.dump() + "]";
    }
    case K::List: return "list[" + render_python(schema.element()) + "]";
    case K::Record: return "dict";
    case K::Union: {
        std::string out;
        for (const auto& m : schema.members()) {
            if (!out.empty()) out += " | ";
            out += render_python(m);
        }
        return out;
    }
    }
    return "Any";
}

std::string synthesize_python_signature(std::string_view name, const std::optional<TypeSchema>& return_schema,
                                        const std::vector<std::string>& param_names,
                                        const std::optional<ParamSchemas>& param_schemas)
{
    std::string params;
    for (const auto& p : param_names) {
        params += ", " + p + ": " + param_type(p, param_schemas, true);
    }
    std::string ret = return_schema ? render_python(*return_schema) : "None";
    std::string head = params.empty() ? "" : "*" + params;
    return "def " + std::string(name) + "(" + head + ") -> " + ret + ":";
}

CodegenPrompt build_codegen(const TaskSpec& spec)
{
    const bool python = spec.target == Target::Python;
    const std::string indent = python ? "    " : "  ";
    const std::string comment = python ? "# " : "// ";

    std::string skeleton;
    if (python) {
        skeleton = synthesize_python_signature(spec.name, spec.return_schema, spec.tpl.params(), spec.param_schemas);
    } else {
        skeleton = synthesize_signature(spec.name, spec.return_schema, spec.tpl.params(), spec.param_schemas) + " {";
    }
    skeleton += "\n";
    for (const auto& line : split_lines(substitute_comment(spec.tpl))) {
        skeleton += indent + comment + line + "\n";
    }
    for (const auto& ex : spec.fewshot) {
        skeleton += indent + comment + "Example: " + spec.name + "(" + spaced_json(ex.input) +
                    ") == " + spaced_json(ex.output) + "\n";
    }
    if (!python) skeleton += "}\n";

    std::string tag(fence_tag(spec.target));
    std::string text(python ? kPythonOneShot : kTypeScriptOneShot);
    text += kQuestion;
    text += "```" + tag + "\n" + skeleton + "```";
    return CodegenPrompt{std::move(text), std::move(tag), std::move(skeleton)};
}

std::optional<std::string> extract_block(std::string_view text, std::string_view tag)
{
    const std::string open = "```" + std::string(tag);
    std::size_t search = 0;
    while (true) {
        auto at = text.find(open, search);
        if (at == std::string_view::npos) return std::nullopt;
        auto body = at + open.size();
        search = body;
        // The tag must end here: ```ts must not match ```tsx.
        if (body < text.size() && !std::isspace(static_cast<unsigned char>(text[body]))) continue;
        bool inline_block = true;
        if (text.compare(body, 2, "\r\n") == 0) {
            body += 2;
            inline_block = false;
        } else if (body < text.size() && text[body] == '\n') {
            body += 1;
            inline_block = false;
        } else {
            while (body < text.size() && (text[body] == ' ' || text[body] == '\t')) ++body;
        }
        auto close = text.find("```", body);
        if (close == std::string_view::npos) close = text.size();
        std::string content(text.substr(body, close - body));
        if (inline_block) {
            while (!content.empty() && std::isspace(static_cast<unsigned char>(content.back()))) content.pop_back();
        } else {
            if (!content.empty() && content.back() == '\n') content.pop_back();
            if (!content.empty() && content.back() == '\r') content.pop_back();
        }
        return content;
    }
}

std::variant<ParsedAnswer, Violation> parse_answer(std::string_view text, const TypeSchema& answer_schema)
{
    auto block = extract_block(text, "json");
    if (!block) {
        return Violation{Violation::Kind::NoJsonBlock, "no ```json code block in the response", {}};
    }
    auto decoded = Json::parse(*block, nullptr, false);
    if (decoded.is_discarded()) {
        return Violation{Violation::Kind::NoJsonBlock, "the ```json code block is not valid JSON", {}};
    }
    if (!decoded.is_object() || !decoded.contains("answer")) {
        return Violation{Violation::Kind::MissingAnswerField, "the JSON object has no 'answer' field", {}};
    }
    ParsedAnswer parsed;
    parsed.value = decoded.at("answer");
    if (auto it = decoded.find("reason"); it != decoded.end()) {
        parsed.reason = it->is_string() ? it->get<std::string>() : it->dump();
    }
    auto report = validate(answer_schema, parsed.value, "answer");
    if (!report.ok) {
        std::string detail = "at " + report.path + ": expected " + report.expected + ", found " + report.found;
        return Violation{Violation::Kind::TypeMismatch, std::move(detail), std::move(report)};
    }
    return parsed;
}

} // namespace askit
