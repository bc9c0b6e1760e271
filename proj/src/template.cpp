#include "askit/template.hpp"

#include <algorithm>
#include <set>

#include "askit/typeschema.hpp"

namespace askit {

PromptTemplate PromptTemplate::parse(std::string_view text)
{
    PromptTemplate tpl;
    tpl.raw_ = std::string(text);
    std::string literal;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (text.compare(pos, 2, "}}") == 0) {
            throw TemplateError(TemplateError::Kind::MalformedPlaceholder,
                                "unmatched '}}' at offset " + std::to_string(pos));
        }
        if (text.compare(pos, 2, "{{") != 0) {
            literal += text[pos++];
            continue;
        }
        auto close = text.find("}}", pos + 2);
        auto nested = text.find("{{", pos + 2);
        if (close == std::string_view::npos || (nested != std::string_view::npos && nested < close)) {
            throw TemplateError(TemplateError::Kind::MalformedPlaceholder,
                                "unmatched '{{' at offset " + std::to_string(pos));
        }
        std::string name(text.substr(pos + 2, close - pos - 2));
        if (!is_identifier(name)) {
            throw TemplateError(TemplateError::Kind::InvalidIdentifier,
                                "placeholder '{{" + name + "}}' is not a valid identifier");
        }
        if (!literal.empty()) {
            tpl.segments_.emplace_back(Literal{std::move(literal)});
            literal.clear();
        }
        if (std::find(tpl.params_.begin(), tpl.params_.end(), name) == tpl.params_.end()) {
            tpl.params_.push_back(name);
        }
        tpl.segments_.emplace_back(Placeholder{std::move(name)});
        pos = close + 2;
    }
    if (!literal.empty()) tpl.segments_.emplace_back(Literal{std::move(literal)});
    return tpl;
}

std::string PromptTemplate::to_string() const
{
    std::string out;
    for (const auto& seg : segments_) {
        if (const auto* lit = std::get_if<Literal>(&seg)) {
            out += lit->text;
        } else {
            out += "{{" + std::get<Placeholder>(seg).name + "}}";
        }
    }
    return out;
}

std::string substitute_comment(const PromptTemplate& tpl)
{
    std::string out;
    for (const auto& seg : tpl.segments()) {
        if (const auto* lit = std::get_if<PromptTemplate::Literal>(&seg)) {
            out += lit->text;
        } else {
            out += "'" + std::get<PromptTemplate::Placeholder>(seg).name + "'";
        }
    }
    return out;
}

std::string compact_json(const Json& value) { return value.dump(); }

std::string spaced_json(const Json& value)
{
    if (value.is_array()) {
        std::string out = "[";
        for (std::size_t i = 0; i < value.size(); ++i) {
            if (i) out += ", ";
            out += spaced_json(value[i]);
        }
        return out + "]";
    }
    if (value.is_object()) {
        std::string out = "{";
        bool first = true;
        for (const auto& [k, v] : value.items()) {
            if (!first) out += ", ";
            first = false;
            out += Json(k).dump() + ": " + spaced_json(v);
        }
        return out + "}";
    }
    return value.dump();
}

namespace {

void check_keys(const PromptTemplate& tpl, const ArgBinding& args, bool require_all)
{
    if (!args.is_object() && !args.is_null()) {
        throw TemplateError(TemplateError::Kind::UnknownParameter, "arguments must be a JSON object");
    }
    if (args.is_object()) {
        for (const auto& [key, _] : args.items()) {
            const auto& ps = tpl.params();
            if (std::find(ps.begin(), ps.end(), key) == ps.end()) {
                throw TemplateError(TemplateError::Kind::UnknownParameter,
                                    "argument '" + key + "' does not appear in the template");
            }
        }
    }
    if (require_all) {
        for (const auto& p : tpl.params()) {
            if (!args.is_object() || !args.contains(p)) {
                throw TemplateError(TemplateError::Kind::UnboundParameter, "parameter '" + p + "' is not bound");
            }
        }
    }
}

std::string with_where_clause(const PromptTemplate& tpl, const ArgBinding& args)
{
    std::string out = substitute_comment(tpl);
    std::string where;
    for (const auto& p : tpl.params()) {
        if (!args.is_object() || !args.contains(p)) continue;
        where += where.empty() ? "\nwhere " : ", ";
        where += "'" + p + "' = " + compact_json(args.at(p));
    }
    return out + where;
}

} // namespace

std::string substitute_direct(const PromptTemplate& tpl, const ArgBinding& args)
{
    check_keys(tpl, args, true);
    return with_where_clause(tpl, args);
}

std::string substitute_partial(const PromptTemplate& tpl, const ArgBinding& args)
{
    check_keys(tpl, args, false);
    return with_where_clause(tpl, args);
}

} // namespace askit
