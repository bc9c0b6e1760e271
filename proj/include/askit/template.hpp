#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "askit/error.hpp"

namespace askit {

/// Arguments bound to template parameters, keyed by identifier.
using ArgBinding = Json;

class TemplateError : public Error {
public:
    enum class Kind { MalformedPlaceholder, InvalidIdentifier, UnboundParameter, UnknownParameter };

    TemplateError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
    Kind kind() const noexcept { return kind_; }

private:
    Kind kind_;
};

/// A prompt template such as `List {{n}} classic books on {{subject}}.`
class PromptTemplate {
public:
    struct Literal {
        std::string text;
    };
    struct Placeholder {
        std::string name;
    };
    using Segment = std::variant<Literal, Placeholder>;

    /// Throws TemplateError (MalformedPlaceholder, InvalidIdentifier).
    static PromptTemplate parse(std::string_view text);

    const std::string& raw() const noexcept { return raw_; }
    const std::vector<Segment>& segments() const noexcept { return segments_; }
    /// Unique placeholder names in first-occurrence order.
    const std::vector<std::string>& params() const noexcept { return params_; }

    /// Re-renders segments with `{{name}}` placeholders.
    std::string to_string() const;

private:
    std::string raw_;
    std::vector<Segment> segments_;
    std::vector<std::string> params_;
};

/// Task text with `{{x}}` replaced by `'x'`, followed by
/// `\nwhere 'p1' = <json>, 'p2' = <json>` in params order.
/// `args` must bind exactly the template params.
std::string substitute_direct(const PromptTemplate& tpl, const ArgBinding& args);

/// Like substitute_direct, but params missing from `args` are left out of the
/// where-clause instead of raising. Unknown keys still raise.
std::string substitute_partial(const PromptTemplate& tpl, const ArgBinding& args);

/// Template text with placeholders reduced to quoted names; no where-clause.
std::string substitute_comment(const PromptTemplate& tpl);

/// Compact canonical JSON (`[3,1,2]`, `"text"`).
std::string compact_json(const Json& value);

/// JSON with `": "` and `", "` separators (`{"n": 3}`), used in code comments.
std::string spaced_json(const Json& value);

} // namespace askit
