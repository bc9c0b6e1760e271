#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "askit/error.hpp"

namespace askit {

class TypeSchema;

struct Field {
    std::string name;
    std::shared_ptr<const TypeSchema> schema;
};

/// Algebraic description of an answer or parameter shape:
/// int, float, bool, str, literal, list, dict (record) and union.
///
/// Immutable value type; copies share structure.
class TypeSchema {
public:
    enum class Kind { Integer, Float, Boolean, Text, Literal, List, Record, Union };

    static TypeSchema integer();
    static TypeSchema floating();
    static TypeSchema boolean();
    static TypeSchema text();
    /// Throws SchemaError unless `value` is a JSON scalar (number, bool, string).
    static TypeSchema literal(Json value);
    static TypeSchema list(TypeSchema element);
    /// Throws SchemaError on duplicate or invalid field names.
    static TypeSchema record(std::vector<std::pair<std::string, TypeSchema>> fields);
    /// Throws SchemaError when fewer than two members are given.
    static TypeSchema union_of(std::vector<TypeSchema> members);

    Kind kind() const noexcept { return kind_; }

    const Json& literal_value() const;
    const TypeSchema& element() const;
    const std::vector<Field>& fields() const;
    const std::vector<TypeSchema>& members() const;

    friend bool operator==(const TypeSchema& a, const TypeSchema& b);

private:
    explicit TypeSchema(Kind kind) : kind_(kind) {}

    Kind kind_;
    Json literal_;
    std::shared_ptr<const TypeSchema> element_;
    std::shared_ptr<const std::vector<Field>> fields_;
    std::shared_ptr<const std::vector<TypeSchema>> members_;
};

struct ValidationReport {
    bool ok = true;
    std::string path;
    std::string expected;
    std::string found;
};

/// Renders the TypeScript type expression used inside prompts,
/// e.g. `{ title: string; year: number }[]`.
std::string render(const TypeSchema& schema);

/// The `{ reason: string; answer: T }` envelope every direct response must match.
TypeSchema wrap_response(const TypeSchema& answer);

/// Structural check of a decoded JSON value. Mismatches are reported, not thrown.
/// `root` names the value in the report path (`answer[2].year`).
ValidationReport validate(const TypeSchema& schema, const Json& value, std::string_view root = "$");

/// Short human description of a JSON value's kind for diagnostics.
std::string describe_value(const Json& value);

/// Parses the constructor syntax used in task files:
/// `int`, `float`, `bool`, `str`, `literal(123)`, `literal('yes')`, `list(T)`,
/// `dict({'x': int, 'y': int})`, `union(A, B, ...)`.
TypeSchema parse_schema(std::string_view text);

/// Inverse of parse_schema.
std::string to_constructor_text(const TypeSchema& schema);

bool is_identifier(std::string_view name) noexcept;

} // namespace askit
