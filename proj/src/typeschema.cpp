#include "askit/typeschema.hpp"

#include <cctype>
#include <cmath>
#include <set>

namespace askit {

bool is_identifier(std::string_view name) noexcept
{
    if (name.empty()) return false;
    auto head = static_cast<unsigned char>(name.front());
    if (!(std::isalpha(head) || head == '_')) return false;
    for (char c : name) {
        auto u = static_cast<unsigned char>(c);
        if (!(std::isalnum(u) || u == '_')) return false;
    }
    return true;
}

TypeSchema TypeSchema::integer() { return TypeSchema(Kind::Integer); }
TypeSchema TypeSchema::floating() { return TypeSchema(Kind::Float); }
TypeSchema TypeSchema::boolean() { return TypeSchema(Kind::Boolean); }
TypeSchema TypeSchema::text() { return TypeSchema(Kind::Text); }

TypeSchema TypeSchema::literal(Json value)
{
    if (!(value.is_number() || value.is_boolean() || value.is_string())) {
        throw SchemaError("literal value must be a number, boolean or string, got " + describe_value(value));
    }
    TypeSchema s(Kind::Literal);
    s.literal_ = std::move(value);
    return s;
}

TypeSchema TypeSchema::list(TypeSchema element)
{
    TypeSchema s(Kind::List);
    s.element_ = std::make_shared<const TypeSchema>(std::move(element));
    return s;
}

TypeSchema TypeSchema::record(std::vector<std::pair<std::string, TypeSchema>> fields)
{
    std::set<std::string> seen;
    std::vector<Field> out;
    out.reserve(fields.size());
    for (auto& [name, schema] : fields) {
        if (!is_identifier(name)) throw SchemaError("invalid record field name '" + name + "'");
        if (!seen.insert(name).second) throw SchemaError("duplicate record field '" + name + "'");
        out.push_back(Field{name, std::make_shared<const TypeSchema>(std::move(schema))});
    }
    TypeSchema s(Kind::Record);
    s.fields_ = std::make_shared<const std::vector<Field>>(std::move(out));
    return s;
}

TypeSchema TypeSchema::union_of(std::vector<TypeSchema> members)
{
    if (members.size() < 2) throw SchemaError("union needs at least two members");
    TypeSchema s(Kind::Union);
    s.members_ = std::make_shared<const std::vector<TypeSchema>>(std::move(members));
    return s;
}

const Json& TypeSchema::literal_value() const
{
    if (kind_ != Kind::Literal) throw SchemaError("not a literal schema");
    return literal_;
}

const TypeSchema& TypeSchema::element() const
{
    if (kind_ != Kind::List) throw SchemaError("not a list schema");
    return *element_;
}

const std::vector<Field>& TypeSchema::fields() const
{
    if (kind_ != Kind::Record) throw SchemaError("not a record schema");
    return *fields_;
}

const std::vector<TypeSchema>& TypeSchema::members() const
{
    if (kind_ != Kind::Union) throw SchemaError("not a union schema");
    return *members_;
}

bool operator==(const TypeSchema& a, const TypeSchema& b)
{
    if (a.kind_ != b.kind_) return false;
    switch (a.kind_) {
    case TypeSchema::Kind::Literal:
        return a.literal_ == b.literal_ && a.literal_.is_number_float() == b.literal_.is_number_float() &&
               a.literal_.is_boolean() == b.literal_.is_boolean();
    case TypeSchema::Kind::List:
        return *a.element_ == *b.element_;
    case TypeSchema::Kind::Record: {
        const auto& fa = *a.fields_;
        const auto& fb = *b.fields_;
        if (fa.size() != fb.size()) return false;
        for (std::size_t i = 0; i < fa.size(); ++i) {
            if (fa[i].name != fb[i].name || !(*fa[i].schema == *fb[i].schema)) return false;
        }
        return true;
    }
    case TypeSchema::Kind::Union:
        return *a.members_ == *b.members_;
    default:
        return true;
    }
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

std::string quote_single(std::string_view s)
{
    std::string out = "'";
    for (char c : s) {
        if (c == '\'' || c == '\\') out += '\\';
        out += c;
    }
    out += '\'';
    return out;
}

std::string render_literal(const Json& v)
{
    if (v.is_string()) return quote_single(v.get<std::string>());
    return v.dump();
}

} // namespace

std::string render(const TypeSchema& schema)
{
    using K = TypeSchema::Kind;
    switch (schema.kind()) {
    case K::Integer:
    case K::Float:
        return "number";
    case K::Boolean:
        return "boolean";
    case K::Text:
        return "string";
    case K::Literal:
        return render_literal(schema.literal_value());
    case K::List: {
        const auto& e = schema.element();
        if (e.kind() == K::Union) return "(" + render(e) + ")[]";
        return render(e) + "[]";
    }
    case K::Record: {
        const auto& fields = schema.fields();
        if (fields.empty()) return "{}";
        std::string out = "{ ";
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) out += "; ";
            out += fields[i].name + ": " + render(*fields[i].schema);
        }
        return out + " }";
    }
    case K::Union: {
        std::string out;
        for (const auto& m : schema.members()) {
            if (!out.empty()) out += " | ";
            out += render(m);
        }
        return out;
    }
    }
    return {};
}

TypeSchema wrap_response(const TypeSchema& answer)
{
    return TypeSchema::record({{"reason", TypeSchema::text()}, {"answer", answer}});
}

// ---------------------------------------------------------------------------
// Validation

std::string describe_value(const Json& value)
{
    switch (value.type()) {
    case Json::value_t::null: return "null";
    case Json::value_t::boolean: return value.get<bool>() ? "true" : "false";
    case Json::value_t::number_integer:
    case Json::value_t::number_unsigned: return "number " + value.dump();
    case Json::value_t::number_float: {
        double d = value.get<double>();
        if (std::trunc(d) != d) return "non-integral number";
        return "number " + value.dump();
    }
    case Json::value_t::string: return "string";
    case Json::value_t::array: return "array of length " + std::to_string(value.size());
    case Json::value_t::object: return "object";
    default: return "unsupported value";
    }
}

namespace {

bool is_integral(const Json& v)
{
    if (v.is_number_integer()) return true;
    if (!v.is_number_float()) return false;
    double d = v.get<double>();
    return std::isfinite(d) && std::trunc(d) == d;
}

bool literal_matches(const Json& lit, const Json& v)
{
    if (lit.is_number()) return v.is_number() && lit == v;
    if (lit.is_boolean()) return v.is_boolean() && lit == v;
    return v.is_string() && lit == v;
}

ValidationReport type_mismatch(std::string path, std::string expected, std::string found)
{
    return ValidationReport{false, std::move(path), std::move(expected), std::move(found)};
}

ValidationReport check(const TypeSchema& schema, const Json& value, const std::string& path)
{
    using K = TypeSchema::Kind;
    switch (schema.kind()) {
    case K::Integer:
        if (value.is_number() && is_integral(value)) return {};
        return type_mismatch(path, "number (integer)", describe_value(value));
    case K::Float:
        if (value.is_number()) return {};
        return type_mismatch(path, "number", describe_value(value));
    case K::Boolean:
        if (value.is_boolean()) return {};
        return type_mismatch(path, "boolean", describe_value(value));
    case K::Text:
        if (value.is_string()) return {};
        return type_mismatch(path, "string", describe_value(value));
    case K::Literal:
        if (literal_matches(schema.literal_value(), value)) return {};
        return type_mismatch(path, render(schema), value.is_string() ? value.dump() : describe_value(value));
    case K::List: {
        if (!value.is_array()) return type_mismatch(path, render(schema), describe_value(value));
        for (std::size_t i = 0; i < value.size(); ++i) {
            auto r = check(schema.element(), value[i], path + "[" + std::to_string(i) + "]");
            if (!r.ok) return r;
        }
        return {};
    }
    case K::Record: {
        if (!value.is_object()) return type_mismatch(path, render(schema), describe_value(value));
        const auto& fields = schema.fields();
        for (const auto& f : fields) {
            auto it = value.find(f.name);
            if (it == value.end()) return type_mismatch(path + "." + f.name, render(*f.schema), "missing key");
            auto r = check(*f.schema, *it, path + "." + f.name);
            if (!r.ok) return r;
        }
        for (const auto& [key, v] : value.items()) {
            bool declared = false;
            for (const auto& f : fields) declared = declared || f.name == key;
            if (!declared) return type_mismatch(path + "." + key, "no such key", "unexpected key");
        }
        return {};
    }
    case K::Union:
        for (const auto& m : schema.members()) {
            if (check(m, value, path).ok) return {};
        }
        return type_mismatch(path, render(schema), value.is_string() ? value.dump() : describe_value(value));
    }
    return {};
}

} // namespace

ValidationReport validate(const TypeSchema& schema, const Json& value, std::string_view root)
{
    return check(schema, value, std::string(root));
}

// ---------------------------------------------------------------------------
// Constructor syntax

namespace {

class SchemaParser {
public:
    explicit SchemaParser(std::string_view text) : text_(text) {}

    TypeSchema parse_all()
    {
        auto s = parse_type();
        skip_ws();
        if (pos_ != text_.size()) fail("unexpected trailing input");
        return s;
    }

private:
    [[noreturn]] void fail(const std::string& what) const
    {
        throw SchemaError("schema syntax error at offset " + std::to_string(pos_) + ": " + what + " in '" +
                          std::string(text_) + "'");
    }

    void skip_ws()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool consume(char c)
    {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c)
    {
        if (!consume(c)) fail(std::string("expected '") + c + "'");
    }

    std::string word()
    {
        skip_ws();
        auto start = pos_;
        while (pos_ < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    std::string quoted()
    {
        skip_ws();
        if (pos_ >= text_.size() || (text_[pos_] != '\'' && text_[pos_] != '"')) fail("expected quoted string");
        char q = text_[pos_++];
        std::string out;
        while (pos_ < text_.size() && text_[pos_] != q) {
            if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) ++pos_;
            out += text_[pos_++];
        }
        if (pos_ >= text_.size()) fail("unterminated string");
        ++pos_;
        return out;
    }

    Json literal_value()
    {
        skip_ws();
        if (pos_ < text_.size() && (text_[pos_] == '\'' || text_[pos_] == '"')) return quoted();
        auto start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ')' && !std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        std::string token(text_.substr(start, pos_ - start));
        if (token == "true" || token == "True") return true;
        if (token == "false" || token == "False") return false;
        auto v = Json::parse(token, nullptr, false);
        if (v.is_discarded() || !v.is_number()) fail("bad literal '" + token + "'");
        return v;
    }

    TypeSchema parse_type()
    {
        auto name = word();
        if (name == "int") return TypeSchema::integer();
        if (name == "float") return TypeSchema::floating();
        if (name == "bool") return TypeSchema::boolean();
        if (name == "str") return TypeSchema::text();
        if (name == "literal") {
            expect('(');
            auto v = literal_value();
            expect(')');
            return TypeSchema::literal(std::move(v));
        }
        if (name == "list") {
            expect('(');
            auto e = parse_type();
            expect(')');
            return TypeSchema::list(std::move(e));
        }
        if (name == "dict") {
            expect('(');
            expect('{');
            std::vector<std::pair<std::string, TypeSchema>> fields;
            if (!consume('}')) {
                do {
                    auto key = quoted();
                    expect(':');
                    fields.emplace_back(std::move(key), parse_type());
                } while (consume(','));
                expect('}');
            }
            expect(')');
            return TypeSchema::record(std::move(fields));
        }
        if (name == "union") {
            expect('(');
            std::vector<TypeSchema> members;
            do {
                members.push_back(parse_type());
            } while (consume(','));
            expect(')');
            return TypeSchema::union_of(std::move(members));
        }
        fail(name.empty() ? "expected a type" : "unknown type '" + name + "'");
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

} // namespace

TypeSchema parse_schema(std::string_view text) { return SchemaParser(text).parse_all(); }

std::string to_constructor_text(const TypeSchema& schema)
{
    using K = TypeSchema::Kind;
    switch (schema.kind()) {
    case K::Integer: return "int";
    case K::Float: return "float";
    case K::Boolean: return "bool";
    case K::Text: return "str";
    case K::Literal: return "literal(" + render_literal(schema.literal_value()) + ")";
    case K::List: return "list(" + to_constructor_text(schema.element()) + ")";
    case K::Record: {
        std::string out = "dict({";
        bool first = true;
        for (const auto& f : schema.fields()) {
            if (!first) out += ", ";
            first = false;
            out += quote_single(f.name) + ": " + to_constructor_text(*f.schema);
        }
        return out + "})";
    }
    case K::Union: {
        std::string out = "union(";
        bool first = true;
        for (const auto& m : schema.members()) {
            if (!first) out += ", ";
            first = false;
            out += to_constructor_text(m);
        }
        return out + ")";
    }
    }
    return {};
}

} // namespace askit
