#pragma once

#include <stdexcept>
#include <string>

#include "json.hpp"

namespace askit {

/// JSON value type used across the library. Object keys keep insertion order.
using Json = nlohmann::ordered_json;

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Textual schema could not be parsed, or a schema invariant was violated.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// I/O failure (cache directory, fixture files, task files).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace askit
