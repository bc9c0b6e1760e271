#pragma once

#include <string>
#include <string_view>

namespace askit {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

/// Feeds length-prefixed parts so that ("ab","c") and ("a","bc") differ.
class DigestBuilder {
public:
    DigestBuilder& add(std::string_view part);
    std::string hex() const { return sha256_hex(buffer_); }

private:
    std::string buffer_;
};

} // namespace askit
