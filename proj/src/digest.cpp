#include "askit/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <cstdio>

#include "askit/error.hpp"

namespace askit {

std::string sha256_hex(std::string_view data)
{
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), md.data(), &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out += kHex[md[i] >> 4];
        out += kHex[md[i] & 0xF];
    }
    return out;
}

DigestBuilder& DigestBuilder::add(std::string_view part)
{
    buffer_ += std::to_string(part.size());
    buffer_ += ':';
    buffer_ += part;
    return *this;
}

} // namespace askit
