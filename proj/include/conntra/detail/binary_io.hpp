#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "conntra/errors.hpp"

namespace conntra::detail {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

template <class T>
void write_le(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

/// Reads one little-endian value; `offset` tracks the byte position for error messages.
template <class T>
T read_le(std::istream& in, std::uint64_t& offset, const char* what) {
    T value{};
    in.read(reinterpret_cast<char*>(&value), sizeof(T));
    if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
        throw FormatError("truncated " + std::string(what) + " at byte offset " +
                          std::to_string(offset + static_cast<std::uint64_t>(in.gcount())));
    }
    offset += sizeof(T);
    return value;
}

inline void expect_magic(std::istream& in, const char (&magic)[9], std::uint64_t& offset) {
    char buf[8] = {};
    in.read(buf, 8);
    if (in.gcount() != 8 || std::memcmp(buf, magic, 8) != 0) {
        throw FormatError(std::string("bad magic at byte offset 0, expected ") + magic);
    }
    offset += 8;
}

} // namespace conntra::detail
