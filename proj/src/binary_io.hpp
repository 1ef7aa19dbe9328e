#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>
#include <vector>

#include "labharm/error.hpp"

namespace labharm::binary {

template <typename T>
    requires std::is_trivially_copyable_v<T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

inline void put_string(std::ostream& out, const std::string& s) {
    put<std::uint64_t>(out, s.size());
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

template <typename T>
    requires std::is_trivially_copyable_v<T>
void put_vector(std::ostream& out, const std::vector<T>& v) {
    put<std::uint64_t>(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(T)));
}

template <typename T>
    requires std::is_trivially_copyable_v<T>
T get(std::istream& in) {
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ParseError("truncated snapshot");
    return v;
}

inline std::string get_string(std::istream& in) {
    const auto n = get<std::uint64_t>(in);
    if (n > (1ULL << 32)) throw ParseError("corrupt snapshot string length");
    std::string s(n, '\0');
    if (!in.read(s.data(), static_cast<std::streamsize>(n))) throw ParseError("truncated snapshot");
    return s;
}

template <typename T>
    requires std::is_trivially_copyable_v<T>
std::vector<T> get_vector(std::istream& in) {
    const auto n = get<std::uint64_t>(in);
    if (n > (1ULL << 34) / sizeof(T)) throw ParseError("corrupt snapshot vector length");
    std::vector<T> v(n);
    if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)))) {
        throw ParseError("truncated snapshot");
    }
    return v;
}

}  // namespace labharm::binary
