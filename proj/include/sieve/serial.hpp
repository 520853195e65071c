#ifndef SIEVE_SERIAL_HPP
#define SIEVE_SERIAL_HPP

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sieve/errors.hpp"

namespace sieve {

// Doubles are serialized as C hex-float literals: round-trips are bit exact
// and the text is stable across runs, which the file formats rely on.
inline std::string hex_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", v);
    return buf;
}

inline double parse_double(const std::string& s) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    if (end == begin) throw DataError("not a number: '" + s + "'");
    return v;
}

inline long long parse_int(const std::string& s) {
    const char* begin = s.c_str();
    char* end = nullptr;
    long long v = std::strtoll(begin, &end, 10);
    if (end == begin) throw DataError("not an integer: '" + s + "'");
    return v;
}

// Line-oriented reader for the versioned flat-file formats.
class LineReader {
public:
    explicit LineReader(std::istream& in, std::string context)
        : in_(in), context_(std::move(context)) {}

    std::string next() {
        std::string line;
        if (!std::getline(in_, line)) throw DataError(context_ + ": unexpected end of file");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        ++line_no_;
        return line;
    }

    // splits the next line on spaces and checks the leading tag
    std::vector<std::string> record(const std::string& tag) {
        std::vector<std::string> parts = split(next());
        if (parts.empty() || parts[0] != tag)
            throw DataError(context_ + " line " + std::to_string(line_no_) + ": expected '" +
                            tag + "'");
        return parts;
    }

    void expect(const std::string& literal) {
        if (next() != literal)
            throw DataError(context_ + " line " + std::to_string(line_no_) + ": expected '" +
                            literal + "'");
    }

    static std::vector<std::string> split(const std::string& line) {
        std::vector<std::string> out;
        std::istringstream ss(line);
        std::string tok;
        while (ss >> tok) out.push_back(tok);
        return out;
    }

private:
    std::istream& in_;
    std::string context_;
    int line_no_ = 0;
};

// FNV-1a, used for manifest digests of configs and artifacts.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t digest_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read file for digest: " + path);
    std::uint64_t h = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
        h = fnv1a(buf, static_cast<std::size_t>(in.gcount()), h);
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace sieve

#endif  // SIEVE_SERIAL_HPP
