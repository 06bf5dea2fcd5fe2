#include "hpdnet/kv.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <sstream>

namespace hpdnet {

namespace {

std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

}  // namespace

std::vector<KvEntry> parse_kv(std::istream& in) {
    std::vector<KvEntry> out;
    std::string raw;
    int line = 0;
    while (std::getline(in, raw)) {
        ++line;
        const std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw.erase(hash);
        const std::string text = trim(raw);
        if (text.empty()) continue;
        const std::size_t eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError("expected `key = value`, got \"" + text + "\"", line);
        KvEntry e;
        e.key = trim(text.substr(0, eq));
        e.value = trim(text.substr(eq + 1));
        e.line = line;
        if (e.key.empty()) throw ConfigError("empty key", line);
        out.push_back(std::move(e));
    }
    return out;
}

std::vector<KvEntry> parse_kv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path + " for reading");
    return parse_kv(in);
}

long long kv_int(const KvEntry& e) {
    try {
        std::size_t used = 0;
        const long long v = std::stoll(e.value, &used);
        if (used != e.value.size())
            throw ConfigError(e.key + ": trailing characters in \"" + e.value + "\"", e.line);
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError(e.key + ": not an integer: \"" + e.value + "\"", e.line);
    }
}

double kv_double(const KvEntry& e) {
    try {
        std::size_t used = 0;
        const double v = std::stod(e.value, &used);
        if (used != e.value.size())
            throw ConfigError(e.key + ": trailing characters in \"" + e.value + "\"", e.line);
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError(e.key + ": not a number: \"" + e.value + "\"", e.line);
    }
}

std::uint64_t kv_u64(const KvEntry& e) {
    try {
        std::size_t used = 0;
        const unsigned long long v = std::stoull(e.value, &used);
        if (used != e.value.size())
            throw ConfigError(e.key + ": trailing characters in \"" + e.value + "\"", e.line);
        return v;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError(e.key + ": not an unsigned integer: \"" + e.value + "\"", e.line);
    }
}

std::vector<double> kv_doubles(const KvEntry& e) {
    std::istringstream in(e.value);
    std::vector<double> out;
    std::string tok;
    while (in >> tok) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw ConfigError(e.key + ": not a number: \"" + tok + "\"", e.line);
        }
    }
    return out;
}

std::string kv_format(double x) {
    std::array<char, 32> buf{};
    const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    return std::string(buf.data(), end);
}

}  // namespace hpdnet
