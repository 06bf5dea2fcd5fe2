#ifndef HPDNET_KV_HPP
#define HPDNET_KV_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hpdnet/errors.hpp"

namespace hpdnet {

// One `key = value` line of a text config, manifest or scene description.
struct KvEntry {
    std::string key;
    std::string value;
    int line = 0;
};

// Parses `key = value` lines; '#' starts a comment, blank lines are skipped.
// Malformed lines raise ConfigError with the line number.
std::vector<KvEntry> parse_kv(std::istream& in);
std::vector<KvEntry> parse_kv_file(const std::string& path);

// Typed value parsers; reject trailing garbage and out-of-range input.
long long kv_int(const KvEntry& e);
double kv_double(const KvEntry& e);
std::uint64_t kv_u64(const KvEntry& e);

// Whitespace-separated list of reals.
std::vector<double> kv_doubles(const KvEntry& e);

// Shortest decimal string that round-trips the value, so identical runs
// write byte-identical text artifacts.
std::string kv_format(double x);

}  // namespace hpdnet

#endif  // HPDNET_KV_HPP
