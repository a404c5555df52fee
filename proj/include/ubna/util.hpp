#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ubna {

/// Lossless, locale-independent double formatting ("%.17g").
std::string format_double(double v);

/// FNV-1a 64-bit over a byte string.
std::uint64_t fnv1a(const std::string& bytes);

/// splitmix64 step; used to derive independent per-item seeds from one seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

std::vector<std::string> split(const std::string& s, char sep);

std::string trim(const std::string& s);

/// Parse helpers that throw InvalidInput with the offending text on failure.
double parse_double(const std::string& s);
long parse_long(const std::string& s);

}  // namespace ubna
