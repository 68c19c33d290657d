#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace scd {

// Error taxonomy. The CLI maps these onto its exit codes:
// usage/config/shape -> 2, data -> 3, i/o -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public UsageError {
 public:
  using UsageError::UsageError;
};

class ShapeError : public UsageError {
 public:
  using UsageError::UsageError;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline uint64_t fnv1a64(const std::string& s, uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), h);
}

// Records which rows a statistic was fitted on. Every trained component in
// the cross-validation keeps one so leakage checks can recompute and compare.
struct FitProvenance {
  uint64_t input_hash = 0;
};

// Order-independent hash of a set of string ids (sorted before hashing).
uint64_t hash_id_set(std::vector<std::string> ids);

}  // namespace scd
