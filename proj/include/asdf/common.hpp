#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace asdf {

// Error taxonomy. Everything user-facing derives from Error so the CLI can
// catch one type and print the message.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class NumericsError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class UnsupportedOperation : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Number of worker threads for parallel sections. Defaults to the hardware
// count; ASDF_THREADS overrides it (ASDF_THREADS=1 forces serial execution).
int worker_count();

// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per
// worker. Deterministic as long as fn writes only to per-index slots.
void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& fn);

// splitmix64 step; used to derive child RNG seeds from a path of integers.
std::uint64_t hash_mix(std::uint64_t state, std::uint64_t value);

// FNV-1a over bytes. Deterministic across platforms (unlike std::hash).
inline std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t h = 0xcbf29ce484222325ULL) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace asdf
