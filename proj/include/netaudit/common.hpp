#pragma once

#include <cstdint>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace netaudit {

using Bytes = std::vector<std::uint8_t>;

struct IngestError : std::runtime_error {
  enum class Kind { ToolUnavailable, DissectFailed, BadFormat };
  Kind kind;
  IngestError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct ParseError : std::runtime_error {
  enum class Kind { Truncated, Unsupported };
  Kind kind;
  ParseError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// splitmix64, used to derive independent RNG streams from (seed, index) pairs.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(seed ^ mix64(stream));
}

// Deterministic parallel map: output slot i depends only on i, so the result
// is identical for any worker count.
inline void parallel_for(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  unsigned workers = std::min<std::size_t>(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace netaudit
