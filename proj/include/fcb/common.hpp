#pragma once

#include <fmt/format.h>

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>

namespace fcb {

// Error type thrown by every validated operation in the library. Messages are
// meant to be user-facing: they name the offending quantity and, where
// possible, a remediation.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

[[noreturn]] inline void fail(const std::string& msg) { throw Error(msg); }

template <typename... Args>
[[noreturn]] void fail(fmt::format_string<Args...> f, Args&&... args) {
  throw Error(fmt::format(f, std::forward<Args>(args)...));
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) fail(msg);
}

template <typename... Args>
void require(bool cond, fmt::format_string<Args...> f, Args&&... args) {
  if (!cond) throw Error(fmt::format(f, std::forward<Args>(args)...));
}

// Worker-thread budget for data-parallel loops. Defaults to the hardware
// concurrency; the CLI overrides it from --threads.
int thread_count();
void set_thread_count(int n);

// Runs fn(begin, end) over a deterministic partition of [0, n). The partition
// depends only on n and the configured thread count, never on scheduling, so
// any reduction done per-chunk and merged in chunk order is reproducible.
void parallel_for(std::int64_t n,
                  const std::function<void(std::int64_t, std::int64_t)>& fn);

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& bytes);
std::string sha256_file(const std::string& path);

}  // namespace fcb
