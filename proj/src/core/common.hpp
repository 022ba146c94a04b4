#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace meev {

// Error classes mirror the exit-status partition of the CLI and the
// status codes of the C API.
enum class Status : int {
  ok = 0,
  invalid_argument = 1,
  config_error = 2,
  data_error = 3,
  runtime_error = 4,
  version_error = 5,
};

class Error : public std::runtime_error {
 public:
  Error(Status status, const std::string& message)
      : std::runtime_error(message), status_(status) {}
  Status status() const { return status_; }

 private:
  Status status_;
};

namespace detail {
inline void append_all(std::ostringstream&) {}
template <typename T, typename... Rest>
void append_all(std::ostringstream& os, const T& head, const Rest&... rest) {
  os << head;
  append_all(os, rest...);
}
}  // namespace detail

template <typename... Parts>
std::string concat(const Parts&... parts) {
  std::ostringstream os;
  detail::append_all(os, parts...);
  return os.str();
}

template <typename... Parts>
[[noreturn]] void fail(Status status, const Parts&... parts) {
  throw Error(status, concat(parts...));
}

template <typename... Parts>
void check(bool condition, Status status, const Parts&... parts) {
  if (!condition) fail(status, parts...);
}

template <typename... Parts>
void check_arg(bool condition, const Parts&... parts) {
  check(condition, Status::invalid_argument, parts...);
}

// Deterministic RNG. splitmix64 core with hand-rolled distributions so
// sequences are identical across compilers and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed + 0x9e3779b97f4a7c15ull) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // inclusive bounds, rejection sampled
  int uniform_int(int lo, int hi) {
    check_arg(hi >= lo, "uniform_int: hi < lo");
    std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    std::uint64_t limit = ~0ull - (~0ull % range);
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return lo + static_cast<int>(v % range);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Derive an independent stream id from a base seed and counters; used to
  // give every (epoch, sample) pair its own reproducible generator.
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b,
                           std::uint64_t c = 0) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1) +
                      0xbf58476d1ce4e5b9ull * (c + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

}  // namespace meev
