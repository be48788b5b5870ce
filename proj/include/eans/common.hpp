#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

namespace eans {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

/// Errors caused by user input (bad config, bad data, mismatched
/// checkpoint). The CLI maps these to exit status 1; anything else is an
/// internal error (exit status 2).
class UserError : public std::runtime_error {
 public:
  UserError(std::string_view module, const std::string& what)
      : std::runtime_error("[" + std::string(module) + "] " + what),
        module_(module) {}
  const std::string& module() const noexcept { return module_; }

 private:
  std::string module_;
};

class DataError : public UserError {
 public:
  explicit DataError(const std::string& what) : UserError("dataset", what) {}
};

class ConfigError : public UserError {
 public:
  explicit ConfigError(const std::string& what) : UserError("config", what) {}
};

class CheckpointError : public UserError {
 public:
  explicit CheckpointError(const std::string& what)
      : UserError("checkpoint", what) {}
};

/// Raised when training produces a non-finite value.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// --- numerics -------------------------------------------------------------

/// log(1 + exp(x)) without overflow for large |x|.
inline double softplus(double x) {
  if (x > 0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// log(sigmoid(x)) == -softplus(-x).
inline double log_sigmoid(double x) { return -softplus(-x); }

inline double sign0(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

// --- seeding --------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a, used for stream names and config digests.
inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) out[i] = digits[v & 0xf];
  return out;
}

using Rng = std::mt19937_64;

/// Independent generator for a named stream under a root seed. The optional
/// counter (usually the training step) lets every step own its own stream,
/// so a resumed run draws exactly what an uninterrupted run would.
inline Rng make_stream(std::uint64_t root_seed, std::string_view name,
                       std::uint64_t counter = 0) {
  std::uint64_t s = splitmix64(root_seed ^ splitmix64(fnv1a(name)));
  s = splitmix64(s ^ splitmix64(counter + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(s),
                    static_cast<std::uint32_t>(s >> 32)};
  return Rng(seq);
}

}  // namespace eans
