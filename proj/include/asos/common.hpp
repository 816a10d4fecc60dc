#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace asos {

inline constexpr const char* kVersion = "0.1.0";

/// Bad or inconsistent configuration values. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Missing, malformed or out-of-contract input data. CLI exit code 3.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Non-finite losses, divergence, failed numeric invariants. CLI exit code 4.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Derive an independent stream seed from a master seed and a stream tag
/// (splitmix64 finalizer). Keeps the shuffle, init and augmentation streams
/// decoupled so adding draws to one does not shift the others.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace asos
