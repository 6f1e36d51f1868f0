#pragma once

// Shared utilities: error taxonomy, deterministic RNG, hashing.

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace csd {

// Error taxonomy. The CLI maps these onto process exit codes:
// validation/io -> 2, numeric -> 3, prerequisite -> 4.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct validation_error : error {
  using error::error;
};
struct io_error : error {
  using error::error;
};
struct numeric_error : error {
  using error::error;
};
struct prerequisite_error : error {
  using error::error;
};

// Deterministic RNG. The generator is std::mt19937_64 (sequence pinned by the
// standard); the uniform/normal transforms are fixed here instead of using
// std::*_distribution, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

  // Box-Muller, two draws per sample. No cached spare so the stream state is
  // exactly the generator state.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_index(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  std::string save_state() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }

  void load_state(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
    if (!is) throw validation_error("Rng: malformed serialized state");
  }

  // Derive an independent stream for a named purpose.
  Rng fork(const std::string& tag) const;

 private:
  std::mt19937_64 gen_;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

inline Rng Rng::fork(const std::string& tag) const {
  Rng copy = *this;
  std::uint64_t base = copy.next_u64();
  return Rng(base ^ fnv1a64(tag));
}

}  // namespace csd
