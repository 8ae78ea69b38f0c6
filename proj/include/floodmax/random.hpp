#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace floodmax {

// Tags for the substream derivation scheme. Every random stream in a run is
// derived from the master seed plus a path of (tag, index) words, so any one
// component (a chain, a fold, a bootstrap replicate) can be replayed alone.
enum class StreamTag : std::uint32_t {
  chain = 1,
  cell = 2,
  fold = 3,
  bootstrap = 4,
  synthetic = 5,
  predict = 6,
  init = 7,
};

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed = 1) : engine_(seed), seed_(seed) {}

  // seed = first two words of std::seed_seq{master_lo, master_hi, path...}.
  static RandomStream derive(std::uint64_t master, std::initializer_list<std::uint64_t> path);

  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  // Standard normal (Marsaglia polar method).
  double normal();
  double normal(double mean, double sd) { return mean + sd * normal(); }
  double exponential(double rate);
  std::uint64_t next_u64() { return engine_(); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::mt19937_64 engine_;
  std::uint64_t seed_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// FNV-1a, 64 bit. Used for config hashes, fold checksums and keyed substreams.
std::uint64_t fnv1a(const void* data, std::size_t size, std::uint64_t h = 0xcbf29ce484222325ULL);

inline std::uint64_t tag(StreamTag t) { return static_cast<std::uint64_t>(t); }

}  // namespace floodmax
