#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace offgrid {

// Error taxonomy drives the CLI exit codes: bad inputs -> 2, numerical
// breakdown (singular systems, non-convergence, violated embeddings) -> 3.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitNumerical = 3;

// Deterministic RNG. mt19937_64 is pinned by the standard; the double
// conversion and the distributions are hand-rolled so streams are
// bit-identical across platforms/libstdc++ versions (std::*_distribution
// implementations are not specified).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // uniform on [0,1) with 53-bit resolution
  double uniform01() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform01(); }

  double normal();                                   // Box-Muller, cached spare
  double cauchy(double scale);                       // scale * tan(pi(u-1/2))
  int categorical(const std::vector<double>& w);     // CDF inversion, w sums to ~1

 private:
  std::mt19937_64 eng_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Thread budget: OFFGRID_THREADS caps the pool, defaults to the hardware
// concurrency. Always >= 1.
int thread_count();

// Runs fn(chunk_index, lo, hi) over [0,n) split into a *fixed* number of
// chunks (independent of the thread budget) so per-chunk reductions combine
// in a deterministic order no matter how many workers execute them.
inline constexpr int kParallelChunks = 64;
void parallel_for_chunks(std::int64_t n,
                         const std::function<void(int, std::int64_t, std::int64_t)>& fn);

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_file_hex(const std::string& path);

}  // namespace offgrid
