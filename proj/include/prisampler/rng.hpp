#ifndef PRISAMPLER_RNG_HPP
#define PRISAMPLER_RNG_HPP

#include <cstdint>
#include <Eigen/Dense>

namespace prisampler {

// Seeded, splittable random stream. The generator is xoshiro256++ keyed by
// (seed, stream_id) through splitmix64, so the same pair reproduces the same
// draw sequence on any platform, and distinct stream_ids give statistically
// independent streams. All floating-point draws are built from the raw 64-bit
// output (never through std::*_distribution, whose algorithms are
// implementation-defined).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Derives an independent child stream; split(i) != split(j) for i != j.
  RngStream split(std::uint64_t child_id) const;

  std::uint64_t next_u64();

  // Uniform on [0, 1) with 53-bit resolution.
  double uniform();

  // Uniform integer on [lo, hi] inclusive, by rejection (unbiased).
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  // Standard normal via Box-Muller; the spare value is cached, so draws come
  // in deterministic pairs.
  double normal();

  Eigen::VectorXd normal_vector(int n);
  Eigen::MatrixXd normal_matrix(int rows, int cols);

  // In-place Fisher-Yates shuffle of {0, ..., n-1} index vectors and friends.
  template <typename Container>
  void shuffle(Container& items) {
    for (std::int64_t i = static_cast<std::int64_t>(items.size()) - 1; i > 0; --i) {
      const std::int64_t j = uniform_int(0, i);
      std::swap(items[i], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_[4];
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace prisampler

#endif  // PRISAMPLER_RNG_HPP
