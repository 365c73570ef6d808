#ifndef DMIA_RNG_H_
#define DMIA_RNG_H_

#include <cstdint>
#include <random>

namespace dmia {

// A reproducible random stream identified by (seed, stream id). Child
// streams are derived by hashing, so every task of an experiment can own an
// independent stream regardless of the order tasks execute in.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // Independent stream keyed by `key`; does not advance this stream.
  RngStream child(std::uint64_t key) const;
  RngStream child(std::uint64_t key_a, std::uint64_t key_b) const;

  std::uint64_t next_u64() { return engine_(); }
  // Uniform in [0, 1).
  double uniform();
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  using result_type = std::uint64_t;
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

std::uint64_t mix64(std::uint64_t x);

}  // namespace dmia

#endif  // DMIA_RNG_H_
