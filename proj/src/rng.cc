#include "dmia/rng.h"

namespace dmia {

std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
  const std::uint64_t a = mix64(seed);
  const std::uint64_t b = mix64(stream_id ^ 0x5851f42d4c957f2dULL);
  const std::uint64_t c = mix64(a ^ mix64(b));
  // c is already a full 64-bit hash of (seed, stream id); the engine's own
  // initializer spreads it over the state.
  return std::mt19937_64(c);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

RngStream RngStream::child(std::uint64_t key) const {
  return RngStream(seed_, mix64(stream_id_ * 0x2545f4914f6cdd1dULL + mix64(key)));
}

RngStream RngStream::child(std::uint64_t key_a, std::uint64_t key_b) const {
  return child(key_a).child(key_b);
}

double RngStream::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double RngStream::normal() { return normal_(engine_); }

std::uint64_t RngStream::below(std::uint64_t n) {
  // Lemire-free rejection sampling; n is small in every caller.
  const std::uint64_t limit = max() - (max() % n);
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

}  // namespace dmia
