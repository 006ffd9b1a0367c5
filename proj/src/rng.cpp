#include "brakesense/rng.hpp"

namespace brakesense {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

RngSeed split_rng(RngSeed seed, std::uint64_t stream_id) {
  return RngSeed{splitmix64(seed.value ^ splitmix64(stream_id + 0x632be59bd9b4e019ULL))};
}

}  // namespace brakesense
