#pragma once

// Per-replication random streams.
//
// A stream is a 64-bit Mersenne Twister (boost::random::mt19937_64, whose
// output is identical to std::mt19937_64) seeded with a SplitMix64 hash of
// (master_seed, replication_index). Normals come from Boost.Random's ziggurat
// normal_distribution and uniforms from boost::random::uniform_01; both are
// specified algorithms, so a stream is reproducible across platforms and
// independent of which thread consumes it.

#include "h2sls/common.hpp"

#include <boost/random/mersenne_twister.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/uniform_01.hpp>
#include <boost/version.hpp>

#include <cstdint>
#include <string>

namespace h2sls {

struct SeedPolicy {
  std::uint64_t master_seed = 0;
  std::uint64_t replication_index = 0;
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline constexpr std::uint64_t stream_seed(const SeedPolicy& s) {
  return splitmix64(splitmix64(s.master_seed) ^ splitmix64(~s.replication_index));
}

inline std::string rng_identity() {
  return "boost::random::mt19937_64(splitmix64(master,rep)); normal=boost::random::normal_distribution(ziggurat), "
         "boost " BOOST_LIB_VERSION "; uniform=boost::random::uniform_01";
}

class RandomStream {
 public:
  explicit RandomStream(const SeedPolicy& seed) : engine_(stream_seed(seed)) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }

  template <typename Derived>
  void fill_normal(Eigen::DenseBase<Derived>& out) {
    // column-major fill order
    for (Index c = 0; c < out.cols(); ++c)
      for (Index r = 0; r < out.rows(); ++r) out(r, c) = normal();
  }

 private:
  boost::random::mt19937_64 engine_;
  boost::random::normal_distribution<double> normal_{0.0, 1.0};
  boost::random::uniform_01<double> uniform_;
};

}  // namespace h2sls
