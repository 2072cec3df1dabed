#ifndef ERSC_RNG_HPP
#define ERSC_RNG_HPP

#include <cstdint>
#include <random>
#include <vector>

namespace ersc {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Stream k of a master seed. Replications and clock streams draw from
/// disjoint engines so reordering one never perturbs another.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t k) {
  std::uint64_t s = seed ^ (0xd1342543de82ef95ULL * (k + 1));
  splitmix64(s);
  return splitmix64(s);
}

/// One independent engine per event clock: families (arrival, service,
/// abandonment) x classes, 3d engines total. Tilting one clock family must
/// leave the unit exponentials of the other families untouched so that the
/// identity tilt reproduces the plain simulation event for event.
class ClockStreams {
 public:
  ClockStreams(std::uint64_t seed, int d) : d_(d) {
    engines_.reserve(3 * static_cast<std::size_t>(d));
    for (int k = 0; k < 3 * d; ++k) engines_.emplace_back(derive_seed(seed, static_cast<std::uint64_t>(k)));
  }

  /// Unit-rate exponential from the (family, class) stream.
  double exponential(int family, int cls) {
    std::exponential_distribution<double> exp1(1.0);
    return exp1(engines_[static_cast<std::size_t>(family) * d_ + cls]);
  }

 private:
  std::size_t d_;
  std::vector<std::mt19937_64> engines_;
};

}  // namespace ersc

#endif  // ERSC_RNG_HPP
