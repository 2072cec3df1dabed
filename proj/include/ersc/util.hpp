#ifndef ERSC_UTIL_HPP
#define ERSC_UTIL_HPP

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace ersc {

/// Configuration / input problems. CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Iterative solver failed to reach its tolerance. CLI exit code 3.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Filesystem problems. CLI exit code 4.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Compensated accumulator. Long cost/entropy integrals must not drift:
/// constant-tilt entropy totals are compared against closed forms at 1e-12.
class KahanSum {
 public:
  void add(double x) {
    const double y = x - c_;
    const double t = s_ + y;
    c_ = (t - s_) - y;
    s_ = t;
  }
  double value() const { return s_; }

 private:
  double s_ = 0.0;
  double c_ = 0.0;
};

/// Deterministic parallel map over [0, n): results depend only on the index,
/// never on the thread layout.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body) {
  unsigned hw = std::thread::hardware_concurrency();
  if (hw < 2 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  const unsigned workers = hw < n ? hw : static_cast<unsigned>(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      for (std::size_t i = w; i < n; i += workers) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

/// Shortest decimal form that round-trips a double (17 significant digits).
std::string format_g17(double x);

}  // namespace ersc

#endif  // ERSC_UTIL_HPP
