#include "ersc/occupation.hpp"

#include <algorithm>
#include <cmath>

namespace ersc {

OccupationHistogram::OccupationHistogram(Grid grid, int aux_bins, double aux_max)
    : grid_(std::move(grid)), aux_bins_(aux_bins), aux_max_(aux_max) {
  if (aux_bins_ < 0) throw ConfigError("auxiliary bin count must be nonnegative");
  const std::size_t per_state = aux_bins_ > 0 ? static_cast<std::size_t>(aux_bins_) : 1;
  weight_.assign(static_cast<std::size_t>(grid_.size()) * per_state, 0.0);
}

std::int64_t OccupationHistogram::state_bin(const Vector& xhat) const {
  std::vector<int> multi(grid_.d);
  for (int a = 0; a < grid_.d; ++a) {
    const int i = static_cast<int>(std::lround((xhat[a] + grid_.extent[a]) / grid_.h));
    multi[a] = std::clamp(i, 0, grid_.npts[a] - 1);
  }
  return grid_.index_of(multi);
}

void OccupationHistogram::deposit(const Vector& xhat, double dt) { deposit(xhat, 0.0, dt); }

void OccupationHistogram::deposit(const Vector& xhat, double aux, double dt) {
  if (dt < 0.0) throw ConfigError("negative time weight");
  if (dt == 0.0) return;
  const std::size_t per_state = aux_bins_ > 0 ? static_cast<std::size_t>(aux_bins_) : 1;
  std::size_t aux_bin = 0;
  if (aux_bins_ > 0) {
    const double pos = std::max(aux, 0.0) / aux_max_ * aux_bins_;
    aux_bin = static_cast<std::size_t>(std::clamp<long>(static_cast<long>(pos), 0, aux_bins_ - 1));
  }
  weight_[static_cast<std::size_t>(state_bin(xhat)) * per_state + aux_bin] += dt;
  total_.add(dt);
}

double OccupationHistogram::total_time() const { return total_.value(); }

std::vector<double> OccupationHistogram::state_marginal() const {
  const std::size_t per_state = aux_bins_ > 0 ? static_cast<std::size_t>(aux_bins_) : 1;
  std::vector<double> out(static_cast<std::size_t>(grid_.size()), 0.0);
  for (std::size_t s = 0; s < out.size(); ++s) {
    for (std::size_t a = 0; a < per_state; ++a) out[s] += weight_[s * per_state + a];
  }
  return out;
}

std::vector<double> OccupationHistogram::aux_marginal() const {
  if (aux_bins_ == 0) return {};
  std::vector<double> out(static_cast<std::size_t>(aux_bins_), 0.0);
  const std::size_t per_state = static_cast<std::size_t>(aux_bins_);
  for (std::size_t s = 0; s < static_cast<std::size_t>(grid_.size()); ++s) {
    for (std::size_t a = 0; a < per_state; ++a) out[a] += weight_[s * per_state + a];
  }
  return out;
}

std::vector<double> OccupationHistogram::axis_marginal(int axis) const {
  std::vector<double> out(static_cast<std::size_t>(grid_.npts[axis]), 0.0);
  const std::vector<double> state = state_marginal();
  for (std::int64_t idx = 0; idx < grid_.size(); ++idx) {
    out[static_cast<std::size_t>(grid_.multi_of(idx)[axis])] += state[static_cast<std::size_t>(idx)];
  }
  return out;
}

double OccupationHistogram::weight_at(std::int64_t state_bin_idx, int aux_bin) const {
  const std::size_t per_state = aux_bins_ > 0 ? static_cast<std::size_t>(aux_bins_) : 1;
  return weight_[static_cast<std::size_t>(state_bin_idx) * per_state + aux_bin];
}

}  // namespace ersc
