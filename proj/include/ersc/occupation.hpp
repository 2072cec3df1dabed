#ifndef ERSC_OCCUPATION_HPP
#define ERSC_OCCUPATION_HPP

#include <vector>

#include "ersc/hjb.hpp"
#include "ersc/model.hpp"
#include "ersc/util.hpp"

namespace ersc {

/// Time-weighted empirical measure of the scaled state, binned on the nodes
/// of an HJB grid so pre-limit histograms and diffusion-side integrals share
/// support. An optional auxiliary axis bins a scalar (e.g. tilt magnitude).
/// Out-of-range values are clamped to the edge bins, so the total mass is
/// exactly the elapsed time.
class OccupationHistogram {
 public:
  OccupationHistogram(Grid grid, int aux_bins = 0, double aux_max = 1.0);

  void deposit(const Vector& xhat, double dt);
  void deposit(const Vector& xhat, double aux, double dt);

  double total_time() const;
  /// Mass per state bin, auxiliary axis summed out.
  std::vector<double> state_marginal() const;
  /// Mass per auxiliary bin, state summed out (empty when aux_bins == 0).
  std::vector<double> aux_marginal() const;
  /// Mass per node index along one state axis.
  std::vector<double> axis_marginal(int axis) const;

  const Grid& grid() const { return grid_; }
  int aux_bins() const { return aux_bins_; }
  double weight_at(std::int64_t state_bin, int aux_bin = 0) const;

 private:
  std::int64_t state_bin(const Vector& xhat) const;

  Grid grid_;
  int aux_bins_;
  double aux_max_;
  std::vector<double> weight_;
  KahanSum total_;
};

}  // namespace ersc

#endif  // ERSC_OCCUPATION_HPP
