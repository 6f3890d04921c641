// =============================================================================
// kernel.hpp: mutation kernels on a finite strategy space.
//
// gamma(i, j) is the fraction of offspring of strategy i born with strategy j;
// rows are probability vectors. Besides constructors for the families used in
// experiments (identity, uniform, blends, discretized Gaussians, directed
// kernels) this header has the structural predicates the long-time results
// need: optimum preservation, directedness and a static irreducibility
// certificate.
// =============================================================================
#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "selmut/measure.hpp"
#include "selmut/vitals.hpp"

namespace selmut {

inline constexpr double kRowTolerance = 1e-12;

class MutationKernel {
 public:
  /// Row-major n x n weights. Entries must be finite and >= 0, and every row
  /// must sum to 1 within 1e-6; rows are then renormalized so the stored
  /// kernel is stochastic to rounding.
  MutationKernel(std::size_t n, std::vector<double> weights);
  static MutationKernel from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const { return w_[i * n_ + j]; }
  std::span<const double> row(std::size_t i) const { return {w_.data() + i * n_, n_}; }

  /// gamma(i)(S) = sum_{j in S} gamma(i, j).
  double row_mass(std::size_t i, std::span<const std::size_t> subset) const;
  bool is_identity() const noexcept;

 private:
  std::size_t n_;
  std::vector<double> w_;
};

MutationKernel identity_kernel(std::size_t n);
/// Every row is 1/n.
MutationKernel uniform_kernel(std::size_t n);

/// (1 - eps) base + eps target; throws InputError unless 0 <= eps <= 1.
MutationKernel blend_toward(const MutationKernel& base, const MutationKernel& target, double eps);

/// Weights proportional to exp(-dist^2 / (2 sigma^2)), rows renormalized.
MutationKernel gaussian_grid_kernel(const StrategySpace& space, double sigma);

/// A kernel directed to `target` within `optimal`: row `target` is a point
/// mass, every other row sends `funnel` of its offspring to `target` and
/// keeps the rest on itself.
MutationKernel directed_kernel(std::size_t n, std::size_t target, std::span<const std::size_t> optimal,
                               double funnel);

struct PreservationReport {
  bool preserving = true;
  /// max over q in Qd of 1 - gamma(q)(Qd).
  double max_leak = 0.0;
  std::size_t worst_row = 0;
};

PreservationReport is_optimum_preserving(const MutationKernel& k, std::span<const std::size_t> optimal);

struct DirectedReport {
  bool directed = true;
  /// Empty when directed; otherwise names the first failing condition.
  std::string failure;
};

/// gamma(qd, qd) = 1 and, for all i in Qd, gamma(i, qd) > 0 and gamma(i)(Qd) = 1.
DirectedReport is_directed(const MutationKernel& k, std::size_t target,
                           std::span<const std::size_t> optimal);

/// Graph certificate: every atom has a path into E along edges i -> j with
/// gamma(i, j) > 0. Valid for the dynamic property only when births are
/// strictly positive, which is checked on `samples` points over [0, s_hi];
/// throws CertificateUnavailable otherwise.
bool is_irreducible_into(const MutationKernel& k, std::span<const std::size_t> target_set,
                         const RateModel& model, double s_hi = 100.0, std::size_t samples = 100);

/// max over rows of weak_norm(row difference) with the default family.
double kernel_distance(const MutationKernel& a, const MutationKernel& b);

/// Plain CSV, n rows of n comma-separated weights.
MutationKernel load_kernel_csv(const std::filesystem::path& path);
void save_kernel_csv(const MutationKernel& k, const std::filesystem::path& path);

}  // namespace selmut
