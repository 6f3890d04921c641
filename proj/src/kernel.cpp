#include "selmut/kernel.hpp"

#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "selmut/errors.hpp"

namespace selmut {

MutationKernel::MutationKernel(std::size_t n, std::vector<double> weights)
    : n_(n), w_(std::move(weights)) {
  if (n_ == 0) throw InputError("mutation kernel needs at least one atom");
  if (w_.size() != n_ * n_) throw InputError("mutation kernel must be " + std::to_string(n_) + "x" +
                                             std::to_string(n_));
  for (std::size_t i = 0; i < n_; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n_; ++j) {
      const double v = w_[i * n_ + j];
      if (!std::isfinite(v) || v < 0.0)
        throw InputError("mutation kernel entries must be finite and >= 0 (row " + std::to_string(i) + ")");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-6)
      throw InputError("mutation kernel row " + std::to_string(i) + " sums to " + std::to_string(sum));
    for (std::size_t j = 0; j < n_; ++j) w_[i * n_ + j] /= sum;
  }
}

MutationKernel MutationKernel::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t n = rows.size();
  std::vector<double> w;
  w.reserve(n * n);
  for (const auto& r : rows) {
    if (r.size() != n) throw InputError("mutation kernel rows must have " + std::to_string(n) + " entries");
    w.insert(w.end(), r.begin(), r.end());
  }
  return MutationKernel(n, std::move(w));
}

double MutationKernel::row_mass(std::size_t i, std::span<const std::size_t> subset) const {
  double acc = 0.0;
  for (std::size_t j : subset) {
    if (j >= n_) throw InputError("atom index out of range for kernel");
    acc += (*this)(i, j);
  }
  return acc;
}

bool MutationKernel::is_identity() const noexcept {
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j)
      if ((*this)(i, j) != (i == j ? 1.0 : 0.0)) return false;
  return true;
}

MutationKernel identity_kernel(std::size_t n) {
  std::vector<double> w(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) w[i * n + i] = 1.0;
  return MutationKernel(n, std::move(w));
}

MutationKernel uniform_kernel(std::size_t n) {
  return MutationKernel(n, std::vector<double>(n * n, 1.0 / static_cast<double>(n)));
}

MutationKernel blend_toward(const MutationKernel& base, const MutationKernel& target, double eps) {
  if (base.size() != target.size()) throw InputError("blend_toward: kernels differ in size");
  if (!(eps >= 0.0 && eps <= 1.0)) throw InputError("blend_toward: eps must lie in [0, 1]");
  const std::size_t n = base.size();
  std::vector<double> w(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) w[i * n + j] = (1.0 - eps) * base(i, j) + eps * target(i, j);
  return MutationKernel(n, std::move(w));
}

MutationKernel gaussian_grid_kernel(const StrategySpace& space, double sigma) {
  if (!(sigma > 0.0)) throw InputError("gaussian kernel: sigma must be positive");
  const std::size_t n = space.size();
  std::vector<double> w(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double d = space.distance(i, j);
      w[i * n + j] = std::exp(-d * d / (2.0 * sigma * sigma));
      sum += w[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) w[i * n + j] /= sum;
  }
  return MutationKernel(n, std::move(w));
}

MutationKernel directed_kernel(std::size_t n, std::size_t target, std::span<const std::size_t> optimal,
                               double funnel) {
  if (target >= n) throw InputError("directed_kernel: target out of range");
  if (!(funnel > 0.0 && funnel <= 1.0)) throw InputError("directed_kernel: funnel must lie in (0, 1]");
  for (std::size_t j : optimal)
    if (j >= n) throw InputError("directed_kernel: optimal index out of range");
  std::vector<double> w(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (i == target) {
      w[i * n + i] = 1.0;
      continue;
    }
    w[i * n + target] = funnel;
    w[i * n + i] += 1.0 - funnel;
  }
  return MutationKernel(n, std::move(w));
}

PreservationReport is_optimum_preserving(const MutationKernel& k, std::span<const std::size_t> optimal) {
  PreservationReport report;
  for (std::size_t q : optimal) {
    if (q >= k.size()) throw InputError("is_optimum_preserving: index out of range");
    const double leak = 1.0 - k.row_mass(q, optimal);
    if (leak > report.max_leak) {
      report.max_leak = leak;
      report.worst_row = q;
    }
  }
  report.preserving = report.max_leak <= kRowTolerance;
  return report;
}

DirectedReport is_directed(const MutationKernel& k, std::size_t target,
                           std::span<const std::size_t> optimal) {
  bool member = false;
  for (std::size_t q : optimal) {
    if (q >= k.size()) throw InputError("is_directed: index out of range");
    member = member || q == target;
  }
  if (!member) throw InputError("is_directed: target must belong to the optimal set");
  if (std::abs(k(target, target) - 1.0) > kRowTolerance)
    return {false, "gamma(qd)({qd}) != 1 (row " + std::to_string(target) + ")"};
  for (std::size_t i : optimal) {
    if (!(k(i, target) > 0.0))
      return {false, "gamma(" + std::to_string(i) + ")({qd}) = 0"};
    if (std::abs(k.row_mass(i, optimal) - 1.0) > kRowTolerance)
      return {false, "gamma(" + std::to_string(i) + ")(Qd) != 1"};
  }
  return {};
}

bool is_irreducible_into(const MutationKernel& k, std::span<const std::size_t> target_set,
                         const RateModel& model, double s_hi, std::size_t samples) {
  const std::size_t n = k.size();
  if (model.size() != n) throw InputError("is_irreducible_into: model and kernel differ in size");
  for (std::size_t q = 0; q < n; ++q)
    for (std::size_t i = 0; i <= samples; ++i) {
      const double s = s_hi * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(samples, 1));
      if (!(model.birth(s, q) > 0.0))
        throw CertificateUnavailable("birth rate vanishes at atom " + std::to_string(q) +
                                     "; the reachability criterion does not apply");
    }
  // Backward search from E over reversed edges.
  std::vector<bool> reaches(n, false);
  std::deque<std::size_t> frontier;
  for (std::size_t e : target_set) {
    if (e >= n) throw InputError("is_irreducible_into: index out of range");
    if (!reaches[e]) {
      reaches[e] = true;
      frontier.push_back(e);
    }
  }
  while (!frontier.empty()) {
    const std::size_t j = frontier.front();
    frontier.pop_front();
    for (std::size_t i = 0; i < n; ++i)
      if (!reaches[i] && k(i, j) > 0.0) {
        reaches[i] = true;
        frontier.push_back(i);
      }
  }
  for (bool r : reaches)
    if (!r) return false;
  return true;
}

double kernel_distance(const MutationKernel& a, const MutationKernel& b) {
  if (a.size() != b.size()) throw InputError("kernel_distance: kernels differ in size");
  const auto fam = TestFunctionFamily::atom_indicators(a.size());
  std::vector<double> diff(a.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a.size(); ++j) diff[j] = a(i, j) - b(i, j);
    worst = std::max(worst, weak_norm(diff, fam));
  }
  return worst;
}

MutationKernel load_kernel_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open kernel file '" + path.string() + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        row.push_back(std::stod(cell));
      } catch (const std::exception&) {
        throw InputError("kernel file '" + path.string() + "': bad entry '" + cell + "'");
      }
    }
    rows.push_back(std::move(row));
  }
  return MutationKernel::from_rows(rows);
}

void save_kernel_csv(const MutationKernel& k, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write kernel file '" + path.string() + "'");
  out << std::setprecision(17);
  for (std::size_t i = 0; i < k.size(); ++i) {
    for (std::size_t j = 0; j < k.size(); ++j) out << (j ? "," : "") << k(i, j);
    out << '\n';
  }
}

}  // namespace selmut
