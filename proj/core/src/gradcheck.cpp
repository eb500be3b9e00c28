#include "vlo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "vlo/error.hpp"

namespace vlo::ad {

namespace {

std::vector<std::size_t> probe_indices(const FdTarget& t, const FdOptions& options, std::mt19937_64& rng) {
  if (!t.indices.empty()) return t.indices;
  std::vector<std::size_t> all(t.values->size());
  std::iota(all.begin(), all.end(), std::size_t{0});
  if (all.size() <= options.max_samples) return all;
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(options.max_samples);
  std::sort(all.begin(), all.end());
  return all;
}

}  // namespace

FdReport finite_difference_check(const std::function<double()>& f, std::span<FdTarget> targets,
                                 const FdOptions& options) {
  const double f0 = f();
  if (const double f1 = f(); f0 != f1 && !(std::isnan(f0) && std::isnan(f1))) {
    fail(ErrorCode::kDeterminism, "objective returned different values for identical inputs");
  }
  std::mt19937_64 rng(options.seed);
  FdReport report;
  for (std::size_t ti = 0; ti < targets.size(); ++ti) {
    FdTarget& t = targets[ti];
    if (!t.values || !t.analytic || !t.values->same_shape(*t.analytic)) {
      fail(ErrorCode::kInvalidArgument, "finite-difference target '" + t.name + "' is malformed");
    }
    for (std::size_t idx : probe_indices(t, options, rng)) {
      if (options.exclude && options.exclude(t, idx)) {
        ++report.excluded;
        continue;
      }
      double& x = (*t.values)[idx];
      const double saved = x;
      x = saved + t.step;
      const double fp = f();
      x = saved - t.step;
      const double fm = f();
      x = saved;

      FdEntry e;
      e.target = ti;
      e.index = idx;
      e.analytic = (*t.analytic)[idx];
      e.numeric = (fp - fm) / (2.0 * t.step);
      const double denom = std::max({std::abs(e.analytic), std::abs(e.numeric), options.denominator_floor});
      e.rel_error = std::abs(e.analytic - e.numeric) / denom;
      if (e.rel_error > report.max_rel_error || report.checked == 0) {
        report.max_rel_error = std::max(report.max_rel_error, e.rel_error);
        if (e.rel_error >= report.worst.rel_error) report.worst = e;
      }
      report.entries.push_back(e);
      ++report.checked;
    }
  }
  return report;
}

bool near_grid_line(double coord, double margin) { return std::abs(coord - std::round(coord)) < margin; }

}  // namespace vlo::ad
