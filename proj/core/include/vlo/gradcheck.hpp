#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "vlo/grid.hpp"

namespace vlo::ad {

// One block of variables to probe. `values` is perturbed in place and restored afterwards.
struct FdTarget {
  std::string name;
  Grid* values = nullptr;
  const Grid* analytic = nullptr;
  double step = 1e-4;
  std::vector<std::size_t> indices;  // explicit components; empty means all or a random sample
};

struct FdOptions {
  // Grids with more components than this are probed on a seeded random subset of this size.
  std::size_t max_samples = 256;
  std::uint64_t seed = 0x5eed;
  double denominator_floor = 1e-8;
  // Return true for components sitting on a kink of the objective; they are skipped and counted.
  std::function<bool(const FdTarget&, std::size_t)> exclude;
};

struct FdEntry {
  std::size_t target = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

struct FdReport {
  double max_rel_error = 0.0;
  FdEntry worst;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  std::vector<FdEntry> entries;

  bool passed(double tolerance) const { return max_rel_error <= tolerance; }
};

// Central differences (f(x+h) - f(x-h)) / 2h for every probed component; relative error is
// |g_an - g_fd| / max(|g_an|, |g_fd|, floor). Throws kDeterminism when two evaluations at the
// unperturbed point disagree.
FdReport finite_difference_check(const std::function<double()>& f, std::span<FdTarget> targets,
                                 const FdOptions& options = {});

// True when coord lies within `margin` of an integer, where the bilinear kernel has a kink.
bool near_grid_line(double coord, double margin = 1e-3);

}  // namespace vlo::ad
