#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "vlo/geometry.hpp"
#include "vlo/imaging.hpp"
#include "vlo/objective.hpp"

namespace vlo {

// Plane n . X = offset in target camera coordinates, with the camera on the side n . X < offset.
struct ScenePlane {
  Eigen::Vector3d normal;
  double offset = 0.0;
  std::uint64_t texture_seed = 0;
};

// Multi-octave value noise; the coarsest lattice spacing is `base_period` target pixels.
struct TextureParams {
  int octaves = 3;
  double amplitude = 0.4;
  double base_period = 48.0;
};

// The planes bound a convex region containing both cameras, so every surface is unoccluded.
struct SceneSpec {
  std::vector<ScenePlane> planes;
  Intrinsics k;
  Pose6 gt_pose;  // target -> source
  TextureParams texture;
  double sparsity = 0.05;
  std::uint64_t seed = 0;
  int channels = 1;

  // Throws kInvalidSpec for planes behind the camera, depths outside the valid range or bad sparsity.
  void validate() const;
};

struct RenderedScene {
  Image target;
  Image source;
  DenseDepthMap depth;  // ground-truth z-depth of the target
  SparseDepthMap sparse;
  Pose6 gt_pose;
};

RenderedScene render(const SceneSpec& spec);

// Three-frame snippet under constant velocity: sources at gt_pose^-1 (previous) and gt_pose (next).
struct RenderedSnippet {
  Snippet snippet;
  DenseDepthMap depth;
  std::vector<Pose6> gt_poses;  // one per source, same order as snippet.sources
};

RenderedSnippet render_snippet(const SceneSpec& spec);

// Image of the scene seen from a camera placed at `pose` relative to the target camera.
Image render_view(const SceneSpec& spec, const Pose6& pose);

// Ground-truth target depth by analytic ray-plane intersection.
DenseDepthMap render_depth(const SceneSpec& spec);
// z-depth seen by the camera at `pose`, in that camera's frame.
DenseDepthMap render_depth(const SceneSpec& spec, const Pose6& pose);

// Seeded uniform subsample of round(sparsity * pixels) depth values (at least one).
SparseDepthMap sample_sparse(const DenseDepthMap& depth, double sparsity, std::uint64_t seed);

// Twenty deterministic scenes spanning 0.05-0.5 m translation, 0.2-2 deg rotation,
// 1-3 planes and 2-10% sparsity.
std::vector<SceneSpec> suite(std::uint64_t seed = 2024);

// Default suite camera.
Intrinsics suite_intrinsics();

// Objective weights used for direct optimisation on suite scenes.
LossWeights suite_weights();

}  // namespace vlo
