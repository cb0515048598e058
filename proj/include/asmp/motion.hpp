#pragma once

// Ground-truth displacement vectors from flow + depth, and their quantization
// into direction classes.

#include "asmp/geometry.hpp"
#include "asmp/scenegraph.hpp"
#include "asmp/tensorio.hpp"
#include "asmp/types.hpp"

#include <array>
#include <span>
#include <vector>

namespace asmp {

inline constexpr double kDefaultMotionTau = 0.02;
/// Rectifications closer than this to identity are treated as identity.
inline constexpr double kIdentitySnap = 1e-9;

/// 10-class layout: 0-7 octants, 8 no motion, 9 background.
inline constexpr int kOctantClasses = 10;
inline constexpr int kOctantStatic = 8;
inline constexpr int kOctantBackground = 9;

/// 28-class layout: 0-25 cube directions, 26 no motion, 27 background.
inline constexpr int kCubeClasses = 28;
inline constexpr int kCubeStatic = 26;
inline constexpr int kCubeBackground = 27;

/// Per-pixel 3D displacement for a box. Flow is a rank-3 [H, W, 2] array of
/// (dx, dy) pixels. Endpoints are clamped to the image. `rectify` maps
/// target-frame points into the reference frame.
std::vector<Vec3> lift_displacements(const ArrayFile& flow, const Box& box,
                                     const ArrayFile& depth_ref, const ArrayFile& depth_tgt,
                                     const SimilarityTransform& rectify = {});

/// Component-wise median; (0, 0, 0) for an empty list.
Vec3 median_displacement(std::span<const Vec3> vectors);

/// The 26 unit directions to the faces (0-5), edges (6-17) and corners
/// (18-25) of a cube, each group ordered lexicographically by (x, y, z).
const std::array<Vec3, 26>& direction_templates();

/// Octant code (x>=0) + 2(y>=0) + 4(z>=0).
int quantize10(const Vec3& d, double tau, bool is_background);

/// Highest-cosine template; ties go to the lowest template index.
int quantize28(const Vec3& d, double tau, bool is_background);

DisplacementLabel make_label(int node, int window, const Vec3& d, double tau, bool is_background);

/// Rigid-plus-scale transform taking a window's target frame into its
/// reference frame, estimated from the tracked points; identity when the
/// bundle has no tracks or the fit is degenerate.
SimilarityTransform window_rectification(const SceneBundle& bundle, int window);

/// Labels for one window: every auditory node of `graph`, then the background.
std::vector<DisplacementLabel> label_window(const SceneBundle& bundle, int window,
                                            const SceneGraph& graph,
                                            double tau = kDefaultMotionTau);

/// (N+1) labels per window, `graphs[w]` being the graph of window w.
std::vector<DisplacementLabel> window_labels(const SceneBundle& bundle,
                                             std::span<const SceneGraph> graphs,
                                             double tau = kDefaultMotionTau);

}  // namespace asmp
