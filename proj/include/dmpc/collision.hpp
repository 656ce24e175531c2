#pragma once

#include <optional>
#include <span>
#include <vector>

#include "dmpc/common.hpp"

namespace dmpc {

/// Ellipsoidal safety region: agents i, j are separated when
/// ||Theta^-1 (p_i - p_j)|| >= r_min with Theta = diag(theta).
struct EllipsoidSpec {
  Vec3 theta = Vec3(1.0, 1.0, 2.0);
  double r_min = 0.3;

  void validate() const;
};

/// Worst case of two specs: max r_min, elementwise max of theta.
EllipsoidSpec combine(const EllipsoidSpec& a, const EllipsoidSpec& b);

/// Predicted horizon shared by one agent (or a static obstacle).
/// positions[k] and inputs[k] refer to time stamp + k, k = 0..K-1.
struct HorizonPrediction {
  int agent_id = -1;
  long stamp = 0;
  std::vector<Vec3> positions;
  std::vector<Vec3> inputs;
  EllipsoidSpec ellipsoid;
  bool is_static = false;

  int K() const { return static_cast<int>(positions.size()); }
};

enum class AvoidanceSpace { state, input };

enum class ConstraintTarget {
  input_sample,             // U[k] of the new plan
  state_sample,             // predicted position at k of the new plan
  first_segment_points,     // every control point of the first segment
};

/// normal^T q >= offset (+ eps when soft, eps <= 0), q selected by target.
struct HalfspaceConstraint {
  Vec3 normal = Vec3::UnitX();
  double offset = 0.0;
  ConstraintTarget target = ConstraintTarget::input_sample;
  int sample_index = 0;
  bool soft = false;
  int neighbor_id = -1;

  double residual(const Vec3& q) const { return normal.dot(q) - offset; }
};

double scaled_distance(const EllipsoidSpec& e, const Vec3& pi, const Vec3& pj);

/// Buffered Voronoi cell halfspaces from measured positions, one per
/// neighbour, binding all first-segment control points. Static obstacles
/// get the full (unshared) margin.
std::vector<HalfspaceConstraint> bvc_constraints(
    const Vec3& p_i, std::span<const Vec3> neighbors, const EllipsoidSpec& e,
    bool soft = false);

HalfspaceConstraint bvc_constraint(const Vec3& p_i, const Vec3& p_j,
                                   const EllipsoidSpec& e, bool full_margin,
                                   bool soft);

/// First k in 1..K-1 where the scaled distance drops below r_min.
std::optional<int> detect_first_collision(const HorizonPrediction& mine,
                                          const HorizonPrediction& theirs,
                                          const EllipsoidSpec& e,
                                          AvoidanceSpace space);

/// Minimum scaled distance over k = 1..K-1 and where it occurs.
struct ClosestApproach {
  double distance = 0.0;
  int index = 1;
};
ClosestApproach closest_approach(const HorizonPrediction& mine,
                                 const HorizonPrediction& theirs,
                                 const EllipsoidSpec& e, AvoidanceSpace space);

/// Indices into `all` of predictions whose closest approach is below
/// 2 r_min. Entries with mine.agent_id are skipped.
std::vector<int> neighbor_set(const HorizonPrediction& mine,
                              std::span<const HorizonPrediction> all,
                              const EllipsoidSpec& e,
                              AvoidanceSpace space = AvoidanceSpace::state);

/// First-order approximation of ||Theta^-1 (p - pj)|| >= r_min about p0_i.
/// Throws DegenerateGeometry when p0_i == pj and no fallback is supplied.
HalfspaceConstraint ondemand_constraint(
    const Vec3& p0_i, const Vec3& pj, const EllipsoidSpec& e,
    const std::optional<Vec3>& fallback_direction = std::nullopt);

HorizonPrediction obstacle_as_neighbor(const Vec3& center,
                                       const EllipsoidSpec& e, int K,
                                       int obstacle_id, long stamp = 0);

}  // namespace dmpc
