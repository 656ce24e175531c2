#include "dmpc/collision.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace dmpc {

namespace {

constexpr double kCoincident = 1e-12;

const std::vector<Vec3>& select(const HorizonPrediction& p,
                                AvoidanceSpace space) {
  return space == AvoidanceSpace::state ? p.positions : p.inputs;
}

void check_pair(const HorizonPrediction& mine, const HorizonPrediction& theirs) {
  if (mine.K() != theirs.K() || mine.inputs.size() != theirs.inputs.size())
    throw InvalidParameter("prediction horizons differ in length");
  if (!theirs.is_static && mine.stamp != theirs.stamp)
    throw StalePrediction("prediction stamps differ (" +
                          std::to_string(mine.stamp) + " vs " +
                          std::to_string(theirs.stamp) + ")");
}

}  // namespace

void EllipsoidSpec::validate() const {
  require((theta.array() > 0).all() && r_min > 0,
          "EllipsoidSpec: theta entries and r_min must be positive");
}

EllipsoidSpec combine(const EllipsoidSpec& a, const EllipsoidSpec& b) {
  EllipsoidSpec out;
  out.theta = a.theta.cwiseMax(b.theta);
  out.r_min = std::max(a.r_min, b.r_min);
  return out;
}

double scaled_distance(const EllipsoidSpec& e, const Vec3& pi, const Vec3& pj) {
  return (pi - pj).cwiseQuotient(e.theta).norm();
}

HalfspaceConstraint bvc_constraint(const Vec3& p_i, const Vec3& p_j,
                                   const EllipsoidSpec& e, bool full_margin,
                                   bool soft) {
  const double d = scaled_distance(e, p_i, p_j);
  if (d < kCoincident)
    throw DegenerateGeometry("bvc_constraints: coincident agent positions");
  HalfspaceConstraint hs;
  hs.normal = (p_i - p_j).cwiseQuotient(e.theta.cwiseAbs2()) / d;
  const double margin = full_margin ? (e.r_min - d) : 0.5 * (e.r_min - d);
  hs.offset = margin + hs.normal.dot(p_i);
  hs.target = ConstraintTarget::first_segment_points;
  hs.sample_index = 0;
  hs.soft = soft;
  return hs;
}

std::vector<HalfspaceConstraint> bvc_constraints(const Vec3& p_i,
                                                 std::span<const Vec3> neighbors,
                                                 const EllipsoidSpec& e,
                                                 bool soft) {
  e.validate();
  std::vector<HalfspaceConstraint> out;
  out.reserve(neighbors.size());
  for (std::size_t j = 0; j < neighbors.size(); ++j) {
    out.push_back(bvc_constraint(p_i, neighbors[j], e, false, soft));
    out.back().neighbor_id = static_cast<int>(j);
  }
  return out;
}

std::optional<int> detect_first_collision(const HorizonPrediction& mine,
                                          const HorizonPrediction& theirs,
                                          const EllipsoidSpec& e,
                                          AvoidanceSpace space) {
  check_pair(mine, theirs);
  const auto& a = select(mine, space);
  const auto& b = select(theirs, space);
  for (int k = 1; k < static_cast<int>(a.size()); ++k)
    if (scaled_distance(e, a[k], b[k]) < e.r_min) return k;
  return std::nullopt;
}

ClosestApproach closest_approach(const HorizonPrediction& mine,
                                 const HorizonPrediction& theirs,
                                 const EllipsoidSpec& e, AvoidanceSpace space) {
  check_pair(mine, theirs);
  const auto& a = select(mine, space);
  const auto& b = select(theirs, space);
  ClosestApproach best{std::numeric_limits<double>::infinity(), 1};
  for (int k = 1; k < static_cast<int>(a.size()); ++k) {
    const double d = scaled_distance(e, a[k], b[k]);
    if (d < best.distance) best = {d, k};
  }
  return best;
}

std::vector<int> neighbor_set(const HorizonPrediction& mine,
                              std::span<const HorizonPrediction> all,
                              const EllipsoidSpec& e, AvoidanceSpace space) {
  std::vector<int> omega;
  for (std::size_t j = 0; j < all.size(); ++j) {
    const auto& other = all[j];
    if (!other.is_static && other.agent_id == mine.agent_id) continue;
    const EllipsoidSpec pair = other.is_static ? combine(e, other.ellipsoid) : e;
    if (closest_approach(mine, other, pair, space).distance < 2.0 * pair.r_min)
      omega.push_back(static_cast<int>(j));
  }
  return omega;
}

HalfspaceConstraint ondemand_constraint(const Vec3& p0_i, const Vec3& pj,
                                        const EllipsoidSpec& e,
                                        const std::optional<Vec3>& fallback_direction) {
  e.validate();
  const double d = scaled_distance(e, p0_i, pj);
  HalfspaceConstraint hs;
  if (d >= kCoincident) {
    hs.normal = (p0_i - pj).cwiseQuotient(e.theta.cwiseAbs2()) / d;
  } else {
    if (!fallback_direction)
      throw DegenerateGeometry("ondemand_constraint: coincident predictions");
    Vec3 dir = *fallback_direction;
    if (dir.norm() < kCoincident) {
      std::cerr << "warning: coincident agents with no separating direction; "
                   "using +x\n";
      dir = Vec3::UnitX();
    }
    // Unit scaled-gradient direction, as if the points were split along dir.
    const Vec3 scaled = dir.cwiseQuotient(e.theta);
    hs.normal = dir.cwiseQuotient(e.theta.cwiseAbs2()) / scaled.norm();
  }
  hs.offset = e.r_min - d + hs.normal.dot(p0_i);
  hs.soft = true;
  return hs;
}

HorizonPrediction obstacle_as_neighbor(const Vec3& center, const EllipsoidSpec& e,
                                       int K, int obstacle_id, long stamp) {
  e.validate();
  HorizonPrediction pred;
  pred.agent_id = obstacle_id;
  pred.stamp = stamp;
  pred.positions.assign(K, center);
  pred.inputs.assign(K, center);
  pred.ellipsoid = e;
  pred.is_static = true;
  return pred;
}

}  // namespace dmpc
