#include "gazeguide/engine.hpp"

#include <algorithm>
#include <cmath>

namespace gazeguide {

AttractionPlan plan_chain(const Rayd& gaze, const Frustumd& frustum, const Poi& poi, double delta_d_m) {
  if (!std::isfinite(delta_d_m) || delta_d_m <= 0.0)
    throw std::invalid_argument("delta_d_m must be positive");
  if (!all_finite(poi.position)) throw std::invalid_argument("POI position is not finite");
  const double range = (poi.position - gaze.origin()).norm();
  if (range <= 0.0) throw DegeneratePlan("POI coincides with the gaze origin");

  AttractionPlan plan;
  plan.poi_id = poi.id;
  plan.delta_d_m = delta_d_m;
  plan.anchor = clamp_to_frustum(frustum, point_at(gaze, range));

  const Vec3d to_poi = poi.position - plan.anchor;
  const double dist = to_poi.norm();
  if (dist < 1e-6) throw DegeneratePlan("POI is already at the gaze point");

  const Vec3d unit = to_poi / dist;
  const auto count = static_cast<std::size_t>(std::ceil(dist / delta_d_m));
  plan.waypoints.reserve(count);
  for (std::size_t k = 1; k < count; ++k)
    plan.waypoints.push_back(plan.anchor + static_cast<double>(k) * delta_d_m * unit);
  plan.waypoints.push_back(poi.position);
  return plan;
}

std::pair<IntervalPolicy, std::int64_t> adapt_interval(IntervalPolicy policy, std::int64_t t_i_us) {
  if (t_i_us < 0) throw std::invalid_argument("t_i must be non-negative");
  if (!policy.ewma_us) {
    policy.ewma_us = t_i_us;
  } else {
    const double blended = policy.ewma_alpha * static_cast<double>(t_i_us) +
                           (1.0 - policy.ewma_alpha) * static_cast<double>(*policy.ewma_us);
    policy.ewma_us = std::llround(blended);
  }
  const auto proposed = std::llround(policy.beta * static_cast<double>(*policy.ewma_us) / 1000.0);
  const std::int64_t next = std::clamp<std::int64_t>(proposed, policy.delta_t_min_ms, policy.delta_t_max_ms);
  return {policy, next};
}

}  // namespace gazeguide
