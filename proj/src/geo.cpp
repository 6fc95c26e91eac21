#include "mdaug/geo.hpp"

#include <cmath>

#include "mdaug/errors.hpp"

namespace mdaug::geo {

void validate(const GeoPoint& p) {
  if (std::isnan(p.lat) || std::isnan(p.lon)) {
    throw DataError("geo: NaN coordinate");
  }
  if (p.lat < -90.0 || p.lat > 90.0) {
    throw DataError("geo: latitude out of [-90, 90]");
  }
  if (p.lon < -180.0 || p.lon > 180.0) {
    throw DataError("geo: longitude out of [-180, 180]");
  }
}

Projection::Projection(GeoPoint origin) : origin_(origin) {
  validate(origin_);
  m_per_deg_lat_ = kEarthRadiusM * kDegToRad;
  m_per_deg_lon_ = kEarthRadiusM * kDegToRad * std::cos(origin_.lat * kDegToRad);
}

LocalPoint Projection::project(const GeoPoint& p) const {
  validate(p);
  return {(p.lon - origin_.lon) * m_per_deg_lon_,
          (p.lat - origin_.lat) * m_per_deg_lat_};
}

GeoPoint Projection::unproject(const LocalPoint& p) const {
  if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
    throw DataError("geo: non-finite local coordinate");
  }
  return {origin_.lat + p.y / m_per_deg_lat_,
          origin_.lon + p.x / m_per_deg_lon_};
}

Projection make_projection(std::span<const GeoPoint> points) {
  if (points.empty()) throw DataError("empty point set");
  double lat_sum = 0.0;
  double lon_sum = 0.0;
  for (const auto& p : points) {
    validate(p);
    lat_sum += p.lat;
    lon_sum += p.lon;
  }
  const double n = static_cast<double>(points.size());
  return Projection(GeoPoint{lat_sum / n, lon_sum / n});
}

LocalPoint project(const GeoPoint& p, const Projection& proj) {
  return proj.project(p);
}

GeoPoint unproject(const LocalPoint& p, const Projection& proj) {
  return proj.unproject(p);
}

double position_error(const LocalPoint& estimate, const LocalPoint& truth) {
  if (!std::isfinite(estimate.x) || !std::isfinite(estimate.y) ||
      !std::isfinite(truth.x) || !std::isfinite(truth.y)) {
    throw DataError("position_error: non-finite input");
  }
  return std::hypot(estimate.x - truth.x, estimate.y - truth.y);
}

}  // namespace mdaug::geo
