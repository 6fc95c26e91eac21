#ifndef MDAUG_GEO_HPP
#define MDAUG_GEO_HPP

#include <span>

namespace mdaug::geo {

inline constexpr double kEarthRadiusM = 6'371'000.0;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kDegToRad = kPi / 180.0;

// WGS-84 coordinates in degrees.
struct GeoPoint {
  double lat = 0.0;
  double lon = 0.0;
  bool operator==(const GeoPoint&) const = default;
};

// Planar coordinates in meters east/north of a projection origin.
struct LocalPoint {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const LocalPoint&) const = default;
};

// Throws DataError if lat/lon are out of bounds or NaN.
void validate(const GeoPoint& p);

// Equirectangular projection about a fixed origin. Exact at the origin;
// sub-meter distortion at city scale (regions here span a few km).
class Projection {
 public:
  explicit Projection(GeoPoint origin);

  const GeoPoint& origin() const noexcept { return origin_; }

  LocalPoint project(const GeoPoint& p) const;
  GeoPoint unproject(const LocalPoint& p) const;

  bool operator==(const Projection&) const = default;

 private:
  GeoPoint origin_;
  double m_per_deg_lat_ = 0.0;
  double m_per_deg_lon_ = 0.0;
};

// Origin = arithmetic mean of latitudes and longitudes.
Projection make_projection(std::span<const GeoPoint> points);

LocalPoint project(const GeoPoint& p, const Projection& proj);
GeoPoint unproject(const LocalPoint& p, const Projection& proj);

// Euclidean distance in the projected plane, meters.
double position_error(const LocalPoint& estimate, const LocalPoint& truth);

}  // namespace mdaug::geo

#endif  // MDAUG_GEO_HPP
