#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hippo/common.hpp"

namespace hippo {

enum class TurnDirection { Up, Down, Left, Right };

std::string_view to_string(TurnDirection d);
TurnDirection parse_turn_direction(std::string_view s);

// A constant-curvature bend of the centerline, centred at a fraction of the
// segment length.
struct Turn {
  double at_fraction = 0.5;
  TurnDirection direction = TurnDirection::Right;
  double angle_deg = 0.0;
};

struct SegmentSpec {
  std::string name;
  double length = 0.0;  // mm
  std::vector<Turn> turns;
  double radius_min = 15.0;  // mm
  double radius_max = 15.0;  // mm
  double bend_radius = 50.0;  // centerline radius of curvature inside turns, mm
};

struct ColonBuildOptions {
  double waypoint_spacing = 25.0;    // mm
  double sample_step = 0.5;          // centerline sampling, mm
  double radius_knot_spacing = 20.0;  // mm
  double min_waypoint_gap = 1.0;     // closer waypoints are merged, mm
};

struct SegmentRange {
  std::string name;
  double begin = 0.0;
  double end = 0.0;
  bool operator==(const SegmentRange&) const = default;
};

struct Waypoint {
  double s = 0.0;
  Vec3 position = Vec3::Zero();
  bool operator==(const Waypoint&) const = default;
};

// Orthonormal frame carried along the centerline.
struct PathFrame {
  Vec3 tangent = Vec3::UnitZ();
  Vec3 up = Vec3::UnitY();
  Vec3 right = Vec3::UnitX();
  bool operator==(const PathFrame&) const = default;
};

// Nearest centerline location to a query point. Beyond either end the tube is
// treated as continuing straight along the end tangent, so `radial` is the
// distance to that extended axis and `overshoot` how far past the end the
// point lies.
struct CenterlineProjection {
  double s = 0.0;
  Vec3 foot = Vec3::Zero();
  double distance = 0.0;  // |p - foot|
  double radial = 0.0;
  double overshoot = 0.0;
};

struct ProximityReport {
  double wall_distance = 0.0;  // mm, >= 0
  bool below_threshold = false;
  bool collided = false;
  double s = 0.0;  // nearest centerline arclength
};

class ColonModel {
 public:
  ColonModel() = default;

  double total_length() const { return total_length_; }
  const std::vector<SegmentRange>& segments() const { return segments_; }
  const std::vector<Waypoint>& waypoints() const { return waypoints_; }
  const std::vector<Vec3>& samples() const { return points_; }
  const std::vector<double>& sample_arclengths() const { return arclengths_; }

  Vec3 position_at(double s) const;
  PathFrame frame_at(double s) const;
  double radius_at(double s) const;
  const std::string& segment_at(double s) const;

  CenterlineProjection project(const Vec3& p) const;

  // Same model rigidly shifted by `offset`.
  ColonModel translated(const Vec3& offset) const;

  bool operator==(const ColonModel&) const = default;

 private:
  friend ColonModel build_colon(std::span<const SegmentSpec>, std::uint64_t,
                                const ColonBuildOptions&);

  struct Chunk {
    std::size_t first = 0;  // first chord index
    std::size_t last = 0;   // one past the last chord index
    Vec3 center = Vec3::Zero();
    double radius = 0.0;
    bool operator==(const Chunk&) const = default;
  };

  void build_chunks();
  std::size_t sample_index(double s) const;

  double total_length_ = 0.0;
  std::vector<SegmentRange> segments_;
  std::vector<Waypoint> waypoints_;
  std::vector<double> arclengths_;
  std::vector<Vec3> points_;
  std::vector<PathFrame> frames_;
  std::vector<double> knot_s_;
  std::vector<double> knot_radius_;
  std::vector<Chunk> chunks_;
};

// Deterministic in (spec, seed). Each segment's radius profile depends only on
// the seed and the segment name, so a segment built alone matches its slice of
// the full colon.
ColonModel build_colon(std::span<const SegmentSpec> spec, std::uint64_t seed,
                       const ColonBuildOptions& options = {});

ProximityReport wall_distance(const ColonModel& model, const Vec3& p,
                              double threshold = 5.0);

// Six-segment colon with the reference segment lengths (928.84 mm total).
std::vector<SegmentSpec> default_colon_segments();

SegmentSpec straight_segment(std::string name, double length, double radius);

// Throws Error for an empty spec, duplicate names, or out-of-range values.
void validate_colon_spec(std::span<const SegmentSpec> spec);

struct ColonSpecFile {
  std::vector<SegmentSpec> segments;
  std::uint64_t seed = 0;
  ColonBuildOptions options;
};

// INI-style colon description: a [colon] section naming the segment order and
// one section per segment.
ColonSpecFile load_colon_spec(const std::filesystem::path& path);
ColonSpecFile parse_colon_spec(const std::string& text);
std::string format_colon_spec(const ColonSpecFile& spec);

// Keeps only the named segments, in their original order.
std::vector<SegmentSpec> restrict_segments(std::span<const SegmentSpec> spec,
                                           std::span<const std::string> names);

}  // namespace hippo
