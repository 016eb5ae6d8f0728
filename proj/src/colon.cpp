#include "hippo/colon.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "hippo/rng.hpp"

namespace hippo {

namespace {

constexpr std::size_t kChunkChords = 16;

Vec3 rotate_toward(const Vec3& a, const Vec3& b, double angle) {
  return std::cos(angle) * a + std::sin(angle) * b;
}

// Rotates the frame by `angle` radians in the plane of the tangent and the
// axis selected by `dir`.
void turn_frame(PathFrame& f, TurnDirection dir, double angle) {
  switch (dir) {
    case TurnDirection::Right:
    case TurnDirection::Left: {
      const double a = dir == TurnDirection::Right ? angle : -angle;
      const Vec3 t = rotate_toward(f.tangent, f.right, a);
      const Vec3 r = rotate_toward(f.right, f.tangent, -a);
      f.tangent = t;
      f.right = r;
      break;
    }
    case TurnDirection::Up:
    case TurnDirection::Down: {
      const double a = dir == TurnDirection::Up ? angle : -angle;
      const Vec3 t = rotate_toward(f.tangent, f.up, a);
      const Vec3 u = rotate_toward(f.up, f.tangent, -a);
      f.tangent = t;
      f.up = u;
      break;
    }
  }
}

void orthonormalize(PathFrame& f) {
  f.tangent.normalize();
  f.up = (f.up - f.up.dot(f.tangent) * f.tangent).normalized();
  f.right = f.up.cross(f.tangent);
}

struct TurnInterval {
  double begin = 0.0;
  double end = 0.0;
  double curvature = 0.0;
  TurnDirection direction = TurnDirection::Right;
};

void validate(std::span<const SegmentSpec> spec) {
  if (spec.empty()) throw Error("colon spec has no segments");
  std::set<std::string> names;
  for (const auto& seg : spec) {
    if (!(seg.length > 0.0) || !std::isfinite(seg.length)) {
      throw Error("segment '" + seg.name + "' has non-positive length");
    }
    if (!names.insert(seg.name).second) {
      throw Error("duplicate segment name '" + seg.name + "'");
    }
    if (!(seg.radius_min > 0.0) || seg.radius_max < seg.radius_min ||
        seg.radius_max > 35.0) {
      throw Error("segment '" + seg.name +
                  "' radius range must satisfy 0 < min <= max <= 35 mm");
    }
    if (!(seg.bend_radius > 0.0)) {
      throw Error("segment '" + seg.name + "' bend radius must be positive");
    }
    for (const auto& t : seg.turns) {
      if (t.at_fraction < 0.0 || t.at_fraction > 1.0 || t.angle_deg < 0.0) {
        throw Error("segment '" + seg.name + "' has an invalid turn");
      }
    }
  }
}

double parse_number(const std::string& text, const std::string& what) {
  const std::string trimmed = boost::algorithm::trim_copy(text);
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(trimmed, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != trimmed.size() || !std::isfinite(v)) {
    throw Error("cannot parse number for " + what + ": '" + text + "'");
  }
  return v;
}

}  // namespace

std::string_view to_string(TurnDirection d) {
  switch (d) {
    case TurnDirection::Up: return "up";
    case TurnDirection::Down: return "down";
    case TurnDirection::Left: return "left";
    case TurnDirection::Right: return "right";
  }
  return "?";
}

TurnDirection parse_turn_direction(std::string_view s) {
  if (s == "up") return TurnDirection::Up;
  if (s == "down") return TurnDirection::Down;
  if (s == "left") return TurnDirection::Left;
  if (s == "right") return TurnDirection::Right;
  throw Error("unknown turn direction '" + std::string(s) + "'");
}

ColonModel build_colon(std::span<const SegmentSpec> spec, std::uint64_t seed,
                       const ColonBuildOptions& options) {
  validate(spec);
  if (!(options.sample_step > 0.0) || !(options.waypoint_spacing > 0.0) ||
      !(options.radius_knot_spacing > 0.0)) {
    throw Error("colon build options must be positive");
  }

  ColonModel m;
  std::vector<TurnInterval> turns;
  double offset = 0.0;
  for (const auto& seg : spec) {
    m.segments_.push_back({seg.name, offset, offset + seg.length});
    for (const auto& t : seg.turns) {
      const double angle = deg_to_rad(t.angle_deg);
      const double arc = std::min(seg.bend_radius * angle, seg.length);
      double center = offset + t.at_fraction * seg.length;
      center = std::clamp(center, offset + arc / 2, offset + seg.length - arc / 2);
      if (arc > 0.0) {
        turns.push_back({center - arc / 2, center + arc / 2, angle / arc, t.direction});
      }
    }

    // Radius knots: own stream per segment so restricted builds agree.
    Rng rng(mix_seed(seed ^ hash_string(seg.name)));
    for (double k = 0.0; k < seg.length - 1e-9; k += options.radius_knot_spacing) {
      m.knot_s_.push_back(offset + k);
      m.knot_radius_.push_back(rng.uniform(seg.radius_min, seg.radius_max));
    }
    offset += seg.length;
  }
  m.total_length_ = offset;
  m.segments_.back().end = offset;
  m.knot_s_.push_back(offset);
  m.knot_radius_.push_back(m.knot_radius_.back());

  // Integrate the frame along the centerline; each chord is rotated half a
  // step before and after the move so the turn angle is exact.
  PathFrame frame;
  Vec3 pos = Vec3::Zero();
  m.arclengths_.push_back(0.0);
  m.points_.push_back(pos);
  m.frames_.push_back(frame);
  const auto total_steps =
      static_cast<std::size_t>(std::ceil(offset / options.sample_step - 1e-9));
  double s = 0.0;
  for (std::size_t i = 1; i <= total_steps; ++i) {
    const double next = i == total_steps ? offset : static_cast<double>(i) * options.sample_step;
    const double mid = 0.5 * (s + next);
    auto rotate_range = [&](double a, double b) {
      for (const auto& t : turns) {
        const double overlap = std::min(b, t.end) - std::max(a, t.begin);
        if (overlap > 0.0) turn_frame(frame, t.direction, overlap * t.curvature);
      }
    };
    rotate_range(s, mid);
    orthonormalize(frame);
    pos += (next - s) * frame.tangent;
    rotate_range(mid, next);
    orthonormalize(frame);
    s = next;
    m.arclengths_.push_back(s);
    m.points_.push_back(pos);
    m.frames_.push_back(frame);
  }

  // Waypoints: start, every spacing, each segment boundary, end.
  std::vector<double> ws{0.0, offset};
  for (double w = options.waypoint_spacing; w < offset; w += options.waypoint_spacing) {
    ws.push_back(w);
  }
  std::vector<double> boundaries;
  for (std::size_t i = 1; i < m.segments_.size(); ++i) {
    boundaries.push_back(m.segments_[i].begin);
  }
  std::sort(ws.begin(), ws.end());
  // Drop spacing waypoints that crowd a boundary.
  std::vector<double> merged;
  for (double w : ws) {
    const bool crowded = std::any_of(boundaries.begin(), boundaries.end(), [&](double b) {
      return std::abs(b - w) < options.min_waypoint_gap;
    });
    if (!crowded) merged.push_back(w);
  }
  merged.insert(merged.end(), boundaries.begin(), boundaries.end());
  std::sort(merged.begin(), merged.end());
  std::vector<double> unique;
  for (double w : merged) {
    if (unique.empty() || w - unique.back() >= options.min_waypoint_gap) {
      unique.push_back(w);
    } else if (w == offset) {
      unique.back() = offset;
    }
  }
  for (double w : unique) m.waypoints_.push_back({w, m.position_at(w)});

  m.build_chunks();
  return m;
}

void ColonModel::build_chunks() {
  chunks_.clear();
  const std::size_t chords = points_.size() - 1;
  for (std::size_t first = 0; first < chords; first += kChunkChords) {
    Chunk c;
    c.first = first;
    c.last = std::min(chords, first + kChunkChords);
    Vec3 lo = points_[first];
    Vec3 hi = points_[first];
    for (std::size_t i = first; i <= c.last; ++i) {
      lo = lo.cwiseMin(points_[i]);
      hi = hi.cwiseMax(points_[i]);
    }
    c.center = 0.5 * (lo + hi);
    for (std::size_t i = first; i <= c.last; ++i) {
      c.radius = std::max(c.radius, (points_[i] - c.center).norm());
    }
    chunks_.push_back(c);
  }
}

std::size_t ColonModel::sample_index(double s) const {
  if (s <= 0.0) return 0;
  auto it = std::upper_bound(arclengths_.begin(), arclengths_.end(), s);
  auto idx = static_cast<std::size_t>(it - arclengths_.begin());
  return std::min(idx == 0 ? 0 : idx - 1, arclengths_.size() - 2);
}

Vec3 ColonModel::position_at(double s) const {
  if (s <= 0.0) return points_.front() + s * frames_.front().tangent;
  if (s >= total_length_) {
    return points_.back() + (s - total_length_) * frames_.back().tangent;
  }
  const std::size_t i = sample_index(s);
  const double t = (s - arclengths_[i]) / (arclengths_[i + 1] - arclengths_[i]);
  return (1.0 - t) * points_[i] + t * points_[i + 1];
}

PathFrame ColonModel::frame_at(double s) const {
  if (s <= 0.0) return frames_.front();
  if (s >= total_length_) return frames_.back();
  const std::size_t i = sample_index(s);
  const double t = (s - arclengths_[i]) / (arclengths_[i + 1] - arclengths_[i]);
  PathFrame f;
  f.tangent = (1.0 - t) * frames_[i].tangent + t * frames_[i + 1].tangent;
  f.up = (1.0 - t) * frames_[i].up + t * frames_[i + 1].up;
  orthonormalize(f);
  return f;
}

double ColonModel::radius_at(double s) const {
  s = std::clamp(s, 0.0, total_length_);
  auto it = std::upper_bound(knot_s_.begin(), knot_s_.end(), s);
  if (it == knot_s_.end()) return knot_radius_.back();
  const auto hi = static_cast<std::size_t>(it - knot_s_.begin());
  const std::size_t lo = hi - 1;
  const double t = (s - knot_s_[lo]) / (knot_s_[hi] - knot_s_[lo]);
  return (1.0 - t) * knot_radius_[lo] + t * knot_radius_[hi];
}

const std::string& ColonModel::segment_at(double s) const {
  for (const auto& seg : segments_) {
    if (s < seg.end) return seg.name;
  }
  return segments_.back().name;
}

CenterlineProjection ColonModel::project(const Vec3& p) const {
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_chord = 0;
  double best_t = 0.0;

  auto scan = [&](const Chunk& c) {
    for (std::size_t i = c.first; i < c.last; ++i) {
      const Vec3 d = points_[i + 1] - points_[i];
      const double len2 = d.squaredNorm();
      double t = len2 > 0.0 ? (p - points_[i]).dot(d) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double dist2 = (points_[i] + t * d - p).squaredNorm();
      if (dist2 < best) {
        best = dist2;
        best_chord = i;
        best_t = t;
      }
    }
  };

  // Visit the most promising chunk first so the bound prunes the rest.
  std::size_t seed_chunk = 0;
  double seed_bound = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < chunks_.size(); ++k) {
    const double lb = (p - chunks_[k].center).norm() - chunks_[k].radius;
    if (lb < seed_bound) {
      seed_bound = lb;
      seed_chunk = k;
    }
  }
  scan(chunks_[seed_chunk]);
  for (std::size_t k = 0; k < chunks_.size(); ++k) {
    if (k == seed_chunk) continue;
    const double lb = (p - chunks_[k].center).norm() - chunks_[k].radius;
    if (lb > 0.0 && lb * lb >= best) continue;
    scan(chunks_[k]);
  }

  CenterlineProjection out;
  const double s0 = arclengths_[best_chord];
  const double s1 = arclengths_[best_chord + 1];
  out.s = s0 + best_t * (s1 - s0);
  out.foot = points_[best_chord] + best_t * (points_[best_chord + 1] - points_[best_chord]);
  out.distance = std::sqrt(best);
  out.radial = out.distance;

  auto extend = [&](const Vec3& end_point, const Vec3& outward) {
    const Vec3 rel = p - end_point;
    const double along = rel.dot(outward);
    if (along > 0.0) {
      out.overshoot = along;
      out.radial = (rel - along * outward).norm();
    }
  };
  if (best_chord == 0 && best_t == 0.0) {
    extend(points_.front(), -frames_.front().tangent);
  } else if (best_chord + 2 == points_.size() && best_t == 1.0) {
    extend(points_.back(), frames_.back().tangent);
  }
  return out;
}

ColonModel ColonModel::translated(const Vec3& offset) const {
  ColonModel m = *this;
  for (auto& p : m.points_) p += offset;
  for (auto& w : m.waypoints_) w.position += offset;
  for (auto& c : m.chunks_) c.center += offset;
  return m;
}

ProximityReport wall_distance(const ColonModel& model, const Vec3& p, double threshold) {
  const CenterlineProjection proj = model.project(p);
  const double radius = model.radius_at(proj.s);
  ProximityReport r;
  r.s = proj.s;
  r.collided = proj.radial >= radius;
  r.wall_distance = r.collided ? 0.0 : radius - proj.radial;
  r.below_threshold = r.wall_distance < threshold;
  return r;
}

SegmentSpec straight_segment(std::string name, double length, double radius) {
  SegmentSpec s;
  s.name = std::move(name);
  s.length = length;
  s.radius_min = radius;
  s.radius_max = radius;
  return s;
}

std::vector<SegmentSpec> default_colon_segments() {
  using D = TurnDirection;
  std::vector<SegmentSpec> segs;
  segs.push_back({"Rectum", 63.86, {{0.6, D::Up, 45.0}}, 18.0, 24.0, 50.0});
  segs.push_back({"Sigmoid", 376.88,
                  {{0.15, D::Right, 90.0}, {0.38, D::Left, 90.0},
                   {0.62, D::Right, 90.0}, {0.85, D::Left, 90.0}},
                  12.0, 16.0, 50.0});
  segs.push_back({"Descending", 131.73, {{0.5, D::Left, 90.0}}, 13.0, 18.0, 50.0});
  segs.push_back({"Transverse", 152.95,
                  {{0.3, D::Down, 30.0}, {0.7, D::Up, 30.0}}, 15.0, 21.0, 80.0});
  segs.push_back({"Ascending", 136.44, {{0.5, D::Right, 90.0}}, 15.0, 21.0, 50.0});
  segs.push_back({"Cecum", 66.98, {{0.5, D::Down, 45.0}}, 18.0, 25.0, 50.0});
  return segs;
}

std::vector<SegmentSpec> restrict_segments(std::span<const SegmentSpec> spec,
                                           std::span<const std::string> names) {
  std::vector<SegmentSpec> out;
  for (const auto& seg : spec) {
    if (std::find(names.begin(), names.end(), seg.name) != names.end()) {
      out.push_back(seg);
    }
  }
  for (const auto& n : names) {
    if (std::none_of(spec.begin(), spec.end(), [&](const auto& s) { return s.name == n; })) {
      throw Error("unknown segment '" + n + "'");
    }
  }
  return out;
}

void validate_colon_spec(std::span<const SegmentSpec> spec) { validate(spec); }

ColonSpecFile parse_colon_spec(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(std::string("colon spec: ") + e.what());
  }

  ColonSpecFile out;
  const auto colon = tree.get_child_optional("colon");
  if (!colon) throw Error("colon spec: missing [colon] section");
  out.seed = colon->get<std::uint64_t>("seed", 0);
  out.options.waypoint_spacing = colon->get<double>("waypoint_spacing", out.options.waypoint_spacing);
  out.options.sample_step = colon->get<double>("sample_step", out.options.sample_step);
  out.options.radius_knot_spacing =
      colon->get<double>("radius_knot_spacing", out.options.radius_knot_spacing);
  out.options.min_waypoint_gap =
      colon->get<double>("min_waypoint_gap", out.options.min_waypoint_gap);

  std::vector<std::string> order;
  const std::string list = colon->get<std::string>("segments", "");
  boost::algorithm::split(order, list, boost::is_any_of(","));
  for (auto& n : order) boost::algorithm::trim(n);
  order.erase(std::remove(order.begin(), order.end(), ""), order.end());
  if (order.empty()) throw Error("colon spec: [colon] segments list is empty");

  for (const auto& name : order) {
    const auto sec = tree.get_child_optional(pt::ptree::path_type(name, '\0'));
    if (!sec) throw Error("colon spec: missing section [" + name + "]");
    SegmentSpec seg;
    seg.name = name;
    seg.length = parse_number(sec->get<std::string>("length", "0"), name + ".length");
    seg.radius_min = parse_number(sec->get<std::string>("radius_min", "15"), name + ".radius_min");
    seg.radius_max =
        parse_number(sec->get<std::string>("radius_max", std::to_string(seg.radius_min)),
                     name + ".radius_max");
    seg.bend_radius = parse_number(sec->get<std::string>("bend_radius", "50"), name + ".bend_radius");
    std::vector<std::string> turns;
    const std::string turn_list = sec->get<std::string>("turns", "");
    boost::algorithm::split(turns, turn_list, boost::is_any_of(";"));
    for (auto& t : turns) {
      boost::algorithm::trim(t);
      if (t.empty()) continue;
      std::istringstream ts(t);
      std::string frac, dir, angle;
      if (!(ts >> frac >> dir >> angle)) {
        throw Error("colon spec: bad turn '" + t + "' in [" + name + "]");
      }
      seg.turns.push_back({parse_number(frac, name + ".turns"), parse_turn_direction(dir),
                           parse_number(angle, name + ".turns")});
    }
    out.segments.push_back(std::move(seg));
  }
  validate(out.segments);
  return out;
}

ColonSpecFile load_colon_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open colon spec " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_colon_spec(buf.str());
}

std::string format_colon_spec(const ColonSpecFile& spec) {
  auto num = [](double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  std::ostringstream out;
  out << "[colon]\nseed = " << spec.seed << "\nsegments = ";
  for (std::size_t i = 0; i < spec.segments.size(); ++i) {
    out << (i ? ", " : "") << spec.segments[i].name;
  }
  out << "\nwaypoint_spacing = " << num(spec.options.waypoint_spacing)
      << "\nsample_step = " << num(spec.options.sample_step)
      << "\nradius_knot_spacing = " << num(spec.options.radius_knot_spacing)
      << "\nmin_waypoint_gap = " << num(spec.options.min_waypoint_gap) << "\n";
  for (const auto& seg : spec.segments) {
    out << "\n[" << seg.name << "]\nlength = " << num(seg.length)
        << "\nradius_min = " << num(seg.radius_min) << "\nradius_max = " << num(seg.radius_max)
        << "\nbend_radius = " << num(seg.bend_radius) << "\nturns = ";
    for (std::size_t i = 0; i < seg.turns.size(); ++i) {
      out << (i ? "; " : "") << num(seg.turns[i].at_fraction) << ' '
          << to_string(seg.turns[i].direction) << ' ' << num(seg.turns[i].angle_deg);
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace hippo
