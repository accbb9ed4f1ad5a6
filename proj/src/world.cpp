#include "driveval/world.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <tuple>

#include "driveval/error.hpp"

namespace driveval {
namespace {

Eigen::Vector2d right_of(const Eigen::Vector2d& d) { return {d.y(), -d.x()}; }
Eigen::Vector2d left_of(const Eigen::Vector2d& d) { return {-d.y(), d.x()}; }
double cross(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

std::vector<Eigen::Vector2d> sample_line(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                                         double spacing) {
  const double len = (b - a).norm();
  const int n = std::max(1, static_cast<int>(std::ceil(len / spacing)));
  std::vector<Eigen::Vector2d> pts;
  pts.reserve(n + 1);
  for (int i = 0; i <= n; ++i) pts.push_back(a + (b - a) * (static_cast<double>(i) / n));
  return pts;
}

PathPiece make_line(const Eigen::Vector2d& a, const Eigen::Vector2d& b, double s0, bool connector) {
  PathPiece p;
  p.kind = PathPiece::Kind::Line;
  p.s0 = s0;
  p.length = (b - a).norm();
  p.start = a;
  p.direction = (b - a) / p.length;
  p.connector = connector;
  return p;
}

Eigen::Vector2d piece_point(const PathPiece& p, double t) {
  if (p.kind == PathPiece::Kind::Line) return p.start + p.direction * t;
  const double sign = p.sweep >= 0.0 ? 1.0 : -1.0;
  const double angle = p.start_angle + sign * t / p.radius;
  return p.center + p.radius * Eigen::Vector2d(std::cos(angle), std::sin(angle));
}

double piece_yaw(const PathPiece& p, double t) {
  if (p.kind == PathPiece::Kind::Line) return std::atan2(p.direction.y(), p.direction.x());
  const double sign = p.sweep >= 0.0 ? 1.0 : -1.0;
  return wrap_angle(p.start_angle + sign * t / p.radius + sign * kPi / 2.0);
}

// Arc-length parameter of the point on `p` closest to `q`.
double closest_parameter(const PathPiece& p, const Eigen::Vector2d& q) {
  if (p.kind == PathPiece::Kind::Line) {
    return std::clamp((q - p.start).dot(p.direction), 0.0, p.length);
  }
  const double sign = p.sweep >= 0.0 ? 1.0 : -1.0;
  const Eigen::Vector2d r = q - p.center;
  if (r.norm() < 1e-12) return 0.0;
  const double rel = sign * wrap_angle(std::atan2(r.y(), r.x()) - p.start_angle);
  const double span = std::abs(p.sweep);
  if (rel >= 0.0 && rel <= span) return rel * p.radius;
  const double d0 = (q - piece_point(p, 0.0)).norm();
  const double d1 = (q - piece_point(p, p.length)).norm();
  return d0 <= d1 ? 0.0 : p.length;
}

}  // namespace

std::string_view to_string(TownId town) { return town == TownId::A ? "A" : "B"; }

TownId parse_town(std::string_view text) {
  if (text == "A" || text == "a") return TownId::A;
  if (text == "B" || text == "b") return TownId::B;
  throw Error(ErrorKind::InvalidArgument, "unknown town '" + std::string(text) + "'");
}

std::string_view to_string(Command command) {
  switch (command) {
    case Command::Continue: return "continue";
    case Command::Straight: return "straight";
    case Command::Left: return "left";
    case Command::Right: return "right";
  }
  return "continue";
}

Command parse_command(std::string_view text) {
  for (Command c : kAllCommands) {
    if (to_string(c) == text) return c;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown command '" + std::string(text) + "'");
}

Eigen::Vector4d one_hot(Command command) {
  Eigen::Vector4d v = Eigen::Vector4d::Zero();
  v[static_cast<int>(command)] = 1.0;
  return v;
}

double Segment::length() const {
  double len = 0.0;
  for (std::size_t i = 1; i < polyline.size(); ++i) len += (polyline[i] - polyline[i - 1]).norm();
  return len;
}

Eigen::Vector2d Segment::direction() const {
  return (polyline.back() - polyline.front()).normalized();
}

const Segment& TownMap::segment(int id) const {
  if (id < 0 || id >= static_cast<int>(segments.size())) {
    throw Error(ErrorKind::InvalidArgument, "segment id out of range");
  }
  return segments[id];
}

const Intersection& TownMap::intersection(int id) const {
  if (id < 0 || id >= static_cast<int>(intersections.size())) {
    throw Error(ErrorKind::InvalidArgument, "intersection id out of range");
  }
  return intersections[id];
}

std::vector<int> TownMap::outgoing(int node) const {
  std::vector<int> out;
  for (const auto& s : segments) {
    if (s.from == node) out.push_back(s.id);
  }
  return out;
}

double TownMap::road_excess(const Eigen::Vector2d& p) const {
  double best = std::numeric_limits<double>::infinity();
  // Lanes come in opposing pairs (2k, 2k+1); one pass per corridor.
  for (std::size_t k = 0; k + 1 < segments.size(); k += 2) {
    const Eigen::Vector2d a = intersections[segments[k].from].position;
    const Eigen::Vector2d b = intersections[segments[k].to].position;
    const double len = (b - a).norm();
    const Eigen::Vector2d d = (b - a) / len;
    const double half = segments[k].width;  // two lanes per corridor
    const double along = (p - a).dot(d);
    const double perp = std::abs(cross(d, p - a));
    const double dx = std::max({0.0, -half - along, along - len - half});
    const double dy = std::max(0.0, perp - half);
    best = std::min(best, std::hypot(dx, dy));
  }
  return best;
}

TownMap build_town(TownId town, std::uint64_t seed) {
  TownMap map;
  map.town = town;
  map.seed = seed;
  const bool is_a = town == TownId::A;
  map.rows = is_a ? 4 : 3;
  map.cols = is_a ? 4 : 5;
  map.block_length = is_a ? 100.0 : 80.0;
  const double x_sign = is_a ? 1.0 : -1.0;

  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c < map.cols; ++c) {
      map.intersections.push_back(
          {r * map.cols + c, {x_sign * c * map.block_length, r * map.block_length}});
    }
  }

  std::vector<std::pair<int, int>> corridors;
  for (int r = 0; r < map.rows; ++r) {
    for (int c = 0; c + 1 < map.cols; ++c) corridors.emplace_back(r * map.cols + c, r * map.cols + c + 1);
  }
  for (int c = 0; c < map.cols; ++c) {
    for (int r = 0; r + 1 < map.rows; ++r) corridors.emplace_back(r * map.cols + c, (r + 1) * map.cols + c);
  }

  const double half = kLaneWidth / 2.0;
  for (const auto& [a, b] : corridors) {
    for (int dir = 0; dir < 2; ++dir) {
      Segment s;
      s.id = static_cast<int>(map.segments.size());
      s.from = dir == 0 ? a : b;
      s.to = dir == 0 ? b : a;
      s.width = kLaneWidth;
      s.opposing = dir == 0 ? s.id + 1 : s.id - 1;
      const Eigen::Vector2d p = map.intersections[s.from].position;
      const Eigen::Vector2d q = map.intersections[s.to].position;
      const Eigen::Vector2d offset = right_of((q - p).normalized()) * half;
      s.polyline = sample_line(p + offset, q + offset, 1.0);
      map.segments.push_back(std::move(s));
    }
  }
  return map;
}

Route::Route(const TownMap& map, std::vector<int> segment_ids) : segments_(std::move(segment_ids)) {
  if (segments_.empty()) throw Error(ErrorKind::InvalidArgument, "route has no segments");
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const Segment& s = map.segment(segments_[i]);
    length_ += s.length();
    if (i + 1 < segments_.size()) {
      const Segment& n = map.segment(segments_[i + 1]);
      if (s.to != n.from) throw Error(ErrorKind::InvalidArgument, "route segments are not consecutive");
      if (n.id == s.opposing) throw Error(ErrorKind::InvalidArgument, "route contains a U-turn");
    }
  }
  start_node_ = map.segment(segments_.front()).from;
  goal_node_ = map.segment(segments_.back()).to;

  const double half = kLaneWidth / 2.0;
  const double trim = kConnectorRadius + half;
  double s = 0.0;
  auto push = [&](PathPiece p) {
    if (p.length < 1e-9) return;
    s += p.length;
    pieces_.push_back(std::move(p));
  };

  const std::size_t last = segments_.size() - 1;
  for (std::size_t i = 0; i <= last; ++i) {
    const Segment& seg = map.segment(segments_[i]);
    const Eigen::Vector2d u = seg.direction();
    const Eigen::Vector2d from = map.intersection(seg.from).position + right_of(u) * half;
    const Eigen::Vector2d to = map.intersection(seg.to).position + right_of(u) * half;
    const Eigen::Vector2d lane_start = i > 0 ? Eigen::Vector2d(from + u * trim) : from;
    const Eigen::Vector2d lane_end = i < last ? Eigen::Vector2d(to - u * trim) : to;
    push(make_line(lane_start, lane_end, s, false));
    if (i == last) break;

    const Segment& next = map.segment(segments_[i + 1]);
    const Eigen::Vector2d v = next.direction();
    const Eigen::Vector2d node = map.intersection(seg.to).position;
    const Eigen::Vector2d next_start = node + right_of(v) * half + v * trim;

    RouteNode rn;
    rn.node = seg.to;
    rn.s_enter = s;
    const double turn = cross(u, v);
    if (std::abs(turn) < 1e-9) {
      rn.turn = Command::Straight;
      push(make_line(lane_end, next_start, s, true));
    } else {
      rn.turn = turn > 0.0 ? Command::Left : Command::Right;
      const Eigen::Vector2d corner = node + right_of(u) * half + right_of(v) * half;
      const Eigen::Vector2d arc_in = corner - u * kConnectorRadius;
      const Eigen::Vector2d arc_out = corner + v * kConnectorRadius;
      push(make_line(lane_end, arc_in, s, true));
      PathPiece arc;
      arc.kind = PathPiece::Kind::Arc;
      arc.s0 = s;
      arc.radius = kConnectorRadius;
      arc.connector = true;
      arc.center = arc_in + (turn > 0.0 ? left_of(u) : right_of(u)) * kConnectorRadius;
      const Eigen::Vector2d r0 = arc_in - arc.center;
      arc.start_angle = std::atan2(r0.y(), r0.x());
      arc.sweep = turn > 0.0 ? kPi / 2.0 : -kPi / 2.0;
      arc.length = kConnectorRadius * kPi / 2.0;
      arc.curvature = (turn > 0.0 ? 1.0 : -1.0) / kConnectorRadius;
      push(arc);
      push(make_line(arc_out, next_start, s, true));
    }
    rn.s_exit = s;
    rn.s_node = 0.5 * (rn.s_enter + rn.s_exit);
    nodes_.push_back(rn);
  }
  path_length_ = s;
  RouteNode goal;
  goal.node = goal_node_;
  goal.s_enter = goal.s_node = goal.s_exit = path_length_;
  nodes_.push_back(goal);
}

std::size_t Route::piece_index(double s) const {
  auto it = std::upper_bound(pieces_.begin(), pieces_.end(), s,
                             [](double value, const PathPiece& p) { return value < p.s0; });
  if (it == pieces_.begin()) return 0;
  return static_cast<std::size_t>(std::distance(pieces_.begin(), it)) - 1;
}

Eigen::Vector2d Route::point_at(double s) const {
  if (s <= 0.0) {
    const PathPiece& p = pieces_.front();
    const double yaw = piece_yaw(p, 0.0);
    return piece_point(p, 0.0) + s * Eigen::Vector2d(std::cos(yaw), std::sin(yaw));
  }
  if (s >= path_length_) {
    const PathPiece& p = pieces_.back();
    const double yaw = piece_yaw(p, p.length);
    return piece_point(p, p.length) + (s - path_length_) * Eigen::Vector2d(std::cos(yaw), std::sin(yaw));
  }
  const PathPiece& p = pieces_[piece_index(s)];
  return piece_point(p, std::clamp(s - p.s0, 0.0, p.length));
}

double Route::yaw_at(double s) const {
  if (s <= 0.0) return piece_yaw(pieces_.front(), 0.0);
  if (s >= path_length_) return piece_yaw(pieces_.back(), pieces_.back().length);
  const PathPiece& p = pieces_[piece_index(s)];
  return piece_yaw(p, std::clamp(s - p.s0, 0.0, p.length));
}

double Route::curvature_at(double s) const {
  if (s < 0.0 || s >= path_length_) return 0.0;
  return pieces_[piece_index(s)].curvature;
}

double Route::mean_curvature(double s, double length) const {
  if (!(length > 0.0)) return curvature_at(s);
  const double a = std::max(s, 0.0);
  const double b = std::min(s + length, path_length_);
  double turned = 0.0;
  for (const auto& p : pieces_) {
    const double lo = std::max(a, p.s0);
    const double hi = std::min(b, p.s0 + p.length);
    if (hi > lo) turned += p.curvature * (hi - lo);
  }
  return turned / length;
}

const RouteNode& Route::next_node(double s) const {
  for (const auto& n : nodes_) {
    if (n.s_exit > s) return n;
  }
  return nodes_.back();
}

Pose Route::start_pose() const {
  const Eigen::Vector2d p = point_at(0.0);
  return {p.x(), p.y(), yaw_at(0.0)};
}

PathProjection Route::project(const Eigen::Vector2d& q) const {
  PathProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    const PathPiece& p = pieces_[i];
    const double t = closest_parameter(p, q);
    const Eigen::Vector2d pt = piece_point(p, t);
    const double dist = (q - pt).norm();
    if (dist < best.distance - 1e-12) {
      best.distance = dist;
      best.s = p.s0 + t;
      best.piece = i;
      best.point = pt;
      best.tangent_yaw = piece_yaw(p, t);
    }
  }
  const Eigen::Vector2d tangent(std::cos(best.tangent_yaw), std::sin(best.tangent_yaw));
  best.lateral = cross(tangent, q - best.point);
  return best;
}

Route plan_route(const TownMap& map, int start, int goal) {
  const int n = static_cast<int>(map.intersections.size());
  if (start < 0 || start >= n || goal < 0 || goal >= n) {
    throw Error(ErrorKind::InvalidArgument, "node id out of range");
  }
  if (start == goal) throw Error(ErrorKind::SameNode, "start and goal are the same intersection");

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> dist(n, inf);
  std::vector<int> via(n, -1);
  std::vector<bool> done(n, false);
  std::vector<double> seg_len(map.segments.size());
  for (const auto& s : map.segments) seg_len[s.id] = s.length();

  using Item = std::tuple<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[start] = 0.0;
  queue.emplace(0.0, start);
  while (!queue.empty()) {
    const auto [d, u] = queue.top();
    queue.pop();
    if (done[u]) continue;
    done[u] = true;
    for (const auto& s : map.segments) {
      if (s.from != u || done[s.to]) continue;
      const double nd = d + seg_len[s.id];
      const bool shorter = nd < dist[s.to] - 1e-9;
      const bool tie = std::abs(nd - dist[s.to]) <= 1e-9 && s.id < via[s.to];
      if (shorter || tie) {
        dist[s.to] = std::min(nd, dist[s.to]);
        via[s.to] = s.id;
        queue.emplace(dist[s.to], s.to);
      }
    }
  }
  if (via[goal] < 0) throw Error(ErrorKind::Unreachable, "goal is not reachable from start");

  std::vector<int> ids;
  for (int node = goal; node != start;) {
    const int sid = via[node];
    ids.push_back(sid);
    node = map.segments[sid].from;
  }
  std::reverse(ids.begin(), ids.end());
  return Route(map, std::move(ids));
}

LaneFrame lane_frame(const TownMap& map, const Route& route, const Pose& pose) {
  const Eigen::Vector2d p = pose.position();
  const PathProjection proj = route.project(p);
  LaneFrame f;
  f.lateral_offset = proj.lateral;
  f.heading_error = wrap_angle(pose.yaw - proj.tangent_yaw);
  for (std::size_t k = 0; k < kCurvatureLookaheads.size(); ++k) {
    f.curvature_ahead[k] = route.mean_curvature(proj.s, kCurvatureLookaheads[k]);
  }
  f.dist_to_intersection = std::clamp(route.next_node(proj.s).s_node - proj.s, 0.0, 50.0);
  f.progress = proj.s;
  f.route_distance = proj.distance;
  f.road_excess = map.road_excess(p);
  f.on_drivable = f.road_excess <= 0.0;
  const double half = kLaneWidth / 2.0;
  f.on_opposing_lane = f.on_drivable && !route.pieces()[proj.piece].connector &&
                       f.lateral_offset > half && f.lateral_offset <= 3.0 * half;
  return f;
}

Command command_from_frame(const Route& route, const LaneFrame& frame) {
  const RouteNode& next = route.next_node(frame.progress);
  if (next.node == route.goal_node() && next.s_exit >= route.path_length()) return Command::Continue;
  if (next.s_node - frame.progress <= kCommandWindow) return next.turn;
  return Command::Continue;
}

Command command_at(const TownMap& map, const Route& route, const Pose& pose) {
  const LaneFrame f = lane_frame(map, route, pose);
  if (f.route_distance > kOffRouteDistance) {
    throw Error(ErrorKind::OffRoute, "pose is more than 20 m from the route");
  }
  return command_from_frame(route, f);
}

}  // namespace driveval
