#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "driveval/vehicle.hpp"

namespace driveval {

enum class TownId { A, B };

std::string_view to_string(TownId town);
TownId parse_town(std::string_view text);

enum class Command : std::uint8_t { Continue = 0, Straight = 1, Left = 2, Right = 3 };

inline constexpr std::array<Command, 4> kAllCommands = {Command::Continue, Command::Straight,
                                                        Command::Left, Command::Right};

std::string_view to_string(Command command);
Command parse_command(std::string_view text);
Eigen::Vector4d one_hot(Command command);

struct Intersection {
  int id = 0;
  Eigen::Vector2d position = Eigen::Vector2d::Zero();
};

/// A directed lane between two intersections. The polyline runs from the
/// `from` node to the `to` node, offset half a lane width to the right.
struct Segment {
  int id = 0;
  int from = 0;
  int to = 0;
  double width = 3.5;
  int opposing = 0;
  std::vector<Eigen::Vector2d> polyline;

  double length() const;
  Eigen::Vector2d direction() const;
};

struct TownMap {
  TownId town = TownId::A;
  std::uint64_t seed = 0;
  int rows = 0;
  int cols = 0;
  double block_length = 0.0;
  std::vector<Intersection> intersections;
  std::vector<Segment> segments;

  const Segment& segment(int id) const;
  const Intersection& intersection(int id) const;
  std::vector<int> outgoing(int node) const;

  /// Distance from `p` to the paved surface (both lanes of every corridor
  /// plus the intersection squares); zero on the road.
  double road_excess(const Eigen::Vector2d& p) const;
};

inline constexpr double kLaneWidth = 3.5;
inline constexpr double kConnectorRadius = 8.0;
inline constexpr double kCommandWindow = 25.0;
inline constexpr double kOffRouteDistance = 20.0;
inline constexpr std::array<double, 3> kCurvatureLookaheads = {5.0, 10.0, 20.0};

/// Town A: 4x4 grid of 100 m blocks. Town B: 3x5 grid of 80 m blocks laid
/// out mirrored along x. The layout is seed-independent; the seed is kept
/// on the map so exports identify the build.
TownMap build_town(TownId town, std::uint64_t seed);

/// Piece of a route centreline: a straight line or a circular arc.
struct PathPiece {
  enum class Kind { Line, Arc };
  Kind kind = Kind::Line;
  double s0 = 0.0;
  double length = 0.0;
  double curvature = 0.0;  // signed, left positive
  bool connector = false;
  // Line
  Eigen::Vector2d start = Eigen::Vector2d::Zero();
  Eigen::Vector2d direction = Eigen::Vector2d::UnitX();
  // Arc
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.0;
  double start_angle = 0.0;
  double sweep = 0.0;  // signed, positive counter-clockwise
};

/// Intersection crossed by a route. The last entry is the goal node.
struct RouteNode {
  int node = 0;
  double s_enter = 0.0;
  double s_node = 0.0;
  double s_exit = 0.0;
  Command turn = Command::Continue;
};

struct PathProjection {
  double s = 0.0;
  double lateral = 0.0;   // signed, left of the centreline positive
  double distance = 0.0;  // unsigned distance to the centreline
  double tangent_yaw = 0.0;
  std::size_t piece = 0;
  Eigen::Vector2d point = Eigen::Vector2d::Zero();
};

/// Ordered lanes from start to goal plus the drivable centreline through
/// them (lane polylines trimmed at intersections and joined by connectors).
class Route {
 public:
  Route() = default;
  Route(const TownMap& map, std::vector<int> segment_ids);

  const std::vector<int>& segments() const { return segments_; }
  double length() const { return length_; }
  double path_length() const { return path_length_; }
  int start_node() const { return start_node_; }
  int goal_node() const { return goal_node_; }
  const std::vector<PathPiece>& pieces() const { return pieces_; }
  const std::vector<RouteNode>& nodes() const { return nodes_; }

  PathProjection project(const Eigen::Vector2d& p) const;
  /// Point at arc length s; beyond the ends the first/last tangent is extended.
  Eigen::Vector2d point_at(double s) const;
  double yaw_at(double s) const;
  double curvature_at(double s) const;
  /// Mean curvature over [s, s + length]: heading change divided by length.
  /// The path is straight beyond its ends.
  double mean_curvature(double s, double length) const;
  /// First route node whose connector has not been left yet at arc length s.
  const RouteNode& next_node(double s) const;
  Pose start_pose() const;

 private:
  std::size_t piece_index(double s) const;

  std::vector<int> segments_;
  double length_ = 0.0;
  double path_length_ = 0.0;
  int start_node_ = 0;
  int goal_node_ = 0;
  std::vector<PathPiece> pieces_;
  std::vector<RouteNode> nodes_;
};

/// Dijkstra on segment length; equal-cost ties go to the smaller segment id.
Route plan_route(const TownMap& map, int start, int goal);

struct LaneFrame {
  double lateral_offset = 0.0;
  double heading_error = 0.0;
  std::array<double, 3> curvature_ahead{};  // mean curvature over the next 5/10/20 m
  double dist_to_intersection = 0.0;
  bool on_drivable = true;
  bool on_opposing_lane = false;
  // Extra plumbing used by the episode runner.
  double progress = 0.0;         // arc length of the projection
  double route_distance = 0.0;   // unsigned distance to the route centreline
  double road_excess = 0.0;      // metres beyond the paved surface
};

LaneFrame lane_frame(const TownMap& map, const Route& route, const Pose& pose);

/// Throws OffRoute when the pose is farther than 20 m from the route.
Command command_at(const TownMap& map, const Route& route, const Pose& pose);

/// Same as `command_at` given a precomputed frame; never throws.
Command command_from_frame(const Route& route, const LaneFrame& frame);

}  // namespace driveval
