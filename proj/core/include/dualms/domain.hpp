#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace dualms {

using Vec3 = Eigen::Vector3d;

struct Aabb {
  Vec3 min = Vec3::Zero();
  Vec3 max = Vec3::Zero();

  bool contains(const Vec3& p) const {
    return (p.array() >= min.array()).all() && (p.array() <= max.array()).all();
  }
  Vec3 extent() const { return max - min; }
  double diagonal() const { return extent().norm(); }
  Aabb merged(const Aabb& o) const {
    return {min.cwiseMin(o.min), max.cwiseMax(o.max)};
  }
};

/// CSG shape tree over box / sphere / capped-cylinder primitives.
struct Csg {
  enum class Kind { Box, Sphere, Cylinder, Union, Intersect, Difference };

  Kind kind;
  // Box
  Vec3 box_min, box_max;
  // Sphere
  Vec3 center;
  double radius = 0.0;
  // Cylinder: capped, centered at `center` with unit `axis` and `half_height`.
  Vec3 axis = Vec3::UnitZ();
  double half_height = 0.0;
  // Boolean nodes
  std::vector<Csg> children;

  static Csg box(const Vec3& lo, const Vec3& hi);
  static Csg sphere(const Vec3& c, double r);
  static Csg cylinder(const Vec3& c, const Vec3& axis, double r, double half_height);
  static Csg unite(std::vector<Csg> parts);
  static Csg intersect(std::vector<Csg> parts);
  static Csg subtract(Csg base, Csg tool);

  bool contains(const Vec3& p) const;
  Aabb bbox() const;
};

/// Binary occupancy grid; cell (i,j,k) covers
/// [origin + (i,j,k)*spacing, origin + (i+1,j+1,k+1)*spacing).
struct VoxelGrid {
  int nx = 0, ny = 0, nz = 0;
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();
  std::vector<std::uint8_t> occupancy;  // x-fastest

  bool contains(const Vec3& p) const;
  Aabb bbox() const;
};

enum class Fluid : std::uint8_t { A = 0, B = 1 };
enum class PortKind : std::uint8_t { Inlet, Outlet };

struct Port {
  Vec3 position;
  Fluid fluid = Fluid::A;
  PortKind kind = PortKind::Inlet;
};

/// Guidance field prescribing rough flow directions; inputs, never solved.
struct FlowField {
  enum class Kind { Constant, Polyline, UTurn };

  Kind kind = Kind::Constant;
  // Constant
  Vec3 direction = Vec3::UnitX();
  // Polyline (tangent of nearest segment)
  std::vector<Vec3> polyline;
  // U-turn: circular arcs around (center, axis) past the center plane,
  // straight runs along +/- approach before it.
  Vec3 center = Vec3::Zero();
  Vec3 axis = Vec3::UnitZ();
  Vec3 approach = Vec3::UnitY();
};

struct DesignDomain {
  enum class ShapeKind { Csg, Voxels };

  ShapeKind shape_kind = ShapeKind::Csg;
  Csg csg;
  VoxelGrid voxels;
  Aabb bbox;
  std::vector<Port> ports;
  FlowField flow;

  static DesignDomain from_csg(Csg shape, std::vector<Port> ports, FlowField flow);
  static DesignDomain from_voxels(VoxelGrid grid, std::vector<Port> ports, FlowField flow);

  bool contains(const Vec3& p) const;
};

/// Guidance vector at p: unit-length inside the domain, zero outside.
Vec3 flow_at(const FlowField& field, const DesignDomain& domain, const Vec3& p);

/// Rejection-samples exactly n interior points; bitwise reproducible for a
/// fixed seed. Throws DomainEmpty when a 1e5-sample probe finds no interior.
std::vector<Vec3> sample_interior(const DesignDomain& domain, std::size_t n, std::uint64_t seed);

/// Validates port labels (at least one inlet and outlet per fluid present in
/// `ports`). Throws ConfigInvalid otherwise.
void validate_ports(const std::vector<Port>& ports);

}  // namespace dualms
