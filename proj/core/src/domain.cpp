#include "dualms/domain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dualms/error.hpp"
#include "dualms/rng.hpp"

namespace dualms {

Csg Csg::box(const Vec3& lo, const Vec3& hi) {
  Csg c;
  c.kind = Kind::Box;
  c.box_min = lo;
  c.box_max = hi;
  return c;
}

Csg Csg::sphere(const Vec3& center, double r) {
  Csg c;
  c.kind = Kind::Sphere;
  c.center = center;
  c.radius = r;
  return c;
}

Csg Csg::cylinder(const Vec3& center, const Vec3& axis, double r, double half_height) {
  Csg c;
  c.kind = Kind::Cylinder;
  c.center = center;
  c.axis = axis.normalized();
  c.radius = r;
  c.half_height = half_height;
  return c;
}

Csg Csg::unite(std::vector<Csg> parts) {
  Csg c;
  c.kind = Kind::Union;
  c.children = std::move(parts);
  return c;
}

Csg Csg::intersect(std::vector<Csg> parts) {
  Csg c;
  c.kind = Kind::Intersect;
  c.children = std::move(parts);
  return c;
}

Csg Csg::subtract(Csg base, Csg tool) {
  Csg c;
  c.kind = Kind::Difference;
  c.children.push_back(std::move(base));
  c.children.push_back(std::move(tool));
  return c;
}

bool Csg::contains(const Vec3& p) const {
  switch (kind) {
    case Kind::Box:
      return (p.array() >= box_min.array()).all() && (p.array() <= box_max.array()).all();
    case Kind::Sphere:
      return (p - center).squaredNorm() <= radius * radius;
    case Kind::Cylinder: {
      Vec3 d = p - center;
      double h = d.dot(axis);
      if (std::abs(h) > half_height) return false;
      return (d - h * axis).squaredNorm() <= radius * radius;
    }
    case Kind::Union:
      return std::any_of(children.begin(), children.end(),
                         [&](const Csg& c) { return c.contains(p); });
    case Kind::Intersect:
      return !children.empty() &&
             std::all_of(children.begin(), children.end(),
                         [&](const Csg& c) { return c.contains(p); });
    case Kind::Difference:
      return children.size() == 2 && children[0].contains(p) && !children[1].contains(p);
  }
  return false;
}

Aabb Csg::bbox() const {
  switch (kind) {
    case Kind::Box:
      return {box_min, box_max};
    case Kind::Sphere:
      return {center.array() - radius, center.array() + radius};
    case Kind::Cylinder: {
      // Tight box of a capped cylinder: half-extent along axis e_i is
      // |a_i|*h + r*sqrt(1-a_i^2).
      Vec3 ext;
      for (int i = 0; i < 3; ++i) {
        double ai = std::abs(axis[i]);
        ext[i] = ai * half_height + radius * std::sqrt(std::max(0.0, 1.0 - ai * ai));
      }
      return {center - ext, center + ext};
    }
    case Kind::Union:
    case Kind::Intersect: {
      if (children.empty()) return {};
      Aabb b = children[0].bbox();
      for (std::size_t i = 1; i < children.size(); ++i) {
        if (kind == Kind::Union) {
          b = b.merged(children[i].bbox());
        } else {
          Aabb o = children[i].bbox();
          b.min = b.min.cwiseMax(o.min);
          b.max = b.max.cwiseMin(o.max);
        }
      }
      for (int i = 0; i < 3; ++i) b.max[i] = std::max(b.max[i], b.min[i]);
      return b;
    }
    case Kind::Difference:
      return children.empty() ? Aabb{} : children[0].bbox();
  }
  return {};
}

bool VoxelGrid::contains(const Vec3& p) const {
  Vec3 g = (p - origin).cwiseQuotient(spacing);
  int i = static_cast<int>(std::floor(g.x()));
  int j = static_cast<int>(std::floor(g.y()));
  int k = static_cast<int>(std::floor(g.z()));
  if (i < 0 || j < 0 || k < 0 || i >= nx || j >= ny || k >= nz) return false;
  return occupancy[static_cast<std::size_t>((k * ny + j) * nx + i)] != 0;
}

Aabb VoxelGrid::bbox() const {
  return {origin, origin + Vec3(nx * spacing.x(), ny * spacing.y(), nz * spacing.z())};
}

DesignDomain DesignDomain::from_csg(Csg shape, std::vector<Port> ports, FlowField flow) {
  DesignDomain d;
  d.shape_kind = ShapeKind::Csg;
  d.csg = std::move(shape);
  d.bbox = d.csg.bbox();
  d.ports = std::move(ports);
  d.flow = std::move(flow);
  return d;
}

DesignDomain DesignDomain::from_voxels(VoxelGrid grid, std::vector<Port> ports, FlowField flow) {
  DesignDomain d;
  d.shape_kind = ShapeKind::Voxels;
  d.voxels = std::move(grid);
  d.bbox = d.voxels.bbox();
  d.ports = std::move(ports);
  d.flow = std::move(flow);
  return d;
}

bool DesignDomain::contains(const Vec3& p) const {
  return shape_kind == ShapeKind::Csg ? csg.contains(p) : voxels.contains(p);
}

namespace {

Vec3 polyline_tangent(const std::vector<Vec3>& pts, const Vec3& p) {
  double best = std::numeric_limits<double>::max();
  Vec3 tangent = Vec3::Zero();
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    Vec3 a = pts[i], b = pts[i + 1];
    Vec3 ab = b - a;
    double len2 = ab.squaredNorm();
    if (len2 <= 0.0) continue;
    double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
    double d2 = (a + t * ab - p).squaredNorm();
    if (d2 < best) {
      best = d2;
      tangent = ab.normalized();
    }
  }
  return tangent;
}

Vec3 uturn_direction(const FlowField& f, const Vec3& p) {
  Vec3 a = f.axis.normalized();
  Vec3 d = (f.approach - f.approach.dot(a) * a);
  if (d.norm() <= 0.0) return Vec3::Zero();
  d.normalize();
  Vec3 r = p - f.center;
  Vec3 r_perp = r - r.dot(a) * a;
  if (r.dot(d) > 0.0) {
    // Past the turn center: tangent of the circular arc through p.
    Vec3 t = r_perp.cross(a);
    if (t.norm() <= 0.0) return d;  // on the axis
    return t.normalized();
  }
  // Straight run; sign picks inflow vs outflow leg.
  double side = r.dot(a.cross(d));
  return side >= 0.0 ? d : Vec3(-d);
}

}  // namespace

Vec3 flow_at(const FlowField& field, const DesignDomain& domain, const Vec3& p) {
  if (!domain.contains(p)) return Vec3::Zero();
  Vec3 v;
  switch (field.kind) {
    case FlowField::Kind::Constant:
      v = field.direction;
      break;
    case FlowField::Kind::Polyline:
      v = polyline_tangent(field.polyline, p);
      break;
    case FlowField::Kind::UTurn:
      v = uturn_direction(field, p);
      break;
    default:
      v = Vec3::Zero();
  }
  double n = v.norm();
  return n > 0.0 ? Vec3(v / n) : Vec3::Zero();
}

std::vector<Vec3> sample_interior(const DesignDomain& domain, std::size_t n, std::uint64_t seed) {
  if (n == 0) throw Error(ErrorCode::InvalidArgument, "sample_interior: n must be >= 1");
  Rng rng(seed, rng_stream::kSampleInterior);
  const Vec3 lo = domain.bbox.min;
  const Vec3 ext = domain.bbox.extent();

  auto draw = [&]() -> Vec3 {
    return lo + Vec3(rng.uniform() * ext.x(), rng.uniform() * ext.y(), rng.uniform() * ext.z());
  };

  std::vector<Vec3> out;
  out.reserve(n);
  // Probe budget: if 1e5 consecutive draws all miss, the domain is empty.
  constexpr std::size_t kProbeBudget = 100000;
  std::size_t misses = 0;
  while (out.size() < n) {
    Vec3 p = draw();
    if (domain.contains(p)) {
      out.push_back(p);
      misses = 0;
    } else if (++misses >= kProbeBudget) {
      throw Error(ErrorCode::DomainEmpty, "no interior hit within the probe budget");
    }
  }
  return out;
}

void validate_ports(const std::vector<Port>& ports) {
  bool in[2] = {false, false}, out[2] = {false, false};
  for (const Port& p : ports) {
    int f = static_cast<int>(p.fluid);
    (p.kind == PortKind::Inlet ? in[f] : out[f]) = true;
  }
  for (int f = 0; f < 2; ++f) {
    if (!in[f] || !out[f]) {
      throw Error(ErrorCode::ConfigInvalid,
                  std::string("fluid ") + (f == 0 ? "A" : "B") +
                      " needs at least one inlet and one outlet port");
    }
  }
}

}  // namespace dualms
