#ifndef HELIOSET_MESH_HPP
#define HELIOSET_MESH_HPP

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "helioset/common.hpp"

namespace helioset {

using Triangle = std::array<int, 3>;
using SparseMatrix = Eigen::SparseMatrix<double>;

/// Triangulation of the disk computational domain.
struct TriMesh {
    std::vector<Point2> nodes;
    std::vector<Triangle> triangles;
    std::vector<char> on_boundary;  // one flag per node
    double h = 0.0;
    Point2 center;
    double radius = 0.0;

    std::size_t node_count() const { return nodes.size(); }
    std::size_t triangle_count() const { return triangles.size(); }

    std::vector<int> boundary_nodes() const {
        std::vector<int> out;
        for (std::size_t i = 0; i < on_boundary.size(); ++i) {
            if (on_boundary[i]) out.push_back(static_cast<int>(i));
        }
        return out;
    }

    double signed_area(std::size_t t) const {
        const auto& tri = triangles[t];
        return 0.5 * cross(nodes[tri[0]], nodes[tri[1]], nodes[tri[2]]);
    }

    double total_area() const {
        double a = 0.0;
        for (std::size_t t = 0; t < triangles.size(); ++t) a += signed_area(t);
        return a;
    }
};

namespace detail {

inline void add_oriented(std::vector<Triangle>& out, const std::vector<Point2>& nodes, int a, int b,
                         int c) {
    if (cross(nodes[a], nodes[b], nodes[c]) < 0.0) std::swap(b, c);
    out.push_back({a, b, c});
}

}  // namespace detail

/// Structured disk mesh: ring i (1..n) sits at radius i*R/n and carries 6i
/// equally spaced nodes; consecutive rings are stitched by an angular merge.
/// Node count is 1 + 3n(n+1) with n = ceil(R/h).
inline TriMesh generate_disk_mesh(Point2 center, double radius, double h) {
    if (!(radius > 0.0) || !std::isfinite(radius)) {
        throw InvalidParameter("generate_disk_mesh: radius must be positive");
    }
    if (!(h > 0.0) || !(h < radius)) {
        throw InvalidParameter("generate_disk_mesh: h must satisfy 0 < h < radius");
    }
    const int rings = std::max(1, static_cast<int>(std::ceil(radius / h - 1e-9)));

    TriMesh mesh;
    mesh.h = h;
    mesh.center = center;
    mesh.radius = radius;
    mesh.nodes.reserve(1 + 3 * static_cast<std::size_t>(rings) * (rings + 1));
    mesh.nodes.push_back(center);
    for (int i = 1; i <= rings; ++i) {
        const int count = 6 * i;
        // The outermost ring is placed at exactly `radius`.
        const double r = (i == rings) ? radius : radius * i / rings;
        for (int j = 0; j < count; ++j) {
            const double theta = 2.0 * pi * j / count;
            mesh.nodes.push_back({center.x + r * std::cos(theta), center.y + r * std::sin(theta)});
        }
    }
    mesh.on_boundary.assign(mesh.nodes.size(), 0);
    const int outer_start = 1 + 3 * rings * (rings - 1);
    for (std::size_t k = outer_start; k < mesh.nodes.size(); ++k) mesh.on_boundary[k] = 1;

    auto& tris = mesh.triangles;
    tris.reserve(6 * static_cast<std::size_t>(rings) * rings);
    for (int j = 0; j < 6; ++j) {
        detail::add_oriented(tris, mesh.nodes, 0, 1 + j, 1 + (j + 1) % 6);
    }
    for (int i = 2; i <= rings; ++i) {
        const int a = 6 * (i - 1), b = 6 * i;
        const int in0 = 1 + 3 * (i - 1) * (i - 2);
        const int out0 = 1 + 3 * i * (i - 1);
        int p = 0, q = 0;
        while (p < a || q < b) {
            // Advance along the ring whose next node has the smaller angle;
            // (q+1)/b <= (p+1)/a compared in integers.
            const bool take_outer = q < b && (p == a || (q + 1) * a <= (p + 1) * b);
            if (take_outer) {
                detail::add_oriented(tris, mesh.nodes, in0 + p % a, out0 + q, out0 + (q + 1) % b);
                ++q;
            } else {
                detail::add_oriented(tris, mesh.nodes, in0 + p, out0 + q % b, in0 + (p + 1) % a);
                ++p;
            }
        }
    }
    return mesh;
}

/// Reads the plain-text mesh format: `NV NT`, NV lines `x y flag`,
/// NT lines `i j k` (0-based).
inline TriMesh read_mesh(std::istream& in) {
    std::size_t nv = 0, nt = 0;
    if (!(in >> nv >> nt)) throw InvalidParameter("read_mesh: missing header `NV NT`");
    TriMesh mesh;
    mesh.nodes.resize(nv);
    mesh.on_boundary.resize(nv);
    for (std::size_t i = 0; i < nv; ++i) {
        int flag = 0;
        if (!(in >> mesh.nodes[i].x >> mesh.nodes[i].y >> flag) || (flag != 0 && flag != 1)) {
            throw InvalidParameter("read_mesh: bad node line " + std::to_string(i + 2));
        }
        mesh.on_boundary[i] = static_cast<char>(flag);
    }
    mesh.triangles.resize(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        auto& tri = mesh.triangles[t];
        if (!(in >> tri[0] >> tri[1] >> tri[2])) {
            throw InvalidParameter("read_mesh: bad triangle line " + std::to_string(nv + t + 2));
        }
        for (int v : tri) {
            if (v < 0 || static_cast<std::size_t>(v) >= nv) {
                throw InvalidParameter("read_mesh: triangle " + std::to_string(t) +
                                       " references a missing node");
            }
        }
        if (mesh.signed_area(t) < 0.0) std::swap(tri[1], tri[2]);
    }
    // Disk geometry recovered from the boundary ring.
    const auto boundary = mesh.boundary_nodes();
    if (!boundary.empty()) {
        Point2 c;
        for (int b : boundary) c = c + mesh.nodes[b];
        c = (1.0 / boundary.size()) * c;
        double r = 0.0;
        for (int b : boundary) r += dist(c, mesh.nodes[b]);
        mesh.center = c;
        mesh.radius = r / boundary.size();
    }
    double hmax = 0.0;
    for (const auto& tri : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            hmax = std::max(hmax, dist(mesh.nodes[tri[e]], mesh.nodes[tri[(e + 1) % 3]]));
        }
    }
    mesh.h = hmax;
    return mesh;
}

inline void write_mesh(std::ostream& out, const TriMesh& mesh) {
    std::ostringstream buf;
    buf.precision(17);
    buf << mesh.nodes.size() << ' ' << mesh.triangles.size() << '\n';
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        buf << mesh.nodes[i].x << ' ' << mesh.nodes[i].y << ' '
            << static_cast<int>(mesh.on_boundary[i]) << '\n';
    }
    for (const auto& t : mesh.triangles) buf << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    out << buf.str();
}

// ---------------------------------------------------------------------------
// Quadrature

struct QuadratureRule {
    std::vector<Point2> points;
    std::vector<double> weights;
    std::vector<int> owner;
    std::vector<std::array<double, 3>> bary;  // barycentric coordinates in the owner

    std::size_t size() const { return points.size(); }
};

namespace detail {

struct ReferenceRule {
    std::vector<std::array<double, 3>> bary;
    std::vector<double> weights;  // fractions of the triangle area
};

inline ReferenceRule reference_rule(int order) {
    switch (order) {
        case 1:
            return {{{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}}, {1.0}};
        case 3:
            return {{{2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0},
                     {1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0},
                     {1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0}},
                    {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}};
        case 6: {
            // Dunavant degree-4 rule.
            constexpr double a1 = 0.445948490915964886318329253883;
            constexpr double b1 = 1.0 - 2.0 * a1;
            constexpr double w1 = 0.223381589678011465944827151656;
            constexpr double a2 = 0.091576213509770743459571463402202;
            constexpr double b2 = 1.0 - 2.0 * a2;
            constexpr double w2 = 0.109951743655321867388506181677;
            return {{{b1, a1, a1}, {a1, b1, a1}, {a1, a1, b1},
                     {b2, a2, a2}, {a2, b2, a2}, {a2, a2, b2}},
                    {w1, w1, w1, w2, w2, w2}};
        }
        default:
            throw InvalidParameter("build_quadrature: order must be 1, 3 or 6 (got " +
                                   std::to_string(order) + ")");
    }
}

}  // namespace detail

/// Gaussian rule per triangle; order is the number of points per triangle
/// (1: degree 1, 3: degree 2, 6: degree 4).
inline QuadratureRule build_quadrature(const TriMesh& mesh, int order = 3) {
    const auto ref = detail::reference_rule(order);
    const std::size_t per = ref.weights.size();
    QuadratureRule rule;
    rule.points.reserve(mesh.triangle_count() * per);
    rule.weights.reserve(mesh.triangle_count() * per);
    rule.owner.reserve(mesh.triangle_count() * per);
    rule.bary.reserve(mesh.triangle_count() * per);
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Point2 p0 = mesh.nodes[tri[0]], p1 = mesh.nodes[tri[1]], p2 = mesh.nodes[tri[2]];
        const double area = mesh.signed_area(t);
        for (std::size_t k = 0; k < per; ++k) {
            const auto& l = ref.bary[k];
            rule.points.push_back({l[0] * p0.x + l[1] * p1.x + l[2] * p2.x,
                                   l[0] * p0.y + l[1] * p1.y + l[2] * p2.y});
            rule.weights.push_back(ref.weights[k] * area);
            rule.owner.push_back(static_cast<int>(t));
            rule.bary.push_back(l);
        }
    }
    return rule;
}

/// Sparse Q x nodes matrix evaluating the linear interpolant at quadrature points.
inline SparseMatrix interpolation_matrix(const TriMesh& mesh, const QuadratureRule& rule) {
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(3 * rule.size());
    for (std::size_t q = 0; q < rule.size(); ++q) {
        const auto& tri = mesh.triangles[rule.owner[q]];
        for (int v = 0; v < 3; ++v) trips.emplace_back(static_cast<int>(q), tri[v], rule.bary[q][v]);
    }
    SparseMatrix m(static_cast<Eigen::Index>(rule.size()),
                   static_cast<Eigen::Index>(mesh.node_count()));
    m.setFromTriplets(trips.begin(), trips.end());
    return m;
}

// ---------------------------------------------------------------------------
// Linear finite elements

struct FemMatrices {
    SparseMatrix mass;
    SparseMatrix stiffness;
};

inline FemMatrices assemble_mass_stiffness(const TriMesh& mesh) {
    std::vector<Eigen::Triplet<double>> mt, kt;
    mt.reserve(9 * mesh.triangle_count());
    kt.reserve(9 * mesh.triangle_count());
    for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double area = mesh.signed_area(t);
        if (area < 1e-14) {
            throw GeometryError("assemble_mass_stiffness: degenerate triangle " + std::to_string(t));
        }
        // grad(hat_i) = (y_j - y_k, x_k - x_j) / (2A) for cyclic (i, j, k)
        std::array<double, 3> gx{}, gy{};
        for (int i = 0; i < 3; ++i) {
            const Point2 pj = mesh.nodes[tri[(i + 1) % 3]], pk = mesh.nodes[tri[(i + 2) % 3]];
            gx[i] = (pj.y - pk.y) / (2.0 * area);
            gy[i] = (pk.x - pj.x) / (2.0 * area);
        }
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                mt.emplace_back(tri[i], tri[j], area / 12.0 * (i == j ? 2.0 : 1.0));
                kt.emplace_back(tri[i], tri[j], area * (gx[i] * gx[j] + gy[i] * gy[j]));
            }
        }
    }
    const auto n = static_cast<Eigen::Index>(mesh.node_count());
    FemMatrices out{SparseMatrix(n, n), SparseMatrix(n, n)};
    out.mass.setFromTriplets(mt.begin(), mt.end());
    out.stiffness.setFromTriplets(kt.begin(), kt.end());
    return out;
}

/// Row sums of the consistent mass matrix.
inline Eigen::VectorXd lumped_mass(const SparseMatrix& mass) {
    return mass * Eigen::VectorXd::Ones(mass.cols());
}

// ---------------------------------------------------------------------------
// Point location

struct Location {
    int triangle;
    std::array<double, 3> bary;
};

/// Bucket grid over the mesh bounding box for point-in-triangle queries.
class PointLocator {
public:
    explicit PointLocator(const TriMesh& mesh) : mesh_(&mesh) {
        if (mesh.nodes.empty()) return;
        lo_ = hi_ = mesh.nodes.front();
        for (const auto& p : mesh.nodes) {
            lo_ = {std::min(lo_.x, p.x), std::min(lo_.y, p.y)};
            hi_ = {std::max(hi_.x, p.x), std::max(hi_.y, p.y)};
        }
        cells_ = std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.triangle_count()))));
        buckets_.assign(static_cast<std::size_t>(cells_) * cells_, {});
        for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
            const auto& tri = mesh.triangles[t];
            Point2 a = mesh.nodes[tri[0]], b = a;
            for (int v : tri) {
                a = {std::min(a.x, mesh.nodes[v].x), std::min(a.y, mesh.nodes[v].y)};
                b = {std::max(b.x, mesh.nodes[v].x), std::max(b.y, mesh.nodes[v].y)};
            }
            const auto [i0, j0] = cell(a);
            const auto [i1, j1] = cell(b);
            for (int i = i0; i <= i1; ++i) {
                for (int j = j0; j <= j1; ++j) buckets_[j * cells_ + i].push_back(static_cast<int>(t));
            }
        }
    }

    std::optional<Location> locate(Point2 p) const {
        if (buckets_.empty() || p.x < lo_.x || p.y < lo_.y || p.x > hi_.x || p.y > hi_.y) {
            return std::nullopt;
        }
        const auto [i, j] = cell(p);
        for (int t : buckets_[j * cells_ + i]) {
            const auto& tri = mesh_->triangles[t];
            const Point2 a = mesh_->nodes[tri[0]], b = mesh_->nodes[tri[1]], c = mesh_->nodes[tri[2]];
            const double area2 = cross(a, b, c);
            const double l0 = cross(p, b, c) / area2;
            const double l1 = cross(a, p, c) / area2;
            const double l2 = 1.0 - l0 - l1;
            constexpr double eps = -1e-12;
            if (l0 >= eps && l1 >= eps && l2 >= eps) return Location{t, {l0, l1, l2}};
        }
        return std::nullopt;
    }

private:
    std::pair<int, int> cell(Point2 p) const {
        const double wx = std::max(hi_.x - lo_.x, 1e-300), wy = std::max(hi_.y - lo_.y, 1e-300);
        const int i = std::clamp(static_cast<int>((p.x - lo_.x) / wx * cells_), 0, cells_ - 1);
        const int j = std::clamp(static_cast<int>((p.y - lo_.y) / wy * cells_), 0, cells_ - 1);
        return {i, j};
    }

    const TriMesh* mesh_;
    Point2 lo_, hi_;
    int cells_ = 1;
    std::vector<std::vector<int>> buckets_;
};

}  // namespace helioset

#endif  // HELIOSET_MESH_HPP
