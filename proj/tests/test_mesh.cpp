#include <cmath>
#include <random>
#include <map>
#include <set>
#include <sstream>

#include <gtest/gtest.h>

#include "helioset/mesh.hpp"

using namespace helioset;

namespace {

TriMesh single_triangle(Point2 a, Point2 b, Point2 c) {
    TriMesh m;
    m.nodes = {a, b, c};
    m.triangles = {{0, 1, 2}};
    m.on_boundary = {1, 1, 1};
    return m;
}

double factorial(int n) { return std::tgamma(n + 1.0); }

// integral of l0^a l1^b l2^c over a triangle of area A
double bary_monomial(double area, int a, int b, int c) {
    return 2.0 * area * factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 2);
}

}  // namespace

TEST(Mesh, NodeCountNearReference) {
    const auto m = generate_disk_mesh({1, 1}, 2.0, 2.0 / 26.0);
    EXPECT_EQ(m.node_count(), 2107u);
    EXPECT_NEAR(static_cast<double>(m.node_count()), 2161.0, 0.1 * 2161.0);
}

TEST(Mesh, SmallMeshInvariants) {
    const auto m = generate_disk_mesh({0, 0}, 1.0, 0.5);
    for (std::size_t t = 0; t < m.triangle_count(); ++t) EXPECT_GT(m.signed_area(t), 0.0);
    const auto b = m.boundary_nodes();
    EXPECT_FALSE(b.empty());
    for (int i : b) EXPECT_NEAR(norm(m.nodes[i]), 1.0, 1e-14);
    for (std::size_t i = 0; i < m.node_count(); ++i) {
        if (!m.on_boundary[i]) {
            EXPECT_LT(norm(m.nodes[i]), 1.0 - 1e-9);
        }
    }
}

TEST(Mesh, EveryEdgeSharedOrOnBoundary) {
    const auto m = generate_disk_mesh({1, 1}, 2.0, 0.3);
    std::map<std::pair<int, int>, int> edges;
    for (const auto& t : m.triangles) {
        for (int k = 0; k < 3; ++k) {
            int a = t[k], b = t[(k + 1) % 3];
            edges[{std::min(a, b), std::max(a, b)}]++;
        }
    }
    for (const auto& [e, n] : edges) {
        EXPECT_LE(n, 2);
        if (n == 1) {
            EXPECT_TRUE(m.on_boundary[e.first] && m.on_boundary[e.second]);
        }
    }
    // Euler characteristic of a disk
    const long v = static_cast<long>(m.node_count()), f = static_cast<long>(m.triangle_count());
    EXPECT_EQ(v - static_cast<long>(edges.size()) + f, 1);
}

TEST(Mesh, AreaConvergesToDisk) {
    const double R = 2.0;
    const auto m = generate_disk_mesh({1, 1}, R, 0.1 * R);
    EXPECT_NEAR(m.total_area(), pi * R * R, 0.02 * pi * R * R);
    const auto fine = generate_disk_mesh({1, 1}, R, 0.05 * R);
    EXPECT_LT(std::fabs(fine.total_area() - pi * R * R), std::fabs(m.total_area() - pi * R * R));
}

TEST(Mesh, RefinementAtLeastTriplesNodes) {
    for (double h : {0.5, 0.3, 0.2, 0.1}) {
        const auto a = generate_disk_mesh({0, 0}, 2.0, h);
        const auto b = generate_disk_mesh({0, 0}, 2.0, h / 2);
        EXPECT_GE(b.node_count(), 3 * a.node_count()) << h;
    }
}

TEST(Mesh, InvalidParameters) {
    EXPECT_THROW(generate_disk_mesh({0, 0}, 0.0, 0.1), InvalidParameter);
    EXPECT_THROW(generate_disk_mesh({0, 0}, -1.0, 0.1), InvalidParameter);
    EXPECT_THROW(generate_disk_mesh({0, 0}, 1.0, 0.0), InvalidParameter);
    EXPECT_THROW(generate_disk_mesh({0, 0}, 1.0, -0.1), InvalidParameter);
}

TEST(Mesh, CentroidRule) {
    const auto m = single_triangle({0, 0}, {2, 0}, {0, 1});
    const auto q = build_quadrature(m, 1);
    ASSERT_EQ(q.size(), 1u);
    EXPECT_NEAR(q.points[0].x, 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(q.points[0].y, 1.0 / 3.0, 1e-15);
    EXPECT_NEAR(q.weights[0], 1.0, 1e-15);
    EXPECT_THROW(build_quadrature(m, 2), InvalidParameter);
}

TEST(Mesh, FirstMomentExact) {
    const Point2 a{0.3, -0.2}, b{1.7, 0.4}, c{0.5, 1.9};
    const auto m = single_triangle(a, b, c);
    const auto q = build_quadrature(m, 3);
    const double area = 0.5 * cross(a, b, c);
    double ix = 0, iy = 0;
    for (std::size_t i = 0; i < q.size(); ++i) {
        ix += q.weights[i] * q.points[i].x;
        iy += q.weights[i] * q.points[i].y;
    }
    EXPECT_NEAR(ix, area * (a.x + b.x + c.x) / 3.0, 1e-14);
    EXPECT_NEAR(iy, area * (a.y + b.y + c.y) / 3.0, 1e-14);
}

TEST(Mesh, WeightsSumToArea) {
    const auto m = generate_disk_mesh({1, 1}, 2.0, 0.25);
    for (int order : {1, 3, 6}) {
        const auto q = build_quadrature(m, order);
        double s = 0;
        for (double w : q.weights) s += w;
        EXPECT_NEAR(s, m.total_area(), 1e-12 * m.total_area());
    }
}

TEST(Mesh, RandomQuadraticsExact) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
        Point2 a{u(rng), u(rng)}, b{u(rng), u(rng)}, c{u(rng), u(rng)};
        if (std::fabs(cross(a, b, c)) < 0.1) continue;
        if (cross(a, b, c) < 0) std::swap(b, c);
        const auto m = single_triangle(a, b, c);
        const double area = 0.5 * cross(a, b, c);
        // random quadratic in barycentric monomials of total degree 2
        const double c0 = u(rng), c1 = u(rng), c2 = u(rng), c3 = u(rng), c4 = u(rng), c5 = u(rng);
        const double exact = c0 * bary_monomial(area, 2, 0, 0) + c1 * bary_monomial(area, 0, 2, 0) +
                             c2 * bary_monomial(area, 0, 0, 2) + c3 * bary_monomial(area, 1, 1, 0) +
                             c4 * bary_monomial(area, 0, 1, 1) + c5 * bary_monomial(area, 1, 0, 1);
        for (int order : {3, 6}) {
            const auto q = build_quadrature(m, order);
            double s = 0;
            for (std::size_t i = 0; i < q.size(); ++i) {
                const auto& l = q.bary[i];
                s += q.weights[i] * (c0 * l[0] * l[0] + c1 * l[1] * l[1] + c2 * l[2] * l[2] + c3 * l[0] * l[1] +
                                     c4 * l[1] * l[2] + c5 * l[0] * l[2]);
            }
            EXPECT_NEAR(s, exact, 1e-12 * std::max(1.0, std::fabs(exact))) << order;
        }
        // order 6 is also exact for quartics
        const auto q6 = build_quadrature(m, 6);
        double s = 0;
        for (std::size_t i = 0; i < q6.size(); ++i) s += q6.weights[i] * std::pow(q6.bary[i][0], 2) * std::pow(q6.bary[i][1], 2);
        EXPECT_NEAR(s, bary_monomial(area, 2, 2, 0), 1e-13);
    }
}

TEST(Mesh, QuadraturePointsMatchBarycentric) {
    const auto m = generate_disk_mesh({1, 1}, 2.0, 0.5);
    const auto q = build_quadrature(m, 3);
    for (std::size_t i = 0; i < q.size(); ++i) {
        const auto& t = m.triangles[q.owner[i]];
        Point2 p{0, 0};
        for (int k = 0; k < 3; ++k) p = p + q.bary[i][k] * m.nodes[t[k]];
        EXPECT_NEAR(p.x, q.points[i].x, 1e-14);
        EXPECT_NEAR(p.y, q.points[i].y, 1e-14);
    }
}

TEST(Mesh, ReferenceMassMatrix) {
    const auto m = single_triangle({0, 0}, {1, 0}, {0, 1});
    const auto fem = assemble_mass_stiffness(m);
    const Eigen::MatrixXd mass(fem.mass);
    const double area = 0.5;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) EXPECT_NEAR(mass(i, j), area / 12.0 * (i == j ? 2.0 : 1.0), 1e-15);
    }
    const Eigen::MatrixXd k(fem.stiffness);
    EXPECT_NEAR(k(0, 0), 1.0, 1e-15);
    EXPECT_NEAR(k(1, 1), 0.5, 1e-15);
    EXPECT_NEAR(k(0, 1), -0.5, 1e-15);
    EXPECT_NEAR(k(1, 2), 0.0, 1e-15);
}

TEST(Mesh, PartitionOfUnity) {
    const auto m = generate_disk_mesh({1, 1}, 2.0, 0.2);
    const auto fem = assemble_mass_stiffness(m);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m.node_count()));
    EXPECT_NEAR(one.dot(fem.mass * one), m.total_area(), 1e-11);
    EXPECT_LT((fem.stiffness * one).cwiseAbs().maxCoeff(), 1e-12);
    const Eigen::MatrixXd md(fem.mass), kd(fem.stiffness);
    EXPECT_LT((md - md.transpose()).cwiseAbs().maxCoeff(), 1e-16);
    EXPECT_LT((kd - kd.transpose()).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(Mesh, LumpedMassIsRowSum) {
    const auto m = generate_disk_mesh({1, 1}, 2.0, 0.3);
    const auto fem = assemble_mass_stiffness(m);
    const auto lumped = lumped_mass(fem.mass);
    const Eigen::VectorXd one = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(m.node_count()));
    const Eigen::VectorXd rows = fem.mass * one;
    for (Eigen::Index i = 0; i < lumped.size(); ++i) {
        EXPECT_GT(lumped[i], 0.0);
        EXPECT_NEAR(lumped[i], rows[i], 1e-15);
    }
    // nodal area: one third of the adjacent triangle areas
    Eigen::VectorXd third = Eigen::VectorXd::Zero(lumped.size());
    for (std::size_t t = 0; t < m.triangle_count(); ++t) {
        for (int v : m.triangles[t]) third[v] += m.signed_area(t) / 3.0;
    }
    EXPECT_LT((third - lumped).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Mesh, DegenerateTriangle) {
    const auto m = single_triangle({0, 0}, {1, 0}, {2, 0});
    EXPECT_THROW(assemble_mass_stiffness(m), GeometryError);
}

TEST(Mesh, TextRoundTrip) {
    const auto m = generate_disk_mesh({1, 1}, 2.0, 0.4);
    std::stringstream ss;
    write_mesh(ss, m);
    const auto r = read_mesh(ss);
    ASSERT_EQ(r.node_count(), m.node_count());
    ASSERT_EQ(r.triangle_count(), m.triangle_count());
    EXPECT_EQ(r.triangles, m.triangles);
    EXPECT_EQ(r.on_boundary, m.on_boundary);
    for (std::size_t i = 0; i < m.node_count(); ++i) {
        EXPECT_EQ(r.nodes[i], m.nodes[i]);
    }
    EXPECT_NEAR(r.center.x, 1.0, 1e-12);
    EXPECT_NEAR(r.radius, 2.0, 1e-12);
}

TEST(Mesh, ReadRejectsGarbage) {
    std::stringstream bad("3 1\n0 0 1\n1 0 1\n");
    EXPECT_THROW(read_mesh(bad), InvalidParameter);
    std::stringstream idx("3 1\n0 0 1\n1 0 1\n0 1 1\n0 1 7\n");
    EXPECT_THROW(read_mesh(idx), InvalidParameter);
}

TEST(Mesh, LocatorAndInterpolation) {
    const auto m = generate_disk_mesh({1, 1}, 2.0, 0.3);
    const PointLocator loc(m);
    // a linear function is reproduced exactly by interpolation
    Eigen::VectorXd f(static_cast<Eigen::Index>(m.node_count()));
    for (std::size_t i = 0; i < m.node_count(); ++i) f[i] = 2 * m.nodes[i].x - 3 * m.nodes[i].y + 0.5;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.0, 3.0);
    int found = 0;
    for (int i = 0; i < 500; ++i) {
        const Point2 p{u(rng), u(rng)};
        const auto l = loc.locate(p);
        if (dist(p, {1, 1}) > 2.0) {
            EXPECT_FALSE(l.has_value());
            continue;
        }
        if (!l) continue;  // sliver between the polygon and the circle
        ++found;
        const auto& t = m.triangles[l->triangle];
        double v = 0;
        for (int k = 0; k < 3; ++k) v += l->bary[k] * f[t[k]];
        EXPECT_NEAR(v, 2 * p.x - 3 * p.y + 0.5, 1e-12);
    }
    EXPECT_GT(found, 250);

    const auto q = build_quadrature(m, 3);
    const Eigen::VectorXd at_q = interpolation_matrix(m, q) * f;
    for (std::size_t i = 0; i < q.size(); ++i) {
        EXPECT_NEAR(at_q[i], 2 * q.points[i].x - 3 * q.points[i].y + 0.5, 1e-12);
    }
}
