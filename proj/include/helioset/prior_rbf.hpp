#ifndef HELIOSET_PRIOR_RBF_HPP
#define HELIOSET_PRIOR_RBF_HPP

// Parametric level set phi(x, a) = sum_s a_s exp(-|x - theta_s|^2 / (2 lambda_s^2))
// with a ~ N(0, I_J).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "helioset/common.hpp"
#include "helioset/levelset.hpp"
#include "helioset/mesh.hpp"

namespace helioset {

enum class CenterMode { mesh_vertices, grid };

struct RbfCoefficients {
    Eigen::VectorXd a;

    Eigen::Index size() const { return a.size(); }
};

inline constexpr double default_rbf_width = std::numbers::sqrt2 / 2.0;

inline double gaussian_rbf(Point2 x, Point2 center, double width) {
    return std::exp(-dist2(x, center) / (2.0 * width * width));
}

/// Centers of the expansion. Grid mode spans the bounding square of the
/// mesh disk with grid_n x grid_n points, optionally clipped to the disk.
inline std::vector<Point2> make_centers(CenterMode mode, const TriMesh& mesh, int grid_n = 5,
                                        bool clip_to_disk = false) {
    if (mode == CenterMode::mesh_vertices) return mesh.nodes;
    if (grid_n < 2) throw InvalidParameter("make_centers: grid_n must be >= 2");
    const Disk disk{mesh.center, mesh.radius};
    std::vector<Point2> out;
    const double lo_x = disk.center.x - disk.radius, lo_y = disk.center.y - disk.radius;
    const double step = 2.0 * disk.radius / (grid_n - 1);
    for (int j = 0; j < grid_n; ++j) {
        for (int i = 0; i < grid_n; ++i) {
            const Point2 p{lo_x + i * step, lo_y + j * step};
            if (!clip_to_disk || disk.contains_closed(p)) out.push_back(p);
        }
    }
    return out;
}

/// sqrt(2)/2 for the mesh-vertex layout and the 5 x 5 grid; otherwise
/// 0.7 times the grid spacing.
inline double default_width(CenterMode mode, const TriMesh& mesh, int grid_n) {
    if (mode == CenterMode::mesh_vertices || grid_n == 5) return default_rbf_width;
    return 0.7 * 2.0 * mesh.radius / (grid_n - 1);
}

class RbfBasis {
public:
    /// Precomputes P(i, s) = p(x_i, theta_s; lambda_s) at the given evaluation points.
    RbfBasis(std::vector<Point2> centers, std::vector<double> widths, const std::vector<Point2>& at)
        : centers_(std::move(centers)), widths_(std::move(widths)) {
        if (centers_.empty()) throw InvalidParameter("rbf basis: no centers");
        if (widths_.size() != centers_.size()) {
            throw DimensionMismatch("rbf basis: one width per center required");
        }
        for (double w : widths_) {
            if (!(w > 0.0) || !std::isfinite(w)) throw InvalidParameter("rbf basis: widths must be positive");
        }
        eval_.resize(static_cast<Eigen::Index>(at.size()), static_cast<Eigen::Index>(centers_.size()));
        for (std::size_t s = 0; s < centers_.size(); ++s) {
            for (std::size_t i = 0; i < at.size(); ++i) {
                eval_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(s)) =
                    gaussian_rbf(at[i], centers_[s], widths_[s]);
            }
        }
    }

    RbfBasis(std::vector<Point2> centers, double width, const std::vector<Point2>& at)
        : RbfBasis(centers, std::vector<double>(centers.size(), width), at) {}

    std::size_t size() const { return centers_.size(); }
    const std::vector<Point2>& centers() const { return centers_; }
    const std::vector<double>& widths() const { return widths_; }
    const Eigen::MatrixXd& eval_matrix() const { return eval_; }
    double max_width() const { return *std::max_element(widths_.begin(), widths_.end()); }

    /// Direct evaluation at an arbitrary point.
    double evaluate(Point2 x, const RbfCoefficients& a) const {
        check(a);
        double sum = 0.0;
        for (std::size_t s = 0; s < centers_.size(); ++s) {
            sum += a.a[static_cast<Eigen::Index>(s)] * gaussian_rbf(x, centers_[s], widths_[s]);
        }
        return sum;
    }

    void check(const RbfCoefficients& a) const {
        if (a.size() != static_cast<Eigen::Index>(centers_.size())) {
            throw DimensionMismatch("rbf: coefficient vector has " + std::to_string(a.size()) +
                                    " entries, basis has " + std::to_string(centers_.size()));
        }
    }

private:
    std::vector<Point2> centers_;
    std::vector<double> widths_;
    Eigen::MatrixXd eval_;
};

inline NodalField rbf_eval(const RbfBasis& basis, const RbfCoefficients& a) {
    basis.check(a);
    return {basis.eval_matrix() * a.a};
}

/// C(x, y) = sum_s exp(-(|x - theta_s|^2 + |y - theta_s|^2) / (2 lambda_s^2)).
inline double rbf_covariance(Point2 x, Point2 y, const RbfBasis& basis) {
    double sum = 0.0;
    for (std::size_t s = 0; s < basis.size(); ++s) {
        const double w = basis.widths()[s];
        const double dx = dist2(x, basis.centers()[s]), dy = dist2(y, basis.centers()[s]);
        sum += std::exp(-(dx + dy) / (2.0 * w * w));
    }
    return sum;
}

inline RbfCoefficients sample_coefficients(std::size_t j, Rng& rng) {
    std::normal_distribution<double> normal;
    RbfCoefficients c{Eigen::VectorXd(static_cast<Eigen::Index>(j))};
    for (Eigen::Index s = 0; s < c.a.size(); ++s) c.a[s] = normal(rng);
    return c;
}

/// CSV `s,x,y,lambda`.
inline void write_centers_csv(std::ostream& out, const RbfBasis& basis) {
    std::ostringstream buf;
    buf.precision(17);
    buf << "s,x,y,lambda\n";
    for (std::size_t s = 0; s < basis.size(); ++s) {
        buf << s << ',' << basis.centers()[s].x << ',' << basis.centers()[s].y << ','
            << basis.widths()[s] << '\n';
    }
    out << buf.str();
}

}  // namespace helioset

#endif  // HELIOSET_PRIOR_RBF_HPP
