#ifndef HELIOSET_POSTERIOR_HPP
#define HELIOSET_POSTERIOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "helioset/common.hpp"
#include "helioset/levelset.hpp"
#include "helioset/mesh.hpp"

namespace helioset {

struct PosteriorSummary {
    NodalField mean_phi;
    Eigen::VectorXd mean_f;
    std::uint64_t n_samples_used = 0;
    std::vector<double> misfit_trace;
    double acceptance_rate = 0.0;
};

/// Running means of the level-set field and of the mapped source.
class PosteriorAccumulator {
public:
    PosteriorAccumulator() = default;
    PosteriorAccumulator(Eigen::Index nodes, Eigen::Index quad)
        : mean_phi_(Eigen::VectorXd::Zero(nodes)), mean_f_(Eigen::VectorXd::Zero(quad)) {}

    void add(const NodalField& phi, const Eigen::VectorXd& f) {
        if (count_ == 0 && mean_phi_.size() == 0 && mean_f_.size() == 0) {
            mean_phi_ = Eigen::VectorXd::Zero(phi.size());
            mean_f_ = Eigen::VectorXd::Zero(f.size());
        }
        if (phi.size() != mean_phi_.size() || f.size() != mean_f_.size()) {
            throw DimensionMismatch("posterior: sample dimensions do not match the accumulator");
        }
        ++count_;
        const double inv = 1.0 / static_cast<double>(count_);
        mean_phi_ += inv * (phi.values - mean_phi_);
        mean_f_ += inv * (f - mean_f_);
    }

    /// Pooled mean of two accumulators; associative up to rounding.
    void merge(const PosteriorAccumulator& other) {
        if (other.count_ == 0) return;
        if (count_ == 0) {
            *this = other;
            return;
        }
        if (other.mean_phi_.size() != mean_phi_.size() || other.mean_f_.size() != mean_f_.size()) {
            throw DimensionMismatch("posterior: cannot merge accumulators of different shape");
        }
        const double n = static_cast<double>(count_ + other.count_);
        const double wb = static_cast<double>(other.count_) / n;
        mean_phi_ += wb * (other.mean_phi_ - mean_phi_);
        mean_f_ += wb * (other.mean_f_ - mean_f_);
        count_ += other.count_;
    }

    std::uint64_t count() const { return count_; }
    const Eigen::VectorXd& mean_phi() const { return mean_phi_; }
    const Eigen::VectorXd& mean_f() const { return mean_f_; }

    PosteriorSummary summary(std::vector<double> misfit_trace = {}, double acceptance_rate = 0.0) const {
        if (count_ == 0) throw InvalidParameter("posterior: no samples accumulated");
        return {{mean_phi_}, mean_f_, count_, std::move(misfit_trace),
                std::clamp(acceptance_rate, 0.0, 1.0)};
    }

private:
    Eigen::VectorXd mean_phi_;
    Eigen::VectorXd mean_f_;
    std::uint64_t count_ = 0;
};

/// Posterior-mean source: the mean level-set field pushed through the level-set map.
inline Eigen::VectorXd estimate_support(const PosteriorSummary& summary, const LevelSetMap& map) {
    return map(summary.mean_phi);
}

namespace detail {

inline void check_same_length(const Eigen::VectorXd& a, const Eigen::VectorXd& b,
                              const QuadratureRule& quad) {
    if (a.size() != b.size() || a.size() != static_cast<Eigen::Index>(quad.size())) {
        throw DimensionMismatch("iou: vectors must match the quadrature rule");
    }
}

template <class In>
double weighted_iou(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const QuadratureRule& quad,
                    In in) {
    check_same_length(a, b, quad);
    double inter = 0.0, uni = 0.0;
    for (Eigen::Index q = 0; q < a.size(); ++q) {
        const bool ia = in(a[q]), ib = in(b[q]);
        if (ia && ib) inter += quad.weights[q];
        if (ia || ib) uni += quad.weights[q];
    }
    return uni > 0.0 ? inter / uni : 1.0;
}

}  // namespace detail

/// Quadrature-weighted intersection over union of the nonzero sets; 1 when both are empty.
inline double iou(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth, const QuadratureRule& quad) {
    return detail::weighted_iou(estimate, truth, quad, [](double v) { return v != 0.0; });
}

/// IoU of the region carrying phase value w.
inline double iou_phase(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth,
                        const QuadratureRule& quad, double w) {
    return detail::weighted_iou(estimate, truth, quad, [w](double v) { return v == w; });
}

/// Quadrature-weighted fraction of the domain where the phases agree.
inline double pixel_accuracy(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth,
                             const QuadratureRule& quad) {
    detail::check_same_length(estimate, truth, quad);
    double agree = 0.0, total = 0.0;
    for (Eigen::Index q = 0; q < estimate.size(); ++q) {
        total += quad.weights[q];
        if (estimate[q] == truth[q]) agree += quad.weights[q];
    }
    return total > 0.0 ? agree / total : 1.0;
}

/// Binary PGM (P5) of the thresholded field on a width x height grid over
/// the disk's bounding box. Phase values are scaled to [0, 255]; pixels
/// outside the mesh are 0. Row 0 is the top (largest y).
inline void write_pgm(std::ostream& out, const TriMesh& mesh, const NodalField& phi,
                      const LevelSetConfig& config, int width, int height) {
    if (width < 1 || height < 1) throw InvalidParameter("pgm: raster size must be positive");
    if (phi.size() != static_cast<Eigen::Index>(mesh.node_count())) {
        throw DimensionMismatch("pgm: field does not match mesh");
    }
    const PointLocator locator(mesh);
    const double lo = *std::min_element(config.values.begin(), config.values.end());
    const double hi = *std::max_element(config.values.begin(), config.values.end());
    const double span = hi > lo ? hi - lo : 1.0;
    const double x0 = mesh.center.x - mesh.radius, y1 = mesh.center.y + mesh.radius;
    const double dx = 2.0 * mesh.radius / width, dy = 2.0 * mesh.radius / height;
    std::string body(static_cast<std::size_t>(width) * height, '\0');
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const Point2 p{x0 + (c + 0.5) * dx, y1 - (r + 0.5) * dy};
            const auto loc = locator.locate(p);
            if (!loc) continue;
            const auto& tri = mesh.triangles[loc->triangle];
            double v = 0.0;
            for (int k = 0; k < 3; ++k) v += loc->bary[k] * phi.values[tri[k]];
            const double g = 255.0 * (config.phase_value(v) - lo) / span;
            body[static_cast<std::size_t>(r) * width + c] =
                static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(g, 0.0, 255.0))));
        }
    }
    out << "P5\n" << width << ' ' << height << "\n255\n";
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
}

}  // namespace helioset

#endif  // HELIOSET_POSTERIOR_HPP
