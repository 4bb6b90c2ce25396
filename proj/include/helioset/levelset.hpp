#ifndef HELIOSET_LEVELSET_HPP
#define HELIOSET_LEVELSET_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "helioset/common.hpp"
#include "helioset/mesh.hpp"

namespace helioset {

/// Phase l occupies [c_{l-1}, c_l) with c_0 = -inf and c_n = +inf.
struct LevelSetConfig {
    std::vector<double> thresholds{0.0};
    std::vector<double> values{0.0, 1.0};

    void validate() const {
        if (values.size() != thresholds.size() + 1) {
            throw InvalidParameter("level-set config: need exactly one more value than thresholds");
        }
        for (std::size_t i = 1; i < thresholds.size(); ++i) {
            if (!(thresholds[i] > thresholds[i - 1])) {
                throw InvalidParameter("level-set config: thresholds must be strictly increasing");
            }
        }
        for (double v : values) {
            if (!std::isfinite(v)) throw InvalidParameter("level-set config: values must be finite");
        }
    }

    /// Phase value for a level-set value; ties at a threshold go to the upper phase.
    double phase_value(double phi) const {
        const auto l = std::upper_bound(thresholds.begin(), thresholds.end(), phi) - thresholds.begin();
        return values[static_cast<std::size_t>(l)];
    }

    friend bool operator==(const LevelSetConfig&, const LevelSetConfig&) = default;
};

/// Level-set function as nodal values of a continuous piecewise-linear field.
struct NodalField {
    Eigen::VectorXd values;

    Eigen::Index size() const { return values.size(); }
};

/// Level-set map bound to a mesh and quadrature rule: interpolates nodal
/// values to quadrature points and thresholds them.
class LevelSetMap {
public:
    LevelSetMap(const TriMesh& mesh, const QuadratureRule& quad, LevelSetConfig config)
        : interp_(interpolation_matrix(mesh, quad)), config_(std::move(config)) {
        config_.validate();
    }

    const LevelSetConfig& config() const { return config_; }
    Eigen::Index node_count() const { return interp_.cols(); }
    Eigen::Index quadrature_size() const { return interp_.rows(); }

    Eigen::VectorXd at_quadrature(const NodalField& phi) const {
        if (phi.size() != interp_.cols()) {
            throw DimensionMismatch("level-set map: field has " + std::to_string(phi.size()) +
                                    " nodes, mesh has " + std::to_string(interp_.cols()));
        }
        return interp_ * phi.values;
    }

    Eigen::VectorXd operator()(const NodalField& phi) const {
        Eigen::VectorXd out = at_quadrature(phi);
        for (Eigen::Index q = 0; q < out.size(); ++q) out[q] = config_.phase_value(out[q]);
        return out;
    }

private:
    SparseMatrix interp_;
    LevelSetConfig config_;
};

inline Eigen::VectorXd level_set_map(const NodalField& phi, const LevelSetConfig& config,
                                     const TriMesh& mesh, const QuadratureRule& quad) {
    return LevelSetMap(mesh, quad, config)(phi);
}

inline double default_band(const NodalField& phi) {
    if (phi.size() == 0) return 0.0;
    return 1e-6 * (phi.values.maxCoeff() - phi.values.minCoeff());
}

/// Quadrature measure of {|phi - c| < band} over the total measure. A zero
/// band counts exact hits only. The band defaults to 1e-6 (max phi - min phi).
inline double indicator_fraction(const NodalField& phi, double c, const TriMesh& mesh,
                                 const QuadratureRule& quad,
                                 std::optional<double> band = std::nullopt) {
    const double eps = band.value_or(default_band(phi));
    const Eigen::VectorXd at_q = interpolation_matrix(mesh, quad) * phi.values;
    double inside = 0.0, total = 0.0;
    for (Eigen::Index q = 0; q < at_q.size(); ++q) {
        const double d = std::fabs(at_q[q] - c);
        total += quad.weights[q];
        if (d < eps || d == 0.0) inside += quad.weights[q];
    }
    return total > 0.0 ? inside / total : 0.0;
}

}  // namespace helioset

#endif  // HELIOSET_LEVELSET_HPP
