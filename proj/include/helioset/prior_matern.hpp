#ifndef HELIOSET_PRIOR_MATERN_HPP
#define HELIOSET_PRIOR_MATERN_HPP

// Whittle-Matern Gaussian random field on the disk mesh.
//
// Samples solve (I - l^2 Lap)^p phi = sqrt(alpha l^2) W, p = (nu + 1) / 2, with
// linear elements and phi = 0 on the boundary:
//
//   A u_1 = sqrt(alpha l^2) L xi,   A = M + l^2 K (interior block),
//   u_{i+1} = A^{-1} M u_i,         i = 1 .. p-1,
//
// where L = diag(sqrt(lumped mass)) so that L L^T approximates the white-noise
// load covariance M, and alpha = sigma^2 4 pi Gamma(nu + 1) / Gamma(nu) in 2D.

#include <cmath>
#include <cstdint>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "helioset/common.hpp"
#include "helioset/levelset.hpp"
#include "helioset/mesh.hpp"
#include "helioset/specfun.hpp"

namespace helioset {

struct MaternParams {
    double nu = 1.0;
    double l = 0.7071;
    double sigma2 = 1.0;

    /// Integer power p = (nu + d/2) / 2 of the SPDE operator for d = 2.
    int exponent() const { return static_cast<int>(std::lround((nu + 1.0) / 2.0)); }

    void validate() const {
        if (!(nu > 0.0) || !(l > 0.0) || !(sigma2 > 0.0)) {
            throw InvalidParameter("matern: nu, l and sigma2 must be positive");
        }
        const double p = (nu + 1.0) / 2.0;
        if (std::fabs(p - std::round(p)) > 1e-12 || p < 1.0 || p > 3.0) {
            throw InvalidParameter("matern: sampler supports nu in {1, 3, 5}");
        }
    }

    double alpha() const {
        return sigma2 * 4.0 * pi * specfun::gamma_fn(nu + 1.0) / specfun::gamma_fn(nu);
    }

    friend bool operator==(const MaternParams&, const MaternParams&) = default;
};

/// Normalized covariance 2^{1-nu}/Gamma(nu) (r/l)^nu K_nu(r/l); equals 1 at r = 0.
inline double matern_covariance(double r, const MaternParams& params) {
    if (r < 0.0) throw InvalidParameter("matern_covariance: r must be >= 0");
    if (r == 0.0) return 1.0;
    const double s = r / params.l;
    return std::pow(2.0, 1.0 - params.nu) / specfun::gamma_fn(params.nu) * std::pow(s, params.nu) *
           specfun::bessel_k_nu(params.nu, s);
}

class MaternSampler {
    using Solver = Eigen::SimplicialLLT<SparseMatrix>;

public:
    MaternSampler(const TriMesh& mesh, MaternParams params) : params_(params), nodes_(mesh.node_count()) {
        params_.validate();
        for (std::size_t i = 0; i < mesh.node_count(); ++i) {
            if (!mesh.on_boundary[i]) interior_.push_back(static_cast<int>(i));
        }
        if (interior_.empty()) throw GeometryError("matern sampler: mesh has no interior nodes");

        const auto fem = assemble_mass_stiffness(mesh);
        std::vector<int> slot(mesh.node_count(), -1);
        for (std::size_t k = 0; k < interior_.size(); ++k) slot[interior_[k]] = static_cast<int>(k);

        std::vector<Eigen::Triplet<double>> at, mt;
        const double l2 = params_.l * params_.l;
        for (int col = 0; col < fem.mass.outerSize(); ++col) {
            for (SparseMatrix::InnerIterator it(fem.mass, col); it; ++it) {
                const int i = slot[it.row()], j = slot[it.col()];
                if (i >= 0 && j >= 0) mt.emplace_back(i, j, it.value());
            }
            for (SparseMatrix::InnerIterator it(fem.stiffness, col); it; ++it) {
                const int i = slot[it.row()], j = slot[it.col()];
                if (i >= 0 && j >= 0) at.emplace_back(i, j, l2 * it.value());
            }
        }
        const auto n = static_cast<Eigen::Index>(interior_.size());
        mass_.resize(n, n);
        mass_.setFromTriplets(mt.begin(), mt.end());
        SparseMatrix op(n, n);
        op.setFromTriplets(at.begin(), at.end());
        op += mass_;
        solver_ = std::make_shared<Solver>(op);
        if (solver_->info() != Eigen::Success) {
            throw NumericalError("matern sampler: factorization of M + l^2 K failed");
        }
        noise_scale_ = std::sqrt(params_.alpha() * l2) * lumped_mass(mass_).cwiseSqrt();
    }

    const MaternParams& params() const { return params_; }
    std::size_t node_count() const { return nodes_; }
    std::size_t interior_count() const { return interior_.size(); }

    /// Field driven by a given standard-normal vector over interior nodes.
    NodalField from_noise(const Eigen::VectorXd& xi) const {
        if (xi.size() != static_cast<Eigen::Index>(interior_.size())) {
            throw DimensionMismatch("matern sampler: noise vector has wrong length");
        }
        Eigen::VectorXd u = solver_->solve(noise_scale_.cwiseProduct(xi));
        for (int i = 1; i < params_.exponent(); ++i) u = solver_->solve(mass_ * u);
        NodalField out{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nodes_))};
        for (std::size_t k = 0; k < interior_.size(); ++k) out.values[interior_[k]] = u[static_cast<Eigen::Index>(k)];
        return out;
    }

    NodalField sample(Rng& rng) const {
        std::normal_distribution<double> normal;
        Eigen::VectorXd xi(static_cast<Eigen::Index>(interior_.size()));
        for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = normal(rng);
        return from_noise(xi);
    }

private:
    MaternParams params_;
    std::size_t nodes_;
    std::vector<int> interior_;
    SparseMatrix mass_;
    // read-only after construction; shared between copies
    std::shared_ptr<const Solver> solver_;
    Eigen::VectorXd noise_scale_;
};

inline MaternSampler build_matern_sampler(const TriMesh& mesh, const MaternParams& params) {
    return MaternSampler(mesh, params);
}

inline NodalField sample_matern(const MaternSampler& sampler, std::uint64_t seed) {
    Rng rng = make_rng(seed);
    return sampler.sample(rng);
}

/// CSV `node,x,y,value`.
inline void write_nodal_csv(std::ostream& out, const TriMesh& mesh, const NodalField& field) {
    if (field.size() != static_cast<Eigen::Index>(mesh.node_count())) {
        throw DimensionMismatch("nodal csv: field does not match mesh");
    }
    std::ostringstream buf;
    buf.precision(17);
    buf << "node,x,y,value\n";
    for (std::size_t i = 0; i < mesh.node_count(); ++i) {
        buf << i << ',' << mesh.nodes[i].x << ',' << mesh.nodes[i].y << ','
            << field.values[static_cast<Eigen::Index>(i)] << '\n';
    }
    out << buf.str();
}

}  // namespace helioset

#endif  // HELIOSET_PRIOR_MATERN_HPP
