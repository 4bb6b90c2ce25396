#ifndef HELIOSET_FORWARD_HPP
#define HELIOSET_FORWARD_HPP

// Multi-frequency observation operator
//
//   u(x_j, k_m) = sum_q w_q H0^(1)(k_m |x_j - y_q|) f(y_q)
//
// i.e. the volume potential with kernel H0^(1) (no i/4 factor) discretized
// by the mesh quadrature rule. Data are stacked block-wise by wavenumber,
// receiver-major inside each block.

#include <cmath>
#include <complex>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "helioset/common.hpp"
#include "helioset/mesh.hpp"
#include "helioset/specfun.hpp"

namespace helioset {

struct ObservationSetup {
    std::vector<Point2> receivers;
    std::vector<double> wavenumbers;
    double c0 = 343.0;

    std::size_t receiver_count() const { return receivers.size(); }
    std::size_t wavenumber_count() const { return wavenumbers.size(); }
};

namespace detail {

inline std::vector<Point2> perimeter_receivers(int n, Point2 lo, Point2 hi) {
    const double w = hi.x - lo.x, ht = hi.y - lo.y;
    const double perimeter = 2.0 * (w + ht);
    std::vector<Point2> out;
    out.reserve(n);
    for (int j = 0; j < n; ++j) {
        double t = perimeter * j / n;
        if (t < w) {
            out.push_back({lo.x + t, lo.y});
            continue;
        }
        t -= w;
        if (t < ht) {
            out.push_back({hi.x, lo.y + t});
            continue;
        }
        t -= ht;
        if (t < w) {
            out.push_back({hi.x - t, hi.y});
            continue;
        }
        t -= w;
        out.push_back({lo.x, hi.y - t});
    }
    return out;
}

inline void check_geometry(const std::vector<Point2>& receivers, Point2 lo, Point2 hi,
                           const Disk& domain) {
    if (!(lo.x < hi.x && lo.y < hi.y)) throw GeometryError("observation square is empty");
    const Point2 c = domain.center;
    const double r = domain.radius;
    if (c.x - r <= lo.x || c.x + r >= hi.x || c.y - r <= lo.y || c.y + r >= hi.y) {
        throw GeometryError("observation square must strictly enclose the computational disk");
    }
    for (std::size_t j = 0; j < receivers.size(); ++j) {
        if (domain.contains_closed(receivers[j])) {
            throw GeometryError("receiver " + std::to_string(j) + " lies inside the disk");
        }
    }
}

}  // namespace detail

/// Receivers equispaced counterclockwise along the square perimeter starting
/// at `lo`; wavenumbers k_m = 2 pi f_m / c0 with f_m equispaced on [f_min, f_max].
inline ObservationSetup make_observation_setup(int n_receivers, Point2 square_lo, Point2 square_hi,
                                               double f_min, double f_max, int n_freq, double c0,
                                               const Disk& domain) {
    if (n_receivers < 1) throw InvalidParameter("n_receivers must be >= 1");
    if (n_freq < 1) throw InvalidParameter("n_freq must be >= 1");
    if (!(c0 > 0.0)) throw InvalidParameter("c0 must be positive");
    if (!(f_min > 0.0)) throw InvalidParameter("f_min must be positive");
    if (n_freq == 1 ? !(f_max >= f_min) : !(f_max > f_min)) {
        throw InvalidParameter("frequency range must satisfy f_min < f_max");
    }
    ObservationSetup setup;
    setup.c0 = c0;
    setup.receivers = detail::perimeter_receivers(n_receivers, square_lo, square_hi);
    detail::check_geometry(setup.receivers, square_lo, square_hi, domain);
    for (int m = 0; m < n_freq; ++m) {
        const double f = n_freq == 1 ? f_min : f_min + (f_max - f_min) * m / (n_freq - 1);
        setup.wavenumbers.push_back(2.0 * pi * f / c0);
    }
    return setup;
}

/// Same receiver layout with an explicit wavenumber list (blocks keep its order).
inline ObservationSetup make_observation_setup(int n_receivers, Point2 square_lo, Point2 square_hi,
                                               std::vector<double> wavenumbers,
                                               const Disk& domain, double c0 = 343.0) {
    if (n_receivers < 1) throw InvalidParameter("n_receivers must be >= 1");
    if (wavenumbers.empty()) throw InvalidParameter("wavenumber list is empty");
    for (std::size_t m = 0; m < wavenumbers.size(); ++m) {
        if (!(wavenumbers[m] > 0.0) || !std::isfinite(wavenumbers[m])) {
            throw InvalidParameter("wavenumbers must be positive");
        }
    }
    ObservationSetup setup;
    setup.c0 = c0;
    setup.receivers = detail::perimeter_receivers(n_receivers, square_lo, square_hi);
    detail::check_geometry(setup.receivers, square_lo, square_hi, domain);
    setup.wavenumbers = std::move(wavenumbers);
    return setup;
}

/// Complex data of length N*M; entry m*N + j is receiver j at wavenumber m.
struct DataVector {
    Eigen::VectorXcd values;
    std::size_t receivers = 0;
    std::size_t blocks = 0;

    std::complex<double> at(std::size_t block, std::size_t receiver) const {
        return values[static_cast<Eigen::Index>(block * receivers + receiver)];
    }
};

/// Dense forward operator. Rows are stacked real parts of all N*M outputs
/// followed by imaginary parts, so that one real GEMV applies the operator.
class ForwardSystem {
public:
    ForwardSystem(ObservationSetup setup, Eigen::MatrixXd stacked)
        : setup_(std::move(setup)), stacked_(std::move(stacked)) {}

    const ObservationSetup& setup() const { return setup_; }
    std::size_t receivers() const { return setup_.receiver_count(); }
    std::size_t blocks() const { return setup_.wavenumber_count(); }
    std::size_t outputs() const { return receivers() * blocks(); }
    std::size_t quadrature_size() const { return static_cast<std::size_t>(stacked_.cols()); }
    const Eigen::MatrixXd& stacked() const { return stacked_; }

    /// Complex N x Q matrix of wavenumber block m.
    Eigen::MatrixXcd matrix(std::size_t m) const {
        const auto n = static_cast<Eigen::Index>(receivers());
        const auto off = static_cast<Eigen::Index>(m) * n;
        const auto total = static_cast<Eigen::Index>(outputs());
        Eigen::MatrixXcd out(n, stacked_.cols());
        out.real() = stacked_.middleRows(off, n);
        out.imag() = stacked_.middleRows(total + off, n);
        return out;
    }

    /// Stacked real representation [Re; Im] of the operator applied to f.
    Eigen::VectorXd apply_stacked(const Eigen::VectorXd& source_at_quad) const {
        if (static_cast<std::size_t>(source_at_quad.size()) != quadrature_size()) {
            throw DimensionMismatch("apply_forward: source has " +
                                    std::to_string(source_at_quad.size()) +
                                    " entries, expected " + std::to_string(quadrature_size()));
        }
        return stacked_ * source_at_quad;
    }

private:
    ObservationSetup setup_;
    Eigen::MatrixXd stacked_;
};

inline DataVector unstack(const Eigen::VectorXd& stacked, std::size_t receivers, std::size_t blocks) {
    const auto total = static_cast<Eigen::Index>(receivers * blocks);
    DataVector d;
    d.receivers = receivers;
    d.blocks = blocks;
    d.values.resize(total);
    d.values.real() = stacked.head(total);
    d.values.imag() = stacked.segment(total, total);
    return d;
}

inline Eigen::VectorXd stack(const DataVector& data) {
    const auto total = data.values.size();
    Eigen::VectorXd out(2 * total);
    out.head(total) = data.values.real();
    out.tail(total) = data.values.imag();
    return out;
}

/// Entry (j, q) of block m is w_q H0^(1)(k_m |x_j - y_q|).
inline ForwardSystem assemble_forward(const QuadratureRule& quad, const ObservationSetup& setup) {
    const std::size_t n = setup.receiver_count(), m_count = setup.wavenumber_count();
    const std::size_t total = n * m_count;
    const auto cols = static_cast<Eigen::Index>(quad.size());
    Eigen::MatrixXd stacked(static_cast<Eigen::Index>(2 * total), cols);
    parallel_for(total, [&](std::size_t row) {
        const std::size_t m = row / n, j = row % n;
        const double k = setup.wavenumbers[m];
        const Point2 x = setup.receivers[j];
        const auto r = static_cast<Eigen::Index>(row);
        for (Eigen::Index q = 0; q < cols; ++q) {
            const auto h = specfun::hankel1_0(k * dist(x, quad.points[q]));
            stacked(r, q) = quad.weights[q] * h.real();
            stacked(static_cast<Eigen::Index>(total) + r, q) = quad.weights[q] * h.imag();
        }
    });
    return ForwardSystem(setup, std::move(stacked));
}

inline DataVector apply_forward(const ForwardSystem& system, const Eigen::VectorXd& source_at_quad) {
    return unstack(system.apply_stacked(source_at_quad), system.receivers(), system.blocks());
}

/// Adds independent N(0, delta^2) noise to every real and imaginary part.
inline DataVector add_noise(const DataVector& data, double delta, std::uint64_t seed) {
    if (!(delta >= 0.0)) throw InvalidParameter("add_noise: delta must be >= 0");
    DataVector out = data;
    if (delta == 0.0) return out;
    Rng rng = make_rng(seed);
    std::normal_distribution<double> normal(0.0, delta);
    for (Eigen::Index i = 0; i < out.values.size(); ++i) {
        const double re = normal(rng);
        const double im = normal(rng);
        out.values[i] += std::complex<double>(re, im);
    }
    return out;
}

// CSV: header `block,receiver,re,im`, one row per (m, j).
inline void write_data_csv(std::ostream& out, const DataVector& data) {
    std::ostringstream buf;
    buf.precision(17);
    buf << "block,receiver,re,im\n";
    for (std::size_t m = 0; m < data.blocks; ++m) {
        for (std::size_t j = 0; j < data.receivers; ++j) {
            const auto v = data.at(m, j);
            buf << m << ',' << j << ',' << v.real() << ',' << v.imag() << '\n';
        }
    }
    out << buf.str();
}

inline DataVector read_data_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("block,receiver,re,im", 0) != 0) {
        throw InvalidParameter("data csv: expected header `block,receiver,re,im`");
    }
    std::map<std::pair<std::size_t, std::size_t>, std::complex<double>> rows;
    std::size_t max_m = 0, max_j = 0, line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::size_t m = 0, j = 0;
        double re = 0.0, im = 0.0;
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(ls >> m >> c1 >> j >> c2 >> re >> c3 >> im) || c1 != ',' || c2 != ',' || c3 != ',') {
            throw InvalidParameter("data csv: malformed line " + std::to_string(line_no));
        }
        rows[{m, j}] = {re, im};
        max_m = std::max(max_m, m);
        max_j = std::max(max_j, j);
    }
    if (rows.empty()) throw InvalidParameter("data csv: no rows");
    DataVector d;
    d.blocks = max_m + 1;
    d.receivers = max_j + 1;
    if (rows.size() != d.blocks * d.receivers) {
        throw InvalidParameter("data csv: incomplete (block, receiver) grid");
    }
    d.values.resize(static_cast<Eigen::Index>(rows.size()));
    for (const auto& [key, v] : rows) {
        d.values[static_cast<Eigen::Index>(key.first * d.receivers + key.second)] = v;
    }
    return d;
}

}  // namespace helioset

#endif  // HELIOSET_FORWARD_HPP
