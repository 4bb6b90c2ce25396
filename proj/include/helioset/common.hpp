#ifndef HELIOSET_COMMON_HPP
#define HELIOSET_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace helioset {

// Error taxonomy. Every failure in the library surfaces as one of these.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};
struct InvalidParameter : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct DimensionMismatch : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct GeometryError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline constexpr double pi = std::numbers::pi;

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Point2, Point2) = default;
};

inline double norm(Point2 p) { return std::hypot(p.x, p.y); }
inline double dist(Point2 a, Point2 b) { return norm(a - b); }
inline double dist2(Point2 a, Point2 b) {
    const double dx = a.x - b.x, dy = a.y - b.y;
    return dx * dx + dy * dy;
}

// Twice the signed area of (a, b, c); positive for counterclockwise order.
inline double cross(Point2 a, Point2 b, Point2 c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

struct Disk {
    Point2 center;
    double radius = 0.0;

    bool contains_closed(Point2 p) const { return dist(p, center) <= radius; }
    friend bool operator==(const Disk&, const Disk&) = default;
};

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

/// Hardware thread count, capped by HELIOSET_THREADS when set and positive.
inline unsigned worker_count() {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("HELIOSET_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) n = std::min(n, static_cast<unsigned>(v));
    }
    return n;
}

/// Runs fn(i) for i in [0, count) on up to worker_count() threads using a
/// static partition; fn must only write state owned by index i.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
    const std::size_t workers = std::min<std::size_t>(worker_count(), std::max<std::size_t>(count, 1));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += workers) fn(i);
        });
    }
}

}  // namespace helioset

#endif  // HELIOSET_COMMON_HPP
