#ifndef HELIOSET_EXPERIMENT_HPP
#define HELIOSET_EXPERIMENT_HPP

// End-to-end experiment driver behind the `helioset` CLI: configuration,
// synthetic truth shapes, data simulation, chain runs and summaries.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "helioset/common.hpp"
#include "helioset/forward.hpp"
#include "helioset/io.hpp"
#include "helioset/levelset.hpp"
#include "helioset/mcmc.hpp"
#include "helioset/mesh.hpp"
#include "helioset/posterior.hpp"
#include "helioset/prior_matern.hpp"
#include "helioset/prior_rbf.hpp"

namespace helioset::experiment {

namespace fs = std::filesystem;
using json = nlohmann::json;

struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// ---------------------------------------------------------------------------
// Truth shapes

struct TruthShape {
    enum class Kind { disk, lshape, union_of, embedded };

    Kind kind = Kind::disk;
    Point2 center{1.0, 1.0};
    double radius = 0.5;
    std::array<double, 4> bbox{0.0, 0.0, 1.0, 1.0};  // x0, y0, x1, y1
    double value = 1.0;
    std::vector<TruthShape> parts;  // union members, or {outer, inner} when embedded
    double outer_value = 1.0;
    double inner_value = 2.0;

    static TruthShape disk(Point2 c, double r, double v = 1.0) {
        TruthShape s;
        s.kind = Kind::disk;
        s.center = c;
        s.radius = r;
        s.value = v;
        return s;
    }
    /// Bounding box with its upper-right quadrant removed.
    static TruthShape lshape(std::array<double, 4> box, double v = 1.0) {
        TruthShape s;
        s.kind = Kind::lshape;
        s.bbox = box;
        s.value = v;
        return s;
    }
    static TruthShape union_of(std::vector<TruthShape> members) {
        TruthShape s;
        s.kind = Kind::union_of;
        s.parts = std::move(members);
        return s;
    }
    static TruthShape embedded(TruthShape outer, TruthShape inner, double outer_v, double inner_v) {
        TruthShape s;
        s.kind = Kind::embedded;
        s.parts = {std::move(outer), std::move(inner)};
        s.outer_value = outer_v;
        s.inner_value = inner_v;
        return s;
    }

    bool contains(Point2 p) const {
        switch (kind) {
            case Kind::disk:
                return dist(p, center) <= radius;
            case Kind::lshape: {
                const auto [x0, y0, x1, y1] = bbox;
                const bool in_box = p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
                const bool in_notch = p.x > 0.5 * (x0 + x1) && p.y > 0.5 * (y0 + y1);
                return in_box && !in_notch;
            }
            case Kind::union_of:
                return std::any_of(parts.begin(), parts.end(), [p](const auto& s) { return s.contains(p); });
            case Kind::embedded:
                return parts.at(0).contains(p);
        }
        return false;
    }

    /// Source value at p: the first union member containing p wins; an
    /// embedded inner shape takes precedence over its outer shape.
    double value_at(Point2 p) const {
        switch (kind) {
            case Kind::disk:
            case Kind::lshape:
                return contains(p) ? value : 0.0;
            case Kind::union_of:
                for (const auto& s : parts) {
                    if (s.contains(p)) return s.value_at(p);
                }
                return 0.0;
            case Kind::embedded:
                if (parts.at(1).contains(p)) return inner_value;
                return parts.at(0).contains(p) ? outer_value : 0.0;
        }
        return 0.0;
    }

    /// Every point of the shape lies in the closed disk.
    bool inside(const Disk& d) const {
        constexpr double slack = 1e-12;
        switch (kind) {
            case Kind::disk:
                return dist(center, d.center) + radius <= d.radius + slack;
            case Kind::lshape: {
                const auto [x0, y0, x1, y1] = bbox;
                for (Point2 c : {Point2{x0, y0}, Point2{x1, y0}, Point2{x0, y1}, Point2{x1, y1}}) {
                    if (dist(c, d.center) > d.radius + slack) return false;
                }
                return x0 < x1 && y0 < y1;
            }
            case Kind::union_of:
                return !parts.empty() &&
                       std::all_of(parts.begin(), parts.end(), [&](const auto& s) { return s.inside(d); });
            case Kind::embedded:
                return parts.size() == 2 && parts[0].inside(d) && parts[1].inside(d);
        }
        return false;
    }

    friend bool operator==(const TruthShape&, const TruthShape&) = default;
};

inline Eigen::VectorXd rasterize_truth(const TruthShape& shape, const QuadratureRule& quad) {
    Eigen::VectorXd f(static_cast<Eigen::Index>(quad.size()));
    for (std::size_t q = 0; q < quad.size(); ++q) f[static_cast<Eigen::Index>(q)] = shape.value_at(quad.points[q]);
    return f;
}

// ---------------------------------------------------------------------------
// Configuration

enum class PriorKind { matern, rbf };

struct PriorConfig {
    PriorKind kind = PriorKind::matern;
    MaternParams matern;
    CenterMode centers = CenterMode::mesh_vertices;
    int grid_n = 5;
    bool clip_to_disk = false;
    double width = 0.0;  // 0 selects the layout default

    friend bool operator==(const PriorConfig&, const PriorConfig&) = default;
};

struct ExperimentConfig {
    // geometry
    Disk domain{{1.0, 1.0}, 2.0};
    Point2 square_lo{-2.0, -2.0};
    Point2 square_hi{4.0, 4.0};
    int n_receivers = 24;
    double f_min = 50.0;  // Hz
    double f_max = 10000.0;
    int n_freq = 10;
    std::vector<double> wavenumbers;  // overrides the frequency range when non-empty
    double c0 = 343.0;
    // discretization
    double mesh_h = 2.0 / 26.0;
    int quadrature_order = 3;
    int truth_refinement = 2;  // 1 disables the refined truth mesh
    std::string mesh_file;     // optional external mesh
    // model
    TruthShape truth = TruthShape::disk({1.3, 1.2}, 0.6);
    LevelSetConfig levelset;
    PriorConfig prior;
    // chain
    double beta = 0.01;
    std::int64_t steps = 200000;
    std::int64_t burn_in = 40000;
    std::int64_t thin = 10;
    std::uint64_t seed = 1;
    double delta = 0.01;
    std::optional<double> noise;  // simulated noise level; delta when unset
    bool init_from_prior = true;
    int chains = 1;
    // output
    std::string output_dir = "out";
    int pgm_size = 128;

    ChainConfig chain() const { return {steps, beta, burn_in, thin, init_from_prior}; }
    double noise_level() const { return noise.value_or(delta); }

    friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

namespace detail {

inline json point_json(Point2 p) { return json::array({p.x, p.y}); }

inline Point2 point_from(const json& j, const std::string& path) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw ConfigError(path + ": expected [x, y]");
    }
    return {j[0].get<double>(), j[1].get<double>()};
}

template <class T>
T field(const json& obj, const char* key, T fallback, const std::string& path) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(path + "/" + key + ": wrong type");
    }
}

inline const json& object(const json& parent, const char* key, const std::string& path) {
    static const json empty = json::object();
    if (!parent.contains(key)) return empty;
    const json& j = parent.at(key);
    if (!j.is_object()) throw ConfigError(path + "/" + key + ": expected an object");
    return j;
}

}  // namespace detail

inline json to_json(const TruthShape& s) {
    using K = TruthShape::Kind;
    switch (s.kind) {
        case K::disk:
            return {{"type", "disk"}, {"center", detail::point_json(s.center)}, {"radius", s.radius}, {"value", s.value}};
        case K::lshape:
            return {{"type", "lshape"}, {"bbox", s.bbox}, {"value", s.value}};
        case K::union_of: {
            json parts = json::array();
            for (const auto& p : s.parts) parts.push_back(to_json(p));
            return {{"type", "union"}, {"parts", parts}};
        }
        case K::embedded:
            return {{"type", "embedded"},
                    {"outer", to_json(s.parts.at(0))},
                    {"inner", to_json(s.parts.at(1))},
                    {"outer_value", s.outer_value},
                    {"inner_value", s.inner_value}};
    }
    return {};
}

inline TruthShape truth_from_json(const json& j, const std::string& path) {
    if (!j.is_object()) throw ConfigError(path + ": expected a shape object");
    const auto type = detail::field<std::string>(j, "type", "", path);
    if (type == "disk") {
        if (!j.contains("center") || !j.contains("radius")) throw ConfigError(path + ": disk needs center and radius");
        return TruthShape::disk(detail::point_from(j.at("center"), path + "/center"),
                                detail::field<double>(j, "radius", 0.0, path),
                                detail::field<double>(j, "value", 1.0, path));
    }
    if (type == "lshape") {
        if (!j.contains("bbox")) throw ConfigError(path + ": lshape needs bbox");
        return TruthShape::lshape(detail::field<std::array<double, 4>>(j, "bbox", {}, path),
                                  detail::field<double>(j, "value", 1.0, path));
    }
    if (type == "union") {
        if (!j.contains("parts") || !j.at("parts").is_array()) throw ConfigError(path + "/parts: expected an array");
        std::vector<TruthShape> parts;
        for (std::size_t i = 0; i < j.at("parts").size(); ++i) {
            parts.push_back(truth_from_json(j.at("parts")[i], path + "/parts/" + std::to_string(i)));
        }
        return TruthShape::union_of(std::move(parts));
    }
    if (type == "embedded") {
        if (!j.contains("outer") || !j.contains("inner")) throw ConfigError(path + ": embedded needs outer and inner");
        return TruthShape::embedded(truth_from_json(j.at("outer"), path + "/outer"),
                                    truth_from_json(j.at("inner"), path + "/inner"),
                                    detail::field<double>(j, "outer_value", 1.0, path),
                                    detail::field<double>(j, "inner_value", 2.0, path));
    }
    throw ConfigError(path + "/type: unknown shape `" + type + "`");
}

inline json to_json(const ExperimentConfig& c) {
    json prior;
    if (c.prior.kind == PriorKind::matern) {
        prior = {{"type", "matern"},
                 {"nu", c.prior.matern.nu},
                 {"length_scale", c.prior.matern.l},
                 {"sigma2", c.prior.matern.sigma2}};
    } else {
        prior = {{"type", "rbf"},
                 {"centers", c.prior.centers == CenterMode::grid ? "grid" : "mesh_vertices"},
                 {"grid_n", c.prior.grid_n},
                 {"clip_to_disk", c.prior.clip_to_disk},
                 {"width", c.prior.width}};
    }
    return {
        {"geometry",
         {{"disk_center", detail::point_json(c.domain.center)},
          {"disk_radius", c.domain.radius},
          {"square_lo", detail::point_json(c.square_lo)},
          {"square_hi", detail::point_json(c.square_hi)},
          {"n_receivers", c.n_receivers},
          {"f_min", c.f_min},
          {"f_max", c.f_max},
          {"n_freq", c.n_freq},
          {"wavenumbers", c.wavenumbers},
          {"c0", c.c0}}},
        {"mesh",
         {{"h", c.mesh_h},
          {"quadrature_order", c.quadrature_order},
          {"truth_refinement", c.truth_refinement},
          {"file", c.mesh_file}}},
        {"truth", to_json(c.truth)},
        {"levelset", {{"thresholds", c.levelset.thresholds}, {"values", c.levelset.values}}},
        {"prior", prior},
        {"chain",
         {{"beta", c.beta},
          {"steps", c.steps},
          {"burn_in", c.burn_in},
          {"thin", c.thin},
          {"seed", c.seed},
          {"delta", c.delta},
          {"noise", c.noise ? json(*c.noise) : json(nullptr)},
          {"init", c.init_from_prior ? "prior" : "zero"},
          {"chains", c.chains}}},
        {"output", {{"dir", c.output_dir}, {"pgm_size", c.pgm_size}}},
    };
}

/// Cross-field checks; messages carry the JSON pointer of the offending field.
inline void validate(const ExperimentConfig& c) {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (!(c.domain.radius > 0.0)) fail("/geometry/disk_radius: must be positive");
    if (c.n_receivers < 1) fail("/geometry/n_receivers: must be >= 1");
    if (!(c.c0 > 0.0)) fail("/geometry/c0: must be positive");
    if (c.wavenumbers.empty()) {
        if (c.n_freq < 1) fail("/geometry/n_freq: must be >= 1");
        if (!(c.f_min > 0.0)) fail("/geometry/f_min: must be positive");
        if (c.n_freq > 1 && !(c.f_max > c.f_min)) fail("/geometry/f_max: must exceed f_min");
    }
    try {
        const auto setup = c.wavenumbers.empty()
                               ? make_observation_setup(c.n_receivers, c.square_lo, c.square_hi, c.f_min,
                                                        c.f_max, c.n_freq, c.c0, c.domain)
                               : make_observation_setup(c.n_receivers, c.square_lo, c.square_hi,
                                                        c.wavenumbers, c.domain, c.c0);
        (void)setup;
    } catch (const std::exception& e) {
        fail(std::string("/geometry: ") + e.what());
    }
    if (c.mesh_file.empty() && !(c.mesh_h > 0.0 && c.mesh_h < c.domain.radius)) {
        fail("/mesh/h: must satisfy 0 < h < disk_radius");
    }
    if (c.quadrature_order != 1 && c.quadrature_order != 3 && c.quadrature_order != 6) {
        fail("/mesh/quadrature_order: must be 1, 3 or 6");
    }
    if (c.truth_refinement < 1) fail("/mesh/truth_refinement: must be >= 1");
    if (!c.truth.inside(c.domain)) fail("/truth: shape must lie inside the computational disk");
    try {
        c.levelset.validate();
    } catch (const std::exception& e) {
        fail(std::string("/levelset: ") + e.what());
    }
    if (c.prior.kind == PriorKind::matern) {
        try {
            c.prior.matern.validate();
        } catch (const std::exception& e) {
            fail(std::string("/prior: ") + e.what());
        }
    } else {
        if (c.prior.centers == CenterMode::grid && c.prior.grid_n < 2) fail("/prior/grid_n: must be >= 2");
        if (c.prior.width < 0.0) fail("/prior/width: must be >= 0");
    }
    if (!(c.delta > 0.0)) fail("/chain/delta: must be positive");
    if (c.noise && !(*c.noise >= 0.0)) fail("/chain/noise: must be >= 0");
    if (!(c.beta > 0.0 && c.beta <= 1.0)) fail("/chain/beta: must lie in (0, 1]");
    if (c.steps < 0) fail("/chain/steps: must be >= 0");
    if (c.thin < 1) fail("/chain/thin: must be >= 1");
    if (c.burn_in < 0) fail("/chain/burn_in: must be >= 0");
    if (c.steps > 0 && c.steps <= c.burn_in) fail("/chain/steps: must exceed burn_in");
    if (c.steps > 0 && c.thin >= c.steps) fail("/chain/thin: must be < steps");
    if (c.chains < 1) fail("/chain/chains: must be >= 1");
    if (c.pgm_size < 1) fail("/output/pgm_size: must be >= 1");
}

inline ExperimentConfig config_from_json(const json& j) {
    if (!j.is_object()) throw ConfigError("/: expected a JSON object");
    using detail::field;
    ExperimentConfig c;
    const auto& g = detail::object(j, "geometry", "");
    if (g.contains("disk_center")) c.domain.center = detail::point_from(g.at("disk_center"), "/geometry/disk_center");
    c.domain.radius = field(g, "disk_radius", c.domain.radius, "/geometry");
    if (g.contains("square_lo")) c.square_lo = detail::point_from(g.at("square_lo"), "/geometry/square_lo");
    if (g.contains("square_hi")) c.square_hi = detail::point_from(g.at("square_hi"), "/geometry/square_hi");
    c.n_receivers = field(g, "n_receivers", c.n_receivers, "/geometry");
    c.f_min = field(g, "f_min", c.f_min, "/geometry");
    c.f_max = field(g, "f_max", c.f_max, "/geometry");
    c.n_freq = field(g, "n_freq", c.n_freq, "/geometry");
    c.wavenumbers = field(g, "wavenumbers", c.wavenumbers, "/geometry");
    c.c0 = field(g, "c0", c.c0, "/geometry");

    const auto& m = detail::object(j, "mesh", "");
    c.mesh_h = field(m, "h", c.mesh_h, "/mesh");
    c.quadrature_order = field(m, "quadrature_order", c.quadrature_order, "/mesh");
    c.truth_refinement = field(m, "truth_refinement", c.truth_refinement, "/mesh");
    c.mesh_file = field(m, "file", c.mesh_file, "/mesh");

    if (j.contains("truth")) c.truth = truth_from_json(j.at("truth"), "/truth");

    const auto& ls = detail::object(j, "levelset", "");
    c.levelset.thresholds = field(ls, "thresholds", c.levelset.thresholds, "/levelset");
    c.levelset.values = field(ls, "values", c.levelset.values, "/levelset");

    const auto& p = detail::object(j, "prior", "");
    const auto type = field<std::string>(p, "type", "matern", "/prior");
    if (type == "matern") {
        c.prior.kind = PriorKind::matern;
        c.prior.matern.nu = field(p, "nu", c.prior.matern.nu, "/prior");
        c.prior.matern.l = field(p, "length_scale", c.prior.matern.l, "/prior");
        c.prior.matern.sigma2 = field(p, "sigma2", c.prior.matern.sigma2, "/prior");
    } else if (type == "rbf") {
        c.prior.kind = PriorKind::rbf;
        const auto mode = field<std::string>(p, "centers", "mesh_vertices", "/prior");
        if (mode == "grid") {
            c.prior.centers = CenterMode::grid;
        } else if (mode == "mesh_vertices") {
            c.prior.centers = CenterMode::mesh_vertices;
        } else {
            throw ConfigError("/prior/centers: expected `grid` or `mesh_vertices`");
        }
        c.prior.grid_n = field(p, "grid_n", c.prior.grid_n, "/prior");
        c.prior.clip_to_disk = field(p, "clip_to_disk", c.prior.clip_to_disk, "/prior");
        c.prior.width = field(p, "width", c.prior.width, "/prior");
    } else {
        throw ConfigError("/prior/type: expected `matern` or `rbf`");
    }

    const auto& ch = detail::object(j, "chain", "");
    c.beta = field(ch, "beta", c.beta, "/chain");
    c.steps = field(ch, "steps", c.steps, "/chain");
    c.burn_in = field(ch, "burn_in", c.burn_in, "/chain");
    c.thin = field(ch, "thin", c.thin, "/chain");
    c.seed = field(ch, "seed", c.seed, "/chain");
    c.delta = field(ch, "delta", c.delta, "/chain");
    if (ch.contains("noise") && !ch.at("noise").is_null()) c.noise = field(ch, "noise", 0.0, "/chain");
    const auto init = field<std::string>(ch, "init", "prior", "/chain");
    if (init != "prior" && init != "zero") throw ConfigError("/chain/init: expected `prior` or `zero`");
    c.init_from_prior = init == "prior";
    c.chains = field(ch, "chains", c.chains, "/chain");

    const auto& o = detail::object(j, "output", "");
    c.output_dir = field(o, "dir", c.output_dir, "/output");
    c.pgm_size = field(o, "pgm_size", c.pgm_size, "/output");

    validate(c);
    return c;
}

/// Parses JSON text; syntax errors report line and column.
inline ExperimentConfig parse_config(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config syntax error: ") + e.what());
    }
    return config_from_json(j);
}

inline std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

inline ExperimentConfig load_config(const fs::path& path) { return parse_config(io::read_text(path)); }

// ---------------------------------------------------------------------------
// Presets for `reproduce`

/// Single-medium disk (fig4), two-medium embedded domain (fig5) and the
/// 25-center RBF reconstruction of an L-shape (fig6). `scale` multiplies the
/// step count and the mesh resolution (h / sqrt(scale)) and the frequency count.
inline ExperimentConfig preset(const std::string& name, double scale) {
    if (!(scale > 0.0)) throw ConfigError("--scale must be positive");
    ExperimentConfig c;
    c.f_min = 50.0;
    c.f_max = 500.0;
    c.n_freq = std::max(2, static_cast<int>(std::lround(10 * std::min(1.0, scale))));
    c.mesh_h = std::min(1.0, (2.0 / 26.0) / std::sqrt(scale));
    c.beta = 0.01;
    c.delta = 0.01;
    c.prior.kind = PriorKind::matern;
    c.prior.matern = {1.0, default_rbf_width, 1.0};
    if (name == "fig4") {
        c.truth = TruthShape::disk({1.3, 1.2}, 0.6);
        c.steps = 200000;
    } else if (name == "fig5") {
        c.truth = TruthShape::embedded(TruthShape::disk({1.0, 1.0}, 1.0), TruthShape::disk({1.2, 1.1}, 0.4), 1.0, 2.0);
        c.levelset = {{0.0, 1.0}, {0.0, 1.0, 2.0}};
        c.steps = 300000;
    } else if (name == "fig6") {
        c.truth = TruthShape::lshape({0.2, 0.2, 1.8, 1.8});
        c.prior.kind = PriorKind::rbf;
        c.prior.matern = {};
        c.prior.centers = CenterMode::grid;
        c.prior.grid_n = 5;
        c.delta = 0.02;
        c.steps = 300000;
    } else {
        throw ConfigError("reproduce: unknown experiment `" + name + "` (expected fig4, fig5 or fig6)");
    }
    c.steps = std::max<std::int64_t>(100, std::llround(static_cast<double>(c.steps) * scale));
    c.burn_in = c.steps / 5;
    c.thin = std::min<std::int64_t>(10, std::max<std::int64_t>(1, c.steps / 100));
    validate(c);
    return c;
}

// ---------------------------------------------------------------------------
// Pipeline

/// Everything derived from a config that the stages share.
struct Problem {
    ExperimentConfig config;
    TriMesh mesh;
    QuadratureRule quad;
    ObservationSetup setup;
};

inline ObservationSetup observation_setup(const ExperimentConfig& c) {
    return c.wavenumbers.empty()
               ? make_observation_setup(c.n_receivers, c.square_lo, c.square_hi, c.f_min, c.f_max, c.n_freq,
                                        c.c0, c.domain)
               : make_observation_setup(c.n_receivers, c.square_lo, c.square_hi, c.wavenumbers, c.domain, c.c0);
}

inline TriMesh inversion_mesh(const ExperimentConfig& c) {
    if (!c.mesh_file.empty()) {
        std::ifstream in(c.mesh_file);
        if (!in) throw io::IoError("cannot open mesh file " + c.mesh_file);
        return read_mesh(in);
    }
    return generate_disk_mesh(c.domain.center, c.domain.radius, c.mesh_h);
}

/// Truth data use a mesh refined by `truth_refinement` (external meshes are used as-is).
inline TriMesh truth_mesh(const ExperimentConfig& c) {
    if (!c.mesh_file.empty() || c.truth_refinement == 1) return inversion_mesh(c);
    return generate_disk_mesh(c.domain.center, c.domain.radius, c.mesh_h / c.truth_refinement);
}

inline Problem make_problem(const ExperimentConfig& c) {
    validate(c);
    Problem p{c, inversion_mesh(c), {}, observation_setup(c)};
    p.quad = build_quadrature(p.mesh, c.quadrature_order);
    return p;
}

/// Noise seed derived from the run seed so it never coincides with chain streams.
inline std::uint64_t noise_seed(std::uint64_t seed) { return seed ^ 0x9E3779B97F4A7C15ULL; }

inline void run_mesh(const ExperimentConfig& c, const fs::path& out_dir) {
    validate(c);
    const auto mesh = inversion_mesh(c);
    io::write_atomic(out_dir / "mesh.txt", [&](std::ostream& o) { write_mesh(o, mesh); });
}

inline DataVector simulate_data(const ExperimentConfig& c, std::uint64_t seed) {
    validate(c);
    const auto mesh = truth_mesh(c);
    const auto quad = build_quadrature(mesh, c.quadrature_order);
    const auto system = assemble_forward(quad, observation_setup(c));
    return add_noise(apply_forward(system, rasterize_truth(c.truth, quad)), c.noise_level(), noise_seed(seed));
}

inline void run_simulate(const ExperimentConfig& c, std::uint64_t seed, const fs::path& out_dir) {
    const auto data = simulate_data(c, seed);
    io::write_atomic(out_dir / "data.csv", [&](std::ostream& o) { write_data_csv(o, data); });
}

/// Prior resources owned for the duration of a sampling run.
struct PriorBundle {
    std::optional<MaternSampler> matern;
    std::optional<RbfBasis> rbf;

    Eigen::Index dimension() const {
        return matern ? static_cast<Eigen::Index>(matern->node_count()) : static_cast<Eigen::Index>(rbf->size());
    }
    NodalField field(const Eigen::VectorXd& param) const {
        return matern ? MaternPrior(*matern).field(param) : RbfPrior(*rbf).field(param);
    }
};

inline PriorBundle make_prior(const ExperimentConfig& c, const TriMesh& mesh) {
    PriorBundle b;
    if (c.prior.kind == PriorKind::matern) {
        b.matern.emplace(mesh, c.prior.matern);
    } else {
        const auto centers = make_centers(c.prior.centers, mesh, c.prior.grid_n, c.prior.clip_to_disk);
        const double width = c.prior.width > 0.0 ? c.prior.width : default_width(c.prior.centers, mesh, c.prior.grid_n);
        b.rbf.emplace(centers, width, mesh.nodes);
    }
    return b;
}

inline fs::path diagnostics_path(const fs::path& dir, int chain) {
    return dir / (chain == 0 ? std::string("diagnostics.csv") : "diagnostics_chain" + std::to_string(chain) + ".csv");
}

/// Posterior summary artifacts (summary.pgm, mean_phi.csv, result.json) from
/// the sample dump and diagnostics already in `out_dir`.
inline json run_summarize(const ExperimentConfig& c, const fs::path& out_dir) {
    const auto problem = make_problem(c);
    const auto prior = make_prior(c, problem.mesh);
    const LevelSetMap map(problem.mesh, problem.quad, c.levelset);

    std::ifstream sin(out_dir / "samples.bin", std::ios::binary);
    if (!sin) throw io::IoError("missing " + (out_dir / "samples.bin").string());
    const auto dump = io::read_samples(sin);
    if (static_cast<Eigen::Index>(dump.dims) != prior.dimension()) {
        throw DimensionMismatch("samples.bin dimension does not match the configured prior");
    }
    std::vector<ChainDiagnostics> diags;
    for (int i = 0; fs::exists(diagnostics_path(out_dir, i)); ++i) {
        std::ifstream din(diagnostics_path(out_dir, i));
        diags.push_back(io::read_diagnostics(din));
    }
    if (diags.empty()) throw io::IoError("missing " + diagnostics_path(out_dir, 0).string());

    PosteriorAccumulator acc(static_cast<Eigen::Index>(problem.mesh.node_count()),
                             static_cast<Eigen::Index>(problem.quad.size()));
    for (const auto& s : dump.samples) {
        const auto phi = prior.field(s);
        acc.add(phi, map(phi));
    }

    std::uint64_t steps = 0, accepted = 0;
    for (const auto& d : diags) {
        steps += d.steps;
        accepted += d.accepted;
    }
    const double acceptance = steps == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(steps);
    const auto& trace = diags.front().trace;
    std::vector<double> misfits;
    misfits.reserve(trace.size());
    for (const auto& r : trace) misfits.push_back(r.misfit);
    const std::size_t window = std::max<std::size_t>(1, misfits.size() / 10);
    double window_mean = 0.0;
    for (std::size_t i = misfits.size() - window; i < misfits.size(); ++i) window_mean += misfits[i];
    window_mean /= static_cast<double>(window);

    json result = {
        {"schema", "helioset-result/1"},
        {"prior", c.prior.kind == PriorKind::matern ? "matern" : "rbf"},
        {"n_dims", dump.dims},
        {"chains", diags.size()},
        {"n_steps", steps},
        {"n_samples_used", dump.samples.size()},
        {"acceptance_rate", acceptance},
        {"initial_misfit", misfits.front()},
        {"final_misfit", misfits.back()},
        {"final_window_mean_misfit", window_mean},
    };

    const Eigen::VectorXd truth_f = rasterize_truth(c.truth, problem.quad);
    if (fs::exists(out_dir / "data.csv")) {
        std::ifstream din(out_dir / "data.csv");
        const auto data = read_data_csv(din);
        const auto system = assemble_forward(problem.quad, problem.setup);
        const Potential potential(system, data, c.delta, map);
        result["truth_misfit"] = potential.evaluate_source(truth_f).misfit;
    }

    if (acc.count() > 0) {
        const auto summary = acc.summary(misfits, acceptance);
        const auto estimate = estimate_support(summary, map);
        json phases = json::array();
        for (double w : c.levelset.values) {
            phases.push_back({{"value", w}, {"iou", iou_phase(estimate, truth_f, problem.quad, w)}});
        }
        result["iou"] = iou(estimate, truth_f, problem.quad);
        result["iou_per_phase"] = phases;
        result["pixel_accuracy"] = pixel_accuracy(estimate, truth_f, problem.quad);
        io::write_atomic(out_dir / "summary.pgm", [&](std::ostream& o) {
            write_pgm(o, problem.mesh, summary.mean_phi, c.levelset, c.pgm_size, c.pgm_size);
        });
        io::write_atomic(out_dir / "mean_phi.csv",
                         [&](std::ostream& o) { write_nodal_csv(o, problem.mesh, summary.mean_phi); });
    } else {
        result["iou"] = nullptr;
        result["iou_per_phase"] = json::array();
        result["pixel_accuracy"] = nullptr;
    }
    io::write_atomic(out_dir / "result.json", result.dump(2) + "\n");
    return result;
}

/// Runs `chains` independent pCN chains (seeds seed + i) against data.csv in
/// `out_dir`, writes diagnostics and samples, then summarizes.
inline json run_sample(const ExperimentConfig& c, std::uint64_t seed, int chains, const fs::path& out_dir) {
    if (chains < 1) throw ConfigError("--chains must be >= 1");
    const auto problem = make_problem(c);
    std::ifstream din(out_dir / "data.csv");
    if (!din) throw io::IoError("missing " + (out_dir / "data.csv").string() + "; run `simulate` first");
    const auto data = read_data_csv(din);
    const auto system = assemble_forward(problem.quad, problem.setup);
    const LevelSetMap map(problem.mesh, problem.quad, c.levelset);
    const Potential potential(system, data, c.delta, map);
    const auto prior = make_prior(c, problem.mesh);
    const auto chain = c.chain();
    chain.validate();

    fs::create_directories(out_dir);
    const auto dims = static_cast<std::size_t>(prior.dimension());
    std::vector<fs::path> bodies(static_cast<std::size_t>(chains));
    std::vector<ChainDiagnostics> diags(static_cast<std::size_t>(chains));
    parallel_for(static_cast<std::size_t>(chains), [&](std::size_t i) {
        bodies[i] = out_dir / ("samples_chain" + std::to_string(i) + ".part");
        std::ofstream body(bodies[i], std::ios::binary | std::ios::trunc);
        if (!body) throw io::IoError("cannot write " + bodies[i].string());
        auto sink = [&](const Eigen::VectorXd& p, std::uint64_t) { io::write_sample(body, p); };
        if (prior.matern) {
            diags[i] = run_chain(chain, MaternPrior(*prior.matern), potential, seed + i, sink);
        } else {
            diags[i] = run_chain(chain, RbfPrior(*prior.rbf), potential, seed + i, sink);
        }
    });

    const auto per_chain = static_cast<std::size_t>(chain.retained());
    io::write_atomic(out_dir / "samples.bin", [&](std::ostream& o) {
        io::write_sample_header(o, dims, per_chain * static_cast<std::size_t>(chains));
        for (const auto& b : bodies) {
            std::ifstream in(b, std::ios::binary);
            o << in.rdbuf();
        }
    });
    for (const auto& b : bodies) fs::remove(b);
    // Stale diagnostics from an earlier run with more chains would be picked up by summarize.
    for (int i = chains; fs::exists(diagnostics_path(out_dir, i)); ++i) fs::remove(diagnostics_path(out_dir, i));
    for (int i = 0; i < chains; ++i) {
        io::write_atomic(diagnostics_path(out_dir, i),
                         [&](std::ostream& o) { io::write_diagnostics(o, diags[static_cast<std::size_t>(i)]); });
    }
    return run_summarize(c, out_dir);
}

/// Builds a preset, writes config.json, simulates data and samples.
inline json run_reproduce(const std::string& name, double scale, std::uint64_t seed, int chains,
                          const fs::path& out_dir) {
    auto c = preset(name, scale);
    c.seed = seed;
    c.chains = chains;
    c.output_dir = out_dir.string();
    io::write_atomic(out_dir / "config.json", serialize_config(c));
    run_mesh(c, out_dir);
    run_simulate(c, seed, out_dir);
    return run_sample(c, seed, chains, out_dir);
}

}  // namespace helioset::experiment

#endif  // HELIOSET_EXPERIMENT_HPP
