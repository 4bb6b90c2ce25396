#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "helioset/experiment.hpp"

using namespace helioset;
namespace ex = helioset::experiment;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("helioset_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) { return io::read_text(p); }

// small, fast configuration
ex::ExperimentConfig small_config() {
    ex::ExperimentConfig c;
    c.wavenumbers = {1.0, 2.5};
    c.mesh_h = 0.4;
    c.steps = 400;
    c.burn_in = 100;
    c.thin = 10;
    c.beta = 0.2;
    c.prior.kind = ex::PriorKind::rbf;
    c.prior.centers = CenterMode::grid;
    c.pgm_size = 16;
    return c;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(HELIOSET_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Truth, RasterizeDisk) {
    const auto mesh = generate_disk_mesh({1, 1}, 2.0, 0.05);
    const auto quad = build_quadrature(mesh, 3);
    const auto f = ex::rasterize_truth(ex::TruthShape::disk({1, 1}, 0.5), quad);
    double area = 0;
    for (std::size_t q = 0; q < quad.size(); ++q) area += quad.weights[q] * f[q];
    EXPECT_NEAR(area, pi * 0.25, 0.02 * pi * 0.25);
}

TEST(Truth, UnionAndEmbedded) {
    const auto mesh = generate_disk_mesh({1, 1}, 2.0, 0.2);
    const auto quad = build_quadrature(mesh, 3);
    const auto a = ex::TruthShape::disk({0.2, 1.0}, 0.5), b = ex::TruthShape::disk({1.9, 1.2}, 0.5);
    const auto u = ex::rasterize_truth(ex::TruthShape::union_of({a, b}), quad);
    EXPECT_EQ(u, ex::rasterize_truth(a, quad) + ex::rasterize_truth(b, quad));

    const auto e = ex::TruthShape::embedded(ex::TruthShape::disk({1, 1}, 1.0), ex::TruthShape::disk({1, 1}, 0.4), 1.0, 2.0);
    const auto f = ex::rasterize_truth(e, quad);
    for (std::size_t q = 0; q < quad.size(); ++q) {
        const double r = dist(quad.points[q], {1, 1});
        EXPECT_EQ(f[q], r <= 0.4 ? 2.0 : (r <= 1.0 ? 1.0 : 0.0));
    }
}

TEST(Truth, LShape) {
    const auto l = ex::TruthShape::lshape({0, 0, 2, 2});
    EXPECT_TRUE(l.contains({0.5, 0.5}));
    EXPECT_TRUE(l.contains({1.5, 0.5}));
    EXPECT_TRUE(l.contains({0.5, 1.5}));
    EXPECT_FALSE(l.contains({1.5, 1.5}));
    EXPECT_FALSE(l.contains({2.5, 0.5}));
    EXPECT_TRUE(l.inside(Disk{{1, 1}, 2}));
    EXPECT_FALSE(l.inside(Disk{{1, 1}, 1}));
}

TEST(Config, RoundTrip) {
    auto c = small_config();
    c.truth = ex::TruthShape::embedded(ex::TruthShape::lshape({0.2, 0.2, 1.8, 1.8}), ex::TruthShape::disk({0.6, 0.6}, 0.2), 1.0, 2.5);
    c.levelset = {{0.0, 1.0}, {0.0, 1.0, 2.5}};
    c.noise = 0.0;
    c.prior.clip_to_disk = true;
    c.prior.width = 0.3;
    const auto text = ex::serialize_config(c);
    const auto back = ex::parse_config(text);
    EXPECT_EQ(back, c);
    EXPECT_EQ(ex::serialize_config(back), text);

    auto m = ex::ExperimentConfig{};
    m.truth = ex::TruthShape::union_of({ex::TruthShape::disk({0.5, 0.5}, 0.3), ex::TruthShape::disk({1.5, 1.5}, 0.3)});
    EXPECT_EQ(ex::parse_config(ex::serialize_config(m)), m);
    EXPECT_EQ(ex::parse_config("{}"), ex::ExperimentConfig{});
}

TEST(Config, ValidationMessagesCarryPaths) {
    auto expect_error = [](const std::string& text, const std::string& fragment) {
        try {
            ex::parse_config(text);
            ADD_FAILURE() << "no error for " << text;
        } catch (const ex::ConfigError& e) {
            EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
        }
    };
    expect_error(R"({"chain": {"delta": 0}})", "/chain/delta");
    expect_error(R"({"chain": {"steps": 100, "burn_in": 100}})", "/chain/steps");
    expect_error(R"({"chain": {"steps": "many"}})", "/chain/steps");
    expect_error(R"({"geometry": {"square_lo": [0, 0], "square_hi": [2, 2]}})", "/geometry");
    expect_error(R"({"truth": {"type": "disk", "center": [3, 3], "radius": 0.5}})", "/truth");
    expect_error(R"({"truth": {"type": "blob"}})", "/truth/type");
    expect_error(R"({"truth": {"type": "union", "parts": [{"type": "disk", "center": [1]}]}})", "/truth/parts/0");
    expect_error(R"({"prior": {"type": "matern", "nu": 2}})", "/prior");
    expect_error(R"({"prior": {"type": "gp"}})", "/prior/type");
    expect_error(R"({"levelset": {"thresholds": [0], "values": [1]}})", "/levelset");
    expect_error(R"({"mesh": {"quadrature_order": 2}})", "/mesh/quadrature_order");
    expect_error("{\n  \"chain\": {\n    \"beta\": 0.1,\n  }\n}", "line 4");
}

TEST(Io, SamplesRoundTrip) {
    std::stringstream ss;
    io::write_sample_header(ss, 3, 2);
    io::write_sample(ss, Eigen::Vector3d(1.5, -2.0, 1e-300));
    io::write_sample(ss, Eigen::Vector3d(0.0, 3.25, -7.0));
    const auto raw = ss.str();
    EXPECT_EQ(raw.substr(0, 11), "HLSET1 3 2\n");
    EXPECT_EQ(raw.size(), 11u + 48u);
    // little-endian 1.5 = 0x3FF8000000000000
    EXPECT_EQ(static_cast<unsigned char>(raw[11 + 7]), 0x3F);
    EXPECT_EQ(static_cast<unsigned char>(raw[11 + 6]), 0xF8);
    const auto dump = io::read_samples(ss);
    ASSERT_EQ(dump.samples.size(), 2u);
    EXPECT_EQ(dump.samples[0], Eigen::Vector3d(1.5, -2.0, 1e-300));
    std::stringstream truncated(raw.substr(0, raw.size() - 3));
    EXPECT_THROW(io::read_samples(truncated), io::IoError);
    std::stringstream bad("HLSET2 1 1\n");
    EXPECT_THROW(io::read_samples(bad), io::IoError);
}

TEST(Io, DiagnosticsRoundTrip) {
    ChainDiagnostics d;
    d.trace = {{0, false, 10.5, 3.0}, {1, true, 4.25, 2.0}, {2, false, 4.25, 2.0}};
    d.steps = 2;
    d.accepted = 1;
    std::stringstream ss;
    io::write_diagnostics(ss, d);
    const auto r = io::read_diagnostics(ss);
    EXPECT_EQ(r.steps, 2u);
    EXPECT_EQ(r.accepted, 1u);
    ASSERT_EQ(r.trace.size(), 3u);
    EXPECT_EQ(r.trace[1].potential, 4.25);
}

TEST(Io, AtomicWriteLeavesNoTemp) {
    const auto dir = scratch("atomic");
    io::write_atomic(dir / "a.txt", "hello");
    EXPECT_EQ(slurp(dir / "a.txt"), "hello");
    EXPECT_FALSE(fs::exists(dir / "a.txt.tmp"));
    // a failing producer leaves the previous file intact
    EXPECT_THROW(io::write_atomic(dir / "a.txt", [](std::ostream& o) {
                     o << "partial";
                     throw std::runtime_error("killed");
                 }),
                 std::runtime_error);
    EXPECT_EQ(slurp(dir / "a.txt"), "hello");
}

TEST(Pipeline, InverseCrimeModeGivesZeroTruthMisfit) {
    const auto dir = scratch("crime");
    auto c = small_config();
    c.noise = 0.0;
    c.truth_refinement = 1;
    ex::run_simulate(c, 5, dir);
    const auto result = ex::run_sample(c, 5, 1, dir);
    EXPECT_EQ(result["truth_misfit"].get<double>(), 0.0);
}

TEST(Pipeline, ArtifactsAndDeterminism) {
    const auto a = scratch("det_a"), b = scratch("det_b");
    const auto c = small_config();
    for (const auto& dir : {a, b}) {
        ex::run_mesh(c, dir);
        ex::run_simulate(c, 9, dir);
        ex::run_sample(c, 9, 2, dir);
    }
    for (const char* f : {"mesh.txt", "data.csv", "diagnostics.csv", "diagnostics_chain1.csv", "samples.bin",
                          "mean_phi.csv", "summary.pgm", "result.json"}) {
        ASSERT_TRUE(fs::exists(a / f)) << f;
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    }
    const auto dump = [&] {
        std::ifstream in(a / "samples.bin", std::ios::binary);
        return io::read_samples(in);
    }();
    EXPECT_EQ(dump.dims, 25u);
    EXPECT_EQ(dump.samples.size(), 2u * static_cast<std::size_t>(c.chain().retained()));

    // summarize reproduces the record written by sample
    const auto before = slurp(a / "result.json");
    ex::run_summarize(c, a);
    EXPECT_EQ(slurp(a / "result.json"), before);

    // rerunning with one chain removes the second chain's diagnostics
    ex::run_sample(c, 9, 1, a);
    EXPECT_FALSE(fs::exists(a / "diagnostics_chain1.csv"));
}

TEST(Pipeline, DefaultsSmokeResultSchema) {
    const auto dir = scratch("smoke");
    ex::ExperimentConfig c;  // beta 0.01, delta 0.01, Matern nu = 1
    c.mesh_h = 0.25;
    c.n_freq = 3;
    c.f_max = 300.0;
    c.steps = 300;
    c.burn_in = 60;
    c.thin = 10;
    c.pgm_size = 32;
    ex::run_simulate(c, 1, dir);
    ex::run_sample(c, 1, 1, dir);
    const auto r = ex::json::parse(slurp(dir / "result.json"));
    EXPECT_EQ(r["schema"], "helioset-result/1");
    EXPECT_EQ(r["prior"], "matern");
    for (const char* k : {"acceptance_rate", "initial_misfit", "final_misfit", "final_window_mean_misfit",
                          "truth_misfit", "iou", "pixel_accuracy"}) {
        ASSERT_TRUE(r.contains(k)) << k;
        EXPECT_TRUE(r[k].is_number()) << k;
    }
    for (const char* k : {"n_dims", "n_steps", "n_samples_used", "chains"}) {
        ASSERT_TRUE(r.contains(k)) << k;
        EXPECT_TRUE(r[k].is_number_unsigned()) << k;
    }
    EXPECT_EQ(r["n_steps"], 300);
    EXPECT_EQ(r["n_samples_used"], 24);
    ASSERT_TRUE(r["iou_per_phase"].is_array());
    EXPECT_EQ(r["iou_per_phase"].size(), 2u);
    EXPECT_GE(r["acceptance_rate"].get<double>(), 0.0);
    EXPECT_LE(r["acceptance_rate"].get<double>(), 1.0);
    EXPECT_GE(r["iou"].get<double>(), 0.0);
    EXPECT_LE(r["iou"].get<double>(), 1.0);
    const auto pgm = slurp(dir / "summary.pgm");
    EXPECT_EQ(pgm.substr(0, 13), "P5\n32 32\n255\n");
    EXPECT_EQ(pgm.size(), 13u + 32u * 32u);
}

TEST(Pipeline, Presets) {
    for (const char* name : {"fig4", "fig5", "fig6"}) {
        const auto c = ex::preset(name, 1.0);
        EXPECT_NO_THROW(ex::validate(c));
        EXPECT_EQ(ex::parse_config(ex::serialize_config(c)), c);
    }
    EXPECT_EQ(ex::preset("fig6", 1.0).prior.kind, ex::PriorKind::rbf);
    EXPECT_EQ(ex::preset("fig5", 1.0).levelset.values.size(), 3u);
    EXPECT_LT(ex::preset("fig4", 0.1).steps, ex::preset("fig4", 1.0).steps);
    EXPECT_GT(ex::preset("fig4", 0.1).mesh_h, ex::preset("fig4", 1.0).mesh_h);
    EXPECT_THROW(ex::preset("fig9", 1.0), ex::ConfigError);
    EXPECT_THROW(ex::preset("fig4", 0.0), ex::ConfigError);
}

TEST(Cli, ExitCodes) {
    const auto dir = scratch("cli");
    io::write_atomic(dir / "bad.json", R"({"chain": {"delta": -1}})");
    EXPECT_EQ(run_cli("simulate --config " + (dir / "bad.json").string() + " --out " + dir.string()), 2);
    EXPECT_EQ(run_cli("sample --out " + (dir / "empty").string()), 1);
    EXPECT_NE(run_cli("reproduce fig7"), 0);
    EXPECT_NE(run_cli(""), 0);
    io::write_atomic(dir / "ok.json", ex::serialize_config(small_config()));
    EXPECT_EQ(run_cli("mesh --config " + (dir / "ok.json").string() + " --out " + dir.string()), 0);
    EXPECT_TRUE(fs::exists(dir / "mesh.txt"));
}
