#ifndef HELIOSET_IO_HPP
#define HELIOSET_IO_HPP

// File plumbing shared by the CLI: atomic writes, the HLSET1 sample dump
// and the chain diagnostics CSV.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "helioset/common.hpp"
#include "helioset/mcmc.hpp"

namespace helioset::io {

namespace fs = std::filesystem;

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Writes through `<path>.tmp` and renames over `path`, so readers never
/// observe a partially written file.
inline void write_atomic(const fs::path& path, const std::function<void(std::ostream&)>& produce) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        produce(out);
        out.flush();
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    fs::rename(tmp, path);
}

inline void write_atomic(const fs::path& path, const std::string& content) {
    write_atomic(path, [&](std::ostream& out) { out << content; });
}

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

// ---------------------------------------------------------------------------
// HLSET1: ASCII line `HLSET1 <n_dims> <n_samples>\n`, then n_samples * n_dims
// little-endian float64 values, sample-major.

inline void write_f64_le(std::ostream& out, double v) {
    auto bits = std::bit_cast<std::uint64_t>(v);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(bytes, 8);
}

inline double read_f64_le(std::istream& in) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) throw IoError("HLSET1: truncated sample data");
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | bytes[i];
    return std::bit_cast<double>(bits);
}

inline void write_sample_header(std::ostream& out, std::size_t dims, std::size_t count) {
    out << "HLSET1 " << dims << ' ' << count << '\n';
}

inline void write_sample(std::ostream& out, const Eigen::VectorXd& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) write_f64_le(out, v[i]);
}

struct SampleDump {
    std::size_t dims = 0;
    std::vector<Eigen::VectorXd> samples;
};

inline SampleDump read_samples(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw IoError("HLSET1: empty file");
    std::istringstream hs(line);
    std::string magic;
    long long dims = -1, count = -1;
    if (!(hs >> magic >> dims >> count) || magic != "HLSET1" || dims < 0 || count < 0) {
        throw IoError("HLSET1: malformed header `" + line + "`");
    }
    SampleDump dump;
    dump.dims = static_cast<std::size_t>(dims);
    dump.samples.reserve(static_cast<std::size_t>(count));
    for (long long s = 0; s < count; ++s) {
        Eigen::VectorXd v(dims);
        for (long long i = 0; i < dims; ++i) v[i] = read_f64_le(in);
        dump.samples.push_back(std::move(v));
    }
    if (in.peek() != std::char_traits<char>::eof()) throw IoError("HLSET1: trailing bytes after samples");
    return dump;
}

// ---------------------------------------------------------------------------
// Diagnostics CSV: `step,accepted,potential,misfit`

inline void write_diagnostics(std::ostream& out, const ChainDiagnostics& diag) {
    std::ostringstream buf;
    buf.precision(17);
    buf << "step,accepted,potential,misfit\n";
    for (const auto& r : diag.trace) {
        buf << r.step << ',' << (r.accepted ? 1 : 0) << ',' << r.potential << ',' << r.misfit << '\n';
    }
    out << buf.str();
}

inline ChainDiagnostics read_diagnostics(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("step,accepted,potential,misfit", 0) != 0) {
        throw IoError("diagnostics csv: expected header `step,accepted,potential,misfit`");
    }
    ChainDiagnostics diag;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        TraceRow r;
        int acc = 0;
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(ls >> r.step >> c1 >> acc >> c2 >> r.potential >> c3 >> r.misfit)) {
            throw IoError("diagnostics csv: malformed line " + std::to_string(line_no));
        }
        r.accepted = acc != 0;
        diag.trace.push_back(r);
    }
    if (diag.trace.empty()) throw IoError("diagnostics csv: no rows");
    diag.steps = diag.trace.back().step;
    for (std::size_t i = 1; i < diag.trace.size(); ++i) diag.accepted += diag.trace[i].accepted ? 1 : 0;
    return diag;
}

}  // namespace helioset::io

#endif  // HELIOSET_IO_HPP
