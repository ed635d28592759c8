#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gcsdyn/gcs.hpp"
#include "gcsdyn/grid.hpp"
#include "gcsdyn/trajectory.hpp"
#include "gcsdyn/types.hpp"

namespace gcsdyn {

// All text output carries 17 significant digits so a double survives the
// write/read round trip bit for bit.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
}

namespace detail {

inline std::ofstream open_for_write(const std::string& path,
                                    std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    return out;
}

inline std::ifstream open_for_read(const std::string& path,
                                   std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) throw std::runtime_error("cannot open " + path + " for reading");
    return in;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

inline double parse_csv_double(const std::string& s, const std::string& path, std::size_t row) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(s, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used != s.size() || s.empty())
        throw std::runtime_error(path + ": row " + std::to_string(row) + ": bad number '" + s +
                                 "'");
    return v;
}

} // namespace detail

// Columns: t, norm, energy, one relative population n<i>_over_S per mode,
// then the solver diagnostics when the trajectory carries them. The exact
// propagator records no diagnostics and its files omit those two columns.
inline void write_trajectory_csv(const std::string& path, const Trajectory& traj) {
    if (traj.size() == 0) throw std::invalid_argument("write_trajectory_csv: empty trajectory");
    const int M = (int)traj.populations.front().size();
    const bool diag =
        traj.discarded.size() == traj.size() && traj.xi_drift.size() == traj.size();
    auto out = detail::open_for_write(path);
    out << "t,norm,energy";
    for (int i = 1; i <= M; ++i) out << ",n" << i << "_over_S";
    if (diag) out << ",discarded_directions,max_xi_norm_drift";
    out << "\n";
    for (std::size_t r = 0; r < traj.size(); ++r) {
        out << format_double(traj.times[r]) << ',' << format_double(traj.norms[r]) << ','
            << format_double(traj.energies[r]);
        for (int i = 0; i < M; ++i) out << ',' << format_double(traj.populations[r][i]);
        if (diag)
            out << ',' << traj.discarded[r] << ',' << format_double(traj.xi_drift[r]);
        out << "\n";
    }
    if (!out) throw std::runtime_error("write_trajectory_csv: write to " + path + " failed");
}

// Reads either column layout back; snapshots and amplitudes are not part of
// the text format and stay empty.
inline Trajectory read_trajectory_csv(const std::string& path) {
    auto in = detail::open_for_read(path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty file");
    const auto header = detail::split_csv_line(line);
    if (header.size() < 4 || header[0] != "t" || header[1] != "norm" || header[2] != "energy")
        throw std::runtime_error(path + ": not a trajectory file, header starts '" + line + "'");
    int M = 0;
    while (3 + M < (int)header.size() &&
           header[3 + M] == "n" + std::to_string(M + 1) + "_over_S")
        ++M;
    if (M == 0) throw std::runtime_error(path + ": no population columns in header");
    const bool diag = 3 + M < (int)header.size();
    const std::size_t want = 3 + M + (diag ? 2 : 0);
    if (header.size() != want)
        throw std::runtime_error(path + ": unexpected trailing columns in header");

    Trajectory traj;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != want)
            throw std::runtime_error(path + ": row " + std::to_string(row) + " has " +
                                     std::to_string(f.size()) + " fields, expected " +
                                     std::to_string(want));
        traj.times.push_back(detail::parse_csv_double(f[0], path, row));
        traj.norms.push_back(detail::parse_csv_double(f[1], path, row));
        traj.energies.push_back(detail::parse_csv_double(f[2], path, row));
        VectorR pop(M);
        for (int i = 0; i < M; ++i) pop[i] = detail::parse_csv_double(f[3 + i], path, row);
        traj.populations.push_back(std::move(pop));
        if (diag) {
            traj.discarded.push_back(
                (std::int64_t)detail::parse_csv_double(f[3 + M], path, row));
            traj.xi_drift.push_back(detail::parse_csv_double(f[4 + M], path, row));
        }
    }
    if (traj.size() == 0) throw std::runtime_error(path + ": no data rows");
    return traj;
}

// One row per (basis state, mode) pair with the complex grid coordinate.
inline void write_ensemble_csv(const std::string& path, const std::vector<GCSParams>& basis_set) {
    if (basis_set.empty()) throw std::invalid_argument("write_ensemble_csv: empty basis set");
    auto out = detail::open_for_write(path);
    out << "basis_index,mode_index,re_xi,im_xi\n";
    for (std::size_t k = 0; k < basis_set.size(); ++k) {
        const VectorC& xi = basis_set[k].xi;
        for (Eigen::Index i = 0; i < xi.size(); ++i) {
            out << k + 1 << ',' << i + 1 << ',' << format_double(xi[i].real()) << ','
                << format_double(xi[i].imag()) << "\n";
        }
    }
    if (!out) throw std::runtime_error("write_ensemble_csv: write to " + path + " failed");
}

// Sphere coordinates of a two-mode basis set, for plotting grid coverage.
inline void write_bloch_csv(const std::string& path, const std::vector<GCSParams>& basis_set) {
    if (basis_set.empty()) throw std::invalid_argument("write_bloch_csv: empty basis set");
    auto out = detail::open_for_write(path);
    out << "basis_index,theta,phi\n";
    for (std::size_t k = 0; k < basis_set.size(); ++k) {
        const BlochAngles ang = bloch_coordinates(basis_set[k]);
        out << k + 1 << ',' << format_double(ang.theta) << ',' << format_double(ang.phi)
            << "\n";
    }
    if (!out) throw std::runtime_error("write_bloch_csv: write to " + path + " failed");
}

// Per-sample absolute gaps between the relative populations of two runs over
// the same time grid, one column per mode.
inline void write_comparison_csv(const std::string& path, const Trajectory& a,
                                 const Trajectory& b) {
    if (a.size() == 0 || a.size() != b.size())
        throw std::invalid_argument("write_comparison_csv: trajectories differ in length");
    const int M = (int)a.populations.front().size();
    if ((int)b.populations.front().size() != M)
        throw std::invalid_argument("write_comparison_csv: trajectories differ in mode count");
    auto out = detail::open_for_write(path);
    out << "t";
    for (int i = 1; i <= M; ++i) out << ",abs_dn" << i << "_over_S";
    out << "\n";
    for (std::size_t r = 0; r < a.size(); ++r) {
        if (std::abs(a.times[r] - b.times[r]) > 1e-9 * std::max(1.0, std::abs(a.times[r])))
            throw std::invalid_argument("write_comparison_csv: time grids differ at row " +
                                        std::to_string(r));
        out << format_double(a.times[r]);
        for (int i = 0; i < M; ++i)
            out << ',' << format_double(std::abs(a.populations[r][i] - b.populations[r][i]));
        out << "\n";
    }
    if (!out) throw std::runtime_error("write_comparison_csv: write to " + path + " failed");
}

// Largest per-mode relative population gap between two runs over a shared
// time grid.
inline double max_population_deviation(const Trajectory& a, const Trajectory& b) {
    if (a.size() == 0 || a.size() != b.size())
        throw std::invalid_argument("max_population_deviation: trajectories differ in length");
    double dev = 0.0;
    for (std::size_t r = 0; r < a.size(); ++r) {
        if (std::abs(a.times[r] - b.times[r]) > 1e-9 * std::max(1.0, std::abs(a.times[r])))
            throw std::invalid_argument("max_population_deviation: time grids differ at row " +
                                        std::to_string(r));
        if (a.populations[r].size() != b.populations[r].size())
            throw std::invalid_argument("max_population_deviation: mode counts differ");
        dev = std::max(dev, (a.populations[r] - b.populations[r]).cwiseAbs().maxCoeff());
    }
    return dev;
}

// Binary state snapshot, little endian: an 8 byte magic, int64 M, S, N, a
// double timestamp, then re/im pairs of the N coefficients followed by the
// grid points mode by mode (all N values of mode 1, then mode 2, ...).
inline constexpr char kSnapshotMagic[8] = {'G', 'C', 'S', 'S', 'N', 'A', 'P', '1'};

struct SnapshotRecord {
    std::int64_t S = 0;
    EnsembleSnapshot snap;
};

namespace detail {

inline void put_i64(std::ostream& out, std::int64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void put_f64(std::ostream& out, double v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline std::int64_t get_i64(std::istream& in, const std::string& path) {
    std::int64_t v = 0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw std::runtime_error(path + ": truncated snapshot");
    return v;
}

inline double get_f64(std::istream& in, const std::string& path) {
    double v = 0.0;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof v))
        throw std::runtime_error(path + ": truncated snapshot");
    return v;
}

} // namespace detail

inline void write_snapshot(const std::string& path, const EnsembleSnapshot& snap,
                           std::int64_t S) {
    const std::int64_t N = snap.A.size();
    const std::int64_t M = snap.xi.rows();
    if (N < 1 || M < 1 || snap.xi.cols() != N)
        throw std::invalid_argument("write_snapshot: inconsistent snapshot shape");
    if (S < 1) throw std::invalid_argument("write_snapshot: S must be >= 1");
    auto out = detail::open_for_write(path, std::ios::binary);
    out.write(kSnapshotMagic, sizeof kSnapshotMagic);
    detail::put_i64(out, M);
    detail::put_i64(out, S);
    detail::put_i64(out, N);
    detail::put_f64(out, snap.t);
    for (std::int64_t k = 0; k < N; ++k) {
        detail::put_f64(out, snap.A[k].real());
        detail::put_f64(out, snap.A[k].imag());
    }
    for (std::int64_t m = 0; m < M; ++m) {
        for (std::int64_t k = 0; k < N; ++k) {
            detail::put_f64(out, snap.xi(m, k).real());
            detail::put_f64(out, snap.xi(m, k).imag());
        }
    }
    if (!out) throw std::runtime_error("write_snapshot: write to " + path + " failed");
}

inline SnapshotRecord read_snapshot(const std::string& path) {
    auto in = detail::open_for_read(path, std::ios::binary);
    char magic[8] = {};
    if (!in.read(magic, sizeof magic) || std::memcmp(magic, kSnapshotMagic, sizeof magic) != 0)
        throw std::runtime_error(path + ": not a snapshot file");
    SnapshotRecord rec;
    const std::int64_t M = detail::get_i64(in, path);
    rec.S = detail::get_i64(in, path);
    const std::int64_t N = detail::get_i64(in, path);
    if (M < 1 || M > 1000000 || rec.S < 1 || N < 1 || N > 100000000)
        throw std::runtime_error(path + ": implausible snapshot header");
    rec.snap.t = detail::get_f64(in, path);
    rec.snap.A.resize(N);
    for (std::int64_t k = 0; k < N; ++k) {
        const double re = detail::get_f64(in, path);
        const double im = detail::get_f64(in, path);
        rec.snap.A[k] = Complex(re, im);
    }
    rec.snap.xi.resize(M, N);
    for (std::int64_t m = 0; m < M; ++m) {
        for (std::int64_t k = 0; k < N; ++k) {
            const double re = detail::get_f64(in, path);
            const double im = detail::get_f64(in, path);
            rec.snap.xi(m, k) = Complex(re, im);
        }
    }
    char extra = 0;
    if (in.read(&extra, 1)) throw std::runtime_error(path + ": trailing bytes after snapshot");
    return rec;
}

} // namespace gcsdyn
