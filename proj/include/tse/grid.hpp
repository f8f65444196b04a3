#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace tse {

/// Rectangular spatio-temporal domain [0,T] x [0,L] discretized as a
/// node lattice: t_i = i*T/(nt-1), x_j = j*L/(nx-1).
struct Domain {
    double T = 3.0;
    double L = 1.0;
    int nt = 960;
    int nx = 240;

    void validate() const; // throws ConfigError

    double dt() const { return T / (nt - 1); }
    double dx() const { return L / (nx - 1); }
    double t(int i) const { return T * i / (nt - 1); }
    double x(int j) const { return L * j / (nx - 1); }
    std::int64_t n_grid() const { return static_cast<std::int64_t>(nt) * nx; }
};

struct Point {
    double t = 0.0;
    double x = 0.0;
    bool operator==(const Point&) const = default;
};

/// Density (and optionally velocity) sampled on the domain lattice,
/// row-major in time: value(i,j) = data[i*nx + j].
struct GridField {
    int nt = 0;
    int nx = 0;
    std::vector<double> rho;
    std::vector<double> u; // empty for first-order fields

    GridField() = default;
    GridField(int nt_, int nx_, bool with_u = false)
        : nt(nt_), nx(nx_), rho(static_cast<std::size_t>(nt_) * nx_, 0.0) {
        if (with_u) u.assign(static_cast<std::size_t>(nt_) * nx_, 0.0);
    }

    bool has_u() const { return !u.empty(); }
    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * nx + j; }
    double& rho_at(int i, int j) { return rho[idx(i, j)]; }
    double rho_at(int i, int j) const { return rho[idx(i, j)]; }
    double& u_at(int i, int j) { return u[idx(i, j)]; }
    double u_at(int i, int j) const { return u[idx(i, j)]; }
};

/// Target state at one observation point.
struct StateSample {
    double rho = 0.0;
    double u = 0.0;
    bool has_u = false;
};

/// The three point families driving training. `targets` is aligned
/// index-for-index with `observations`; `boundary_times` expands to the
/// point pairs (t,0),(t,L) where it is consumed.
struct TrainingSets {
    std::vector<Point> observations;               // O
    std::vector<StateSample> targets;              // P
    std::vector<std::pair<int, int>> observation_idx; // (i,j) lattice indices of O
    std::vector<Point> auxiliary;                  // A
    std::vector<double> boundary_times;            // B
};

/// All lattice nodes, time-major: (t_0,x_0),(t_0,x_1),...,(t_1,x_0),...
std::vector<Point> build_grid(const Domain& domain);

/// Detector columns for `loops` evenly spaced loop detectors on the ring,
/// x_m = m*L/loops snapped to the nearest column in the ring metric
/// (j = round(m*nx/loops)); loops == nx covers every column.
std::vector<int> loop_columns(int loops, int nx); // throws ConfigError if loops out of range

/// Observations at every grid time of each detector column, with targets
/// read from `field`. Cells where `valid` (optional, nt*nx mask) is zero
/// are skipped.
void sample_loop_observations(const GridField& field, int loops, const Domain& domain,
                              TrainingSets& out,
                              const std::vector<std::uint8_t>* valid = nullptr);

/// Uniform random subset of the grid nodes, without replacement.
std::vector<Point> sample_auxiliary(const Domain& domain, std::int64_t n_aux, std::uint64_t seed);

/// Uniform random subset of the grid times, without replacement.
std::vector<double> sample_boundary(const Domain& domain, int n_boundary, std::uint64_t seed);

} // namespace tse
