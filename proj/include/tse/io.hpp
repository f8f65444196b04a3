#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tse/eval.hpp"
#include "tse/grid.hpp"
#include "tse/objective.hpp"
#include "tse/solver.hpp"
#include "tse/training.hpp"

namespace tse {

struct SamplingConfig {
    int loops = 5;
    std::int64_t n_aux = 100000;
    int n_boundary = 650;
    std::uint64_t seed_aux = 1;
    std::uint64_t seed_boundary = 2;
};

struct PhysicsConfig {
    std::string variant = "lwr-fdl";
    int punn_hidden_layers = 8;
    int punn_hidden_width = 20;
    int fdl_hidden_layers = 2;
    int fdl_hidden_width = 20;
    std::string learn; // comma-separated subset of eps,tau,rho_max,u_max ("" = variant default)
    double eps_init = 0.0;
    double tau_init = 0.1;
    double rho_max_init = 1.0;
    double u_max_init = 1.0;
    bool learned_pressure = true;
    double rho_floor = 1e-3;
    double u_cap = 2.0;

    PhysicsSpec to_spec() const;
};

struct IoConfig {
    std::string out_dir = "runs";
    int log_every = 50;
    int chunk = 1024;
};

/// One file, one run: every knob of a training/evaluation run.
struct RunConfig {
    Domain domain{3.0, 1.0, 480, 120};
    SimConfig sim;
    SamplingConfig sampling;
    PhysicsConfig physics;
    LossWeights weights;
    RegConfig reg{0.6, 0.7, 101};
    TrainConfig train;
    IoConfig io;
};

/// Tuned single-machine run setups for the two numerical experiments; the
/// `reproduce` command and the acceptance suite start from these.
RunConfig default_lwr_run();
RunConfig default_arz_run();

/// Parse a key=value sectioned config file; unknown sections or keys are
/// rejected by name, missing keys take the documented defaults.
RunConfig load_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<inline>");
void save_config(const RunConfig& cfg, const std::string& path);
std::string config_to_text(const RunConfig& cfg);

/// FNV-1a hash of the canonical config text, as fixed-width hex.
std::string config_hash(const RunConfig& cfg);

// Grid fields: CSV with header t_index,x_index,rho[,u], row-major in time,
// plus a JSON metadata sidecar carrying the domain, sim parameters, and the
// producing config hash.
void write_field_csv(const std::string& path, const GridField& field);
GridField read_field_csv(const std::string& path);
void write_field_meta(const std::string& path, const Domain& domain, const SimConfig& sim,
                      const std::string& cfg_hash);
struct FieldMeta {
    Domain domain;
    SimConfig sim;
    std::string cfg_hash;
};
FieldMeta read_field_meta(const std::string& path);

/// Point-set audit export: columns t,x[,rho[,u]].
void write_points_csv(const std::string& path, std::span<const Point> pts,
                      std::span<const StateSample> targets = {});

// Pre-aggregated cell data (NGSIM-shaped): dense grid plus validity mask.
struct CellDataset {
    int nt = 0;
    int nx = 0;
    std::vector<double> rho, u;      // nt*nx, row-major in time
    std::vector<std::uint8_t> valid; // 1 = observed cell
    double cell_dx_m = 30.0;
    double cell_dt_s = 1.5;
    std::size_t n_missing = 0;

    std::size_t idx(int i, int j) const { return static_cast<std::size_t>(i) * nx + j; }
};

/// Reads header t_index,x_index,rho,u; absent cells are masked (a warning
/// is emitted above 5% missing), malformed or negative rows are errors
/// naming the offending line.
CellDataset ingest_cells(const std::string& path);
void write_cells_csv(const std::string& path, const CellDataset& cells);

struct Scales {
    double rho = 1.0; // veh/m per dimensionless density unit
    double u = 1.0;   // m/s per dimensionless speed unit
    double t = 1.0;   // s per unit time
    double x = 1.0;   // m per unit length
};

/// Scales cell data onto the unit lattice: rho by 1.1*max, u by 1.1*max,
/// t by the total duration, x by the segment length.
std::pair<GridField, Scales> nondimensionalize(const CellDataset& cells);
GridField dimensionalize(const GridField& field, const Scales& scales);

// Reports.
std::string train_report_to_json(const TrainReport& report);
TrainReport train_report_from_json(const std::string& text);
std::string estimation_report_to_json(const EstimationReport& report, const Scales* scales = nullptr);

} // namespace tse
