#pragma once

#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tse/grid.hpp"
#include "tse/physics.hpp"

namespace tse {

/// Relative L2 error over the grid, optionally excluding a set of lattice
/// indices (non-parametric baselines exclude their observation points).
double rel_l2_error(std::span<const double> estimate, std::span<const double> truth,
                    const std::vector<std::pair<int, int>>* exclude = nullptr, int nx = 0);

/// Per-time linear interpolation in x between detector columns, with
/// nearest-column extension beyond the outermost detectors. Exact at the
/// observation columns.
GridField interp2_baseline(const GridField& observed_field, std::span<const int> detector_cols,
                           const Domain& domain);

/// PUNN evaluated on the whole domain lattice. For ARZ variants both
/// fields are filled; for the NGSIM variant the velocity comes from the
/// flux head u = Q(rho)/rho.
GridField evaluate_on_grid(const ParamVector& params, const PhysicsSpec& spec,
                           const Domain& domain);

struct FdCurve {
    std::vector<double> rho;
    std::vector<double> value; // flux Q(rho), or rho*U_eq(rho) in velocity form
    std::vector<double> ueq;   // raw U_eq samples (velocity-form variants)
    bool velocity_form = false;
    double anchor_offset = 0.0; // constant removed from a flux-form curve
};

/// Samples the learned (or fixed) FD over [rho_lo, rho_hi]. Flux-form
/// curves for variants whose physics sees only Q' are anchored to Q(0)=0
/// when `anchor_zero` is set; the removed offset is reported in the curve.
FdCurve export_fd_curve(const ParamVector& params, const PhysicsSpec& spec, double rho_lo,
                        double rho_hi, int n_samples, bool anchor_zero = true);

struct FdFitError {
    double max_abs = 0.0;
    double rms = 0.0;
};

/// Max and RMS deviation between a curve and reference values sampled on
/// the same density lattice.
FdFitError fd_fit_error(std::span<const double> curve, std::span<const double> reference);

/// Per-run quality summary, serializable to JSON by the io module.
struct EstimationReport {
    std::string variant;
    double err_rho = 0.0;
    double err_u = 0.0; // 0 unless the variant estimates velocity
    std::map<std::string, double> learned_scalars;
    FdCurve fd_curve;
    int loops = 0;
    std::uint64_t seed = 0;
    double train_seconds = 0.0;
    double final_loss = 0.0;
    std::string config_hash;
};

} // namespace tse
