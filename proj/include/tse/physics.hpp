#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tse/grid.hpp"
#include "tse/net.hpp"

namespace tse {

enum class Variant { LwrFdl, ArzFdl, LwrFixed, ArzFixed, LwrNgsim };

std::string variant_name(Variant v);
Variant variant_from_name(std::string_view name);

/// What stands in for the fundamental diagram inside the residual. The
/// learner variants run with Mlp; the closed forms exist so the surrogate
/// path can be driven with an exactly-known FD (consistency checks, and the
/// regression-first residual oracles).
enum class FdForm { Mlp, GreenshieldsFlux, GreenshieldsUeq };

/// Model variant plus everything needed to lay out and evaluate its
/// parameter vector.
struct PhysicsSpec {
    Variant variant = Variant::LwrFdl;
    MlpSpec punn{{2, 20, 20, 20, 20, 20, 20, 20, 20, 1}}; // 8 hidden layers x 20
    MlpSpec fdl{{1, 20, 20, 1}};                           // 2 hidden layers x 20
    FdForm fd_form = FdForm::Mlp;

    // Scalar model parameters; a scalar listed in `learnable` is appended to
    // the parameter vector (initialized from the value here), otherwise the
    // value here is used as a constant.
    double eps = 0.0;
    double tau = 0.1;
    double rho_max = 1.0;
    double u_max = 1.0;
    std::vector<std::string> learnable;

    bool learned_pressure = true; // ARZ traffic pressure from the learned U_eq
    double rho_floor = 1e-3;      // velocity-head guard (NGSIM variant)
    double u_cap = 2.0;           // velocity-head fallback below the floor

    static PhysicsSpec make_default(Variant v);
    void validate() const;

    bool is_arz() const { return variant == Variant::ArzFdl || variant == Variant::ArzFixed; }
    bool has_fdl() const {
        return variant == Variant::LwrFdl || variant == Variant::ArzFdl ||
               variant == Variant::LwrNgsim;
    }
    bool uses_second_x() const {
        return variant == Variant::LwrFdl || variant == Variant::LwrFixed;
    }
    int n_residuals() const { return is_arz() ? 2 : 1; }
    int punn_outputs() const { return is_arz() ? 2 : 1; }

    ParamLayout layout() const;
};

/// Xavier-initialized networks plus scalar defaults, deterministic in seed.
ParamVector init_params(const PhysicsSpec& spec, std::uint64_t seed);

/// Clamp constrained learnable scalars (tau, rho_max, u_max stay >= 1e-6).
void project_scalars(const PhysicsSpec& spec, ParamVector& params);

/// Batched residual evaluation with an optional exact reverse sweep.
/// forward() fills the residual components for one chunk of points;
/// backward() consumes per-point residual adjoints and accumulates the
/// parameter gradient. Columns are evaluated independently, so batch
/// results equal pointwise results bitwise.
class ResidualChunk {
public:
    explicit ResidualChunk(const PhysicsSpec& spec);

    void forward(const double* params, std::span<const Point> pts, bool keep_tape);
    std::span<const double> res(int k) const;
    /// PUNN value outputs of the last forward (row 0 = rho, row 1 = u).
    const Mat& punn_values() const { return punn_out_.value(); }

    void backward(const double* params, std::span<const double* const> res_bar, double* grad);

    const PhysicsSpec& spec() const { return spec_; }

private:
    void eval_fd(const double* params, bool keep_tape);
    void fd_backward(const double* params, double* grad);

    PhysicsSpec spec_;
    ParamLayout layout_;
    int n_ = 0;

    JetBatch punn_in_, punn_out_, punn_bar_;
    MlpTape punn_tape_;
    JetBatch fdl_in_, fdl_out_, fdl_bar_, fdl_in_bar_;
    MlpTape fdl_tape_;
    std::vector<double> fd_v_, fd_d_;   // surrogate value / derivative per point
    std::vector<double> fd_vbar_, fd_dbar_;
    std::vector<double> f1_, f2_;
};

// Single-point residual operators (thin wrappers over ResidualChunk).
double lwr_fdl_residual(const ParamVector& params, const PhysicsSpec& spec, Point pt);
std::pair<double, double> arz_fdl_residuals(const ParamVector& params, const PhysicsSpec& spec,
                                            Point pt);
double lwr_fixed_residual(const ParamVector& params, const PhysicsSpec& spec, Point pt);
std::pair<double, double> arz_fixed_residuals(const ParamVector& params, const PhysicsSpec& spec,
                                              Point pt);
double ngsim_lwr_residual(const ParamVector& params, const PhysicsSpec& spec, Point pt);

/// NGSIM velocity head u = Q(rho)/rho with the documented floor fallback.
double ngsim_velocity_head(const ParamVector& params, const PhysicsSpec& spec, Point pt);

} // namespace tse
