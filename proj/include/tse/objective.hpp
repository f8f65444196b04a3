#pragma once

#include <span>

#include "tse/grid.hpp"
#include "tse/physics.hpp"

namespace tse {

/// Loss hyperparameters. The plain (alpha..eta) set drives the LWR family;
/// the split set drives ARZ (and the NGSIM velocity term reuses alpha2).
/// xi scales the FD reshaping regularizer.
struct LossWeights {
    double alpha = 100.0, beta = 1.0, gamma = 1.0, eta = 1.0;
    double alpha1 = 100.0, alpha2 = 100.0;
    double beta1 = 1.0, beta2 = 1.0;
    double gamma1 = 1.0, gamma2 = 1.0;
    double xi = 0.0;

    void validate() const; // all weights non-negative
};

/// Density interval and quadrature resolution for the concavity reshaping
/// term.
struct RegConfig {
    double a = 0.6;
    double b = 0.7;
    int n_quad = 101;

    void validate() const;
};

/// Unweighted loss components (the total applies the weights).
struct LossBreakdown {
    double total = 0.0;
    double mse_o = 0.0;   // observation MSE on rho
    double mse_o_u = 0.0; // observation MSE on u (ARZ / NGSIM)
    double mse_a = 0.0;   // physics MSE of f1
    double mse_a2 = 0.0;  // physics MSE of f2 (ARZ)
    double b1 = 0.0;      // boundary value mismatch, rho
    double b1_u = 0.0;    // boundary value mismatch, u (ARZ)
    double b2 = 0.0;      // boundary slope mismatch (LWR)
    double reg = 0.0;     // concavity reshaping integral
};

/// Everything one training run minimizes over.
struct Problem {
    PhysicsSpec physics;
    TrainingSets data;
    LossWeights weights;
    RegConfig reg;
    double ring_length = 1.0; // boundary pairs are (t,0) and (t,ring_length)
    int chunk = 1024;

    void validate() const;
};

/// Scalar objective with an exact gradient; optimizers see only this.
class LossFunction {
public:
    virtual ~LossFunction() = default;
    virtual std::size_t n_params() const = 0;
    virtual double value(const ParamVector& params) const = 0;
    virtual double value_and_grad(const ParamVector& params, ParamVector& grad) const = 0;
    /// Constraint projection applied after every optimizer update.
    virtual void project(ParamVector& params) const {}
};

/// The composite PIDL(+FDL) training loss for every model variant.
class PidlLoss final : public LossFunction {
public:
    explicit PidlLoss(Problem problem);

    std::size_t n_params() const override { return layout_.total; }
    double value(const ParamVector& params) const override;
    double value_and_grad(const ParamVector& params, ParamVector& grad) const override;
    void project(ParamVector& params) const override;

    LossBreakdown breakdown(const ParamVector& params) const;
    const Problem& problem() const { return prob_; }
    const ParamLayout& layout() const { return layout_; }

private:
    double eval(const ParamVector& params, ParamVector* grad, LossBreakdown* parts) const;

    Problem prob_;
    ParamLayout layout_;
};

// Standalone components (value only), mirroring the loss pieces above.

/// Observation MSE per state variable: (rho, u). The u entry is 0 unless
/// the variant estimates velocity. Throws on an empty observation set.
std::pair<double, double> mse_observation(const ParamVector& params, const PhysicsSpec& spec,
                                          std::span<const Point> obs,
                                          std::span<const StateSample> targets);

/// Mean of squared residuals; throws on an empty batch.
double mse_physics(std::span<const double> residuals);

struct BoundaryTerms {
    double b1_rho = 0.0;
    double b1_u = 0.0;
    double b2 = 0.0;
};

/// Periodic-boundary mismatch terms over the boundary time set.
BoundaryTerms boundary_terms(const ParamVector& params, const PhysicsSpec& spec,
                             std::span<const double> boundary_times, double ring_length);

/// Same, from precomputed jets at (t,0) and (t,L); used where the boundary
/// values come from closed forms rather than a network.
BoundaryTerms boundary_terms_from_jets(std::span<const Jet> at0, std::span<const Jet> atL,
                                       bool with_slope);

/// Trapezoid integral of max(0, d2) over [a,b], given d2 sampled on the
/// uniform n_quad lattice of [a,b].
double concavity_reg_from_samples(std::span<const double> d2, const RegConfig& cfg);

/// Concavity reshaping term of the spec's FD. Flux-form variants penalize
/// the positive part of Q''; velocity-form (ARZ) penalizes the positive
/// part of (rho*U_eq)'' = 2*U_eq' + rho*U_eq''.
double concavity_reg(const ParamVector& params, const PhysicsSpec& spec, const RegConfig& cfg);

/// Weighted total loss; fills `parts` when given.
double total_loss(const Problem& prob, const ParamVector& params, LossBreakdown* parts = nullptr);

} // namespace tse
