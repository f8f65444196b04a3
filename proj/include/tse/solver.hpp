#pragma once

#include <functional>

#include "tse/grid.hpp"

namespace tse {

enum class Model { Lwr, Arz };

/// Physical setup for a ground-truth run on the periodic ring road.
struct SimConfig {
    Model model = Model::Lwr;
    double rho_max = 1.0;
    double u_max = 1.0;
    double eps = 0.005; // diffusion coefficient (LWR)
    double tau = 0.02;  // relaxation time (ARZ)
    double cfl = 0.9;   // sub-step safety factor
    Domain domain;

    void validate() const;
};

/// Greenshields flux Q(rho) = rho * u_max * (1 - rho/rho_max).
double greenshields_flux(double rho, double u_max, double rho_max);

/// Greenshields equilibrium speed U_eq(rho) = u_max * (1 - rho/rho_max).
double greenshields_ueq(double rho, double u_max, double rho_max);

/// Bell-shaped density profile 0.1 + 0.8*exp(-((x-0.5)/0.2)^2).
double bell_initial(double x);

using Profile = std::function<double(double)>;

/// First-order LWR with diffusion, rho_t + (Q(rho))_x = eps*rho_xx, solved
/// with the demand-supply Godunov flux plus explicit central diffusion.
/// Internal sub-steps honor both the advective CFL and the explicit
/// diffusion limit; states are recorded onto the domain lattice by index.
/// `rho0` defaults to bell_initial; it is sampled at cell centers.
GridField solve_lwr_godunov(const SimConfig& config, const Profile& rho0 = {});

/// Second-order ARZ with Greenshields equilibrium speed, advanced in the
/// conservative variables (rho, y = rho*(u + h(rho))) by the Lax-Friedrichs
/// scheme with an unsplit relaxation source. `u0` defaults to the local
/// equilibrium speed of `rho0`.
GridField solve_arz_lf(const SimConfig& config, const Profile& rho0 = {}, const Profile& u0 = {});

} // namespace tse
