#include "tse/solver.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tse/errors.hpp"

namespace tse {

void SimConfig::validate() const {
    domain.validate();
    std::ostringstream bad;
    if (!(rho_max > 0.0)) bad << " rho_max=" << rho_max;
    if (!(u_max > 0.0)) bad << " u_max=" << u_max;
    if (model == Model::Lwr && eps < 0.0) bad << " eps=" << eps;
    if (model == Model::Arz && !(tau > 0.0)) bad << " tau=" << tau;
    if (!(cfl > 0.0 && cfl < 1.0)) bad << " cfl=" << cfl;
    if (!bad.str().empty()) throw ConfigError("invalid sim config:" + bad.str());
}

double greenshields_flux(double rho, double u_max, double rho_max) {
    return rho * u_max * (1.0 - rho / rho_max);
}

double greenshields_ueq(double rho, double u_max, double rho_max) {
    return u_max * (1.0 - rho / rho_max);
}

double bell_initial(double x) {
    const double s = (x - 0.5) / 0.2;
    return 0.1 + 0.8 * std::exp(-s * s);
}

namespace {

// Demand-supply Godunov flux for the concave Greenshields flux:
// F(l, r) = min(D(l), S(r)) with the critical density at rho_max/2.
double godunov_flux(double rho_l, double rho_r, double u_max, double rho_max) {
    const double rho_c = 0.5 * rho_max;
    const double demand = greenshields_flux(std::min(rho_l, rho_c), u_max, rho_max);
    const double supply = greenshields_flux(std::max(rho_r, rho_c), u_max, rho_max);
    return std::min(demand, supply);
}

int substep_count(double dt_record, double dt_max) {
    return std::max(1, static_cast<int>(std::ceil(dt_record / dt_max)));
}

void check_density_row(const std::vector<double>& rho, const char* scheme) {
    for (double r : rho) {
        if (!std::isfinite(r))
            throw NumericError(std::string(scheme) + " solver failure: non-finite density");
        if (r < -1e-12) {
            std::ostringstream msg;
            msg << scheme << " solver failure: negative density " << r;
            throw NumericError(msg.str());
        }
    }
}

} // namespace

GridField solve_lwr_godunov(const SimConfig& config, const Profile& rho0_in) {
    config.validate();
    if (config.model != Model::Lwr) throw ConfigError("solve_lwr_godunov requires model=lwr");
    const Profile rho0 = rho0_in ? rho0_in : Profile(bell_initial);

    const Domain& dom = config.domain;
    const int nx = dom.nx;
    const double dx = dom.L / nx; // ring cell width
    const double dt_record = dom.dt();

    std::vector<double> rho(nx), next(nx), flux(nx);
    for (int j = 0; j < nx; ++j) rho[j] = rho0((j + 0.5) * dx);
    check_density_row(rho, "godunov");

    GridField out(dom.nt, dom.nx);
    for (int j = 0; j < nx; ++j) out.rho_at(0, j) = rho[j];

    for (int i = 1; i < dom.nt; ++i) {
        // Wave-speed bound for this recording interval. |Q'| = u_max at the
        // vacuum/jam ends and grows linearly past rho_max.
        double smax = config.u_max;
        for (double r : rho)
            smax = std::max(smax, config.u_max * std::abs(1.0 - 2.0 * r / config.rho_max));
        // The monotonicity of the combined advection+diffusion update needs
        // the two Courant fractions to sum below one, which this harmonic
        // bound guarantees (it is sharper than min of the separate limits).
        const double dt_max = config.cfl / (smax / dx + 2.0 * config.eps / (dx * dx));
        const int n_sub = substep_count(dt_record, dt_max);
        const double dt = dt_record / n_sub;
        if (dt > dt_max * (1.0 + 1e-12))
            throw NumericError("godunov internal error: sub-step exceeds stability limit");

        for (int s = 0; s < n_sub; ++s) {
            for (int j = 0; j < nx; ++j) {
                const int jr = (j + 1 == nx) ? 0 : j + 1;
                flux[j] = godunov_flux(rho[j], rho[jr], config.u_max, config.rho_max);
            }
            for (int j = 0; j < nx; ++j) {
                const int jl = (j == 0) ? nx - 1 : j - 1;
                const int jr = (j + 1 == nx) ? 0 : j + 1;
                double v = rho[j] - dt / dx * (flux[j] - flux[jl]);
                if (config.eps > 0.0)
                    v += config.eps * dt / (dx * dx) * (rho[jl] - 2.0 * rho[j] + rho[jr]);
                next[j] = v;
            }
            rho.swap(next);
        }
        check_density_row(rho, "godunov");
        for (int j = 0; j < nx; ++j) out.rho_at(i, j) = std::max(rho[j], 0.0);
    }
    return out;
}

GridField solve_arz_lf(const SimConfig& config, const Profile& rho0_in, const Profile& u0_in) {
    config.validate();
    if (config.model != Model::Arz) throw ConfigError("solve_arz_lf requires model=arz");
    const Profile rho0 = rho0_in ? rho0_in : Profile(bell_initial);
    const Profile u0 = u0_in ? u0_in : Profile([&](double x) {
        return greenshields_ueq(rho0(x), config.u_max, config.rho_max);
    });

    const Domain& dom = config.domain;
    const int nx = dom.nx;
    const double dx = dom.L / nx;
    const double dt_record = dom.dt();
    // Traffic pressure h(rho) = U_eq(0) - U_eq(rho) = u_max * rho / rho_max.
    const double dh = config.u_max / config.rho_max; // h'(rho), constant for Greenshields

    std::vector<double> rho(nx), y(nx), u(nx);
    std::vector<double> rho_n(nx), y_n(nx), f_rho(nx), f_y(nx);
    for (int j = 0; j < nx; ++j) {
        const double xc = (j + 0.5) * dx;
        rho[j] = rho0(xc);
        u[j] = u0(xc);
        y[j] = rho[j] * (u[j] + dh * rho[j]);
    }

    auto recover_u = [&](int j) {
        if (!(rho[j] > 0.0)) {
            std::ostringstream msg;
            msg << "lax-friedrichs solver failure: rho=" << rho[j] << " at cell " << j;
            throw NumericError(msg.str());
        }
        return y[j] / rho[j] - dh * rho[j];
    };

    auto check_state = [&]() {
        for (int j = 0; j < nx; ++j) {
            if (!std::isfinite(rho[j]) || !std::isfinite(y[j]))
                throw NumericError("lax-friedrichs solver failure: non-finite state");
            u[j] = recover_u(j);
        }
    };
    check_state();

    GridField out(dom.nt, dom.nx, /*with_u=*/true);
    for (int j = 0; j < nx; ++j) {
        out.rho_at(0, j) = rho[j];
        out.u_at(0, j) = u[j];
    }

    // Characteristic speeds are u and u - rho*h'(rho).
    auto cell_speed = [&](int j) {
        return std::max(std::abs(u[j]), std::abs(u[j] - rho[j] * dh));
    };

    for (int i = 1; i < dom.nt; ++i) {
        double remaining = dt_record;
        while (remaining > 0.0) {
            double smax = 1e-12;
            for (int j = 0; j < nx; ++j) smax = std::max(smax, cell_speed(j));
            const double dt_max = std::min(config.cfl * dx / smax, 0.5 * config.tau);
            const int n_sub = substep_count(remaining, dt_max);
            const double dt = remaining / n_sub;
            remaining = (n_sub == 1) ? 0.0 : remaining - dt;

            // Local Lax-Friedrichs flux: interface dissipation scaled by the
            // larger of the two adjacent wave speeds.
            for (int j = 0; j < nx; ++j) {
                const int jr = (j + 1 == nx) ? 0 : j + 1;
                const double a = std::max(cell_speed(j), cell_speed(jr));
                f_rho[j] = 0.5 * (rho[j] * u[j] + rho[jr] * u[jr]) - 0.5 * a * (rho[jr] - rho[j]);
                f_y[j] = 0.5 * (y[j] * u[j] + y[jr] * u[jr]) - 0.5 * a * (y[jr] - y[j]);
            }
            for (int j = 0; j < nx; ++j) {
                const int jl = (j == 0) ? nx - 1 : j - 1;
                const double relax =
                    rho[j] * (greenshields_ueq(rho[j], config.u_max, config.rho_max) - u[j]) / config.tau;
                rho_n[j] = rho[j] - dt / dx * (f_rho[j] - f_rho[jl]);
                y_n[j] = y[j] - dt / dx * (f_y[j] - f_y[jl]) + dt * relax;
            }
            rho.swap(rho_n);
            y.swap(y_n);
            check_state();
        }
        for (int j = 0; j < nx; ++j) {
            out.rho_at(i, j) = rho[j];
            out.u_at(i, j) = u[j];
        }
    }
    return out;
}

} // namespace tse
