#include <cmath>

#include "doctest.h"
#include "tse/errors.hpp"
#include "tse/eval.hpp"
#include "tse/solver.hpp"

using namespace tse;

TEST_CASE("relative l2 identities") {
    std::vector<double> truth = {0.5, 1.0, -2.0, 0.25};
    CHECK(rel_l2_error(truth, truth) == 0.0);
    std::vector<double> twice = truth;
    for (double& v : twice) v *= 2.0;
    CHECK(rel_l2_error(twice, truth) == 1.0);
    std::vector<double> zero(truth.size(), 0.0);
    CHECK(rel_l2_error(zero, truth) == 1.0);
    CHECK_THROWS_AS(rel_l2_error(truth, zero), NumericError); // zero-norm reference
}

TEST_CASE("relative l2 is scale invariant") {
    std::vector<double> truth = {0.5, 1.0, 2.0, 0.25, 0.7};
    std::vector<double> est = {0.4, 1.2, 1.9, 0.30, 0.9};
    const double base = rel_l2_error(est, truth);
    for (double c : {0.3, 7.0, 1e6}) {
        std::vector<double> et = est, tt = truth;
        for (double& v : et) v *= c;
        for (double& v : tt) v *= c;
        CHECK(rel_l2_error(et, tt) == doctest::Approx(base).epsilon(1e-12));
    }
}

TEST_CASE("relative l2 exclusion removes observation points") {
    // 2x3 grid; estimate wrong only at the excluded point
    std::vector<double> truth = {1, 1, 1, 1, 1, 1};
    std::vector<double> est = {1, 9, 1, 1, 1, 1};
    std::vector<std::pair<int, int>> excl = {{0, 1}};
    CHECK(rel_l2_error(est, truth) > 0.0);
    CHECK(rel_l2_error(est, truth, &excl, 3) == 0.0);
}

namespace {

GridField affine_field(const Domain& d, double a, double b, bool with_u = false) {
    GridField f(d.nt, d.nx, with_u);
    for (int i = 0; i < d.nt; ++i)
        for (int j = 0; j < d.nx; ++j) {
            f.rho_at(i, j) = a * d.x(j) + b * (i + 1);
            if (with_u) f.u_at(i, j) = 2.0 * a * d.x(j) + 0.5 * b * (i + 1);
        }
    return f;
}

} // namespace

TEST_CASE("interp2 reconstructs x-affine fields exactly with bracketing detectors") {
    Domain d{1.0, 1.0, 5, 17};
    GridField f = affine_field(d, 3.0, 0.1, true);
    std::vector<int> cols = {0, 7, 16}; // includes both ends
    GridField rec = interp2_baseline(f, cols, d);
    for (std::size_t k = 0; k < f.rho.size(); ++k) {
        CHECK(rec.rho[k] == doctest::Approx(f.rho[k]).epsilon(1e-14));
        CHECK(rec.u[k] == doctest::Approx(f.u[k]).epsilon(1e-14));
    }
}

TEST_CASE("interp2 with a single detector column is constant in x") {
    Domain d{1.0, 1.0, 4, 9};
    GridField f = affine_field(d, 2.0, 1.0);
    GridField rec = interp2_baseline(f, std::vector<int>{4}, d);
    for (int i = 0; i < d.nt; ++i)
        for (int j = 0; j < d.nx; ++j) CHECK(rec.rho_at(i, j) == f.rho_at(i, 4));
}

TEST_CASE("interp2 error decreases weakly with more loops on the smooth lwr field") {
    SimConfig sim;
    sim.domain = {3.0, 1.0, 120, 60};
    GridField truth = solve_lwr_godunov(sim);
    double prev = 1e9;
    for (int loops : {2, 3, 4, 5}) {
        const std::vector<int> cols = loop_columns(loops, sim.domain.nx);
        GridField rec = interp2_baseline(truth, cols, sim.domain);
        std::vector<std::pair<int, int>> excl;
        for (int i = 0; i < sim.domain.nt; ++i)
            for (int c : cols) excl.emplace_back(i, c);
        const double err = rel_l2_error(rec.rho, truth.rho, &excl, sim.domain.nx);
        CHECK(err <= prev + 1e-12);
        prev = err;
    }
}

TEST_CASE("fd curve export: closed forms and anchoring") {
    // Fixed-form variant exports the exact Greenshields flux.
    PhysicsSpec fixed = PhysicsSpec::make_default(Variant::LwrFixed);
    fixed.punn.widths = {2, 4, 1};
    fixed.learnable.clear();
    ParamVector p(fixed.layout().total, 0.0);
    FdCurve c = export_fd_curve(p, fixed, 0.0, 1.0, 3);
    REQUIRE(c.rho.size() == 3u);
    CHECK(c.value[0] == 0.0);
    CHECK(c.value[1] == doctest::Approx(0.25).epsilon(1e-15));
    CHECK(c.value[2] == doctest::Approx(0.0).epsilon(1e-15));

    // Velocity-form with constant U_eq = c exports the line c*rho.
    PhysicsSpec arz = PhysicsSpec::make_default(Variant::ArzFdl);
    arz.punn.widths = {2, 4, 2};
    arz.fdl.widths = {1, 4, 1};
    ParamVector q(arz.layout().total, 0.0);
    const double cval = 0.77;
    q[arz.layout().find("fdl").offset + arz.fdl.n_params() - 1] = cval; // output bias
    FdCurve vc = export_fd_curve(q, arz, 0.0, 1.0, 5);
    CHECK(vc.velocity_form);
    for (std::size_t k = 0; k < vc.rho.size(); ++k) {
        CHECK(vc.ueq[k] == doctest::Approx(cval).epsilon(1e-15));
        CHECK(vc.value[k] == doctest::Approx(cval * vc.rho[k]).epsilon(1e-15));
    }

    // LWR-FDL flux curves are anchored: a constant-output learner exports 0.
    PhysicsSpec fdl = PhysicsSpec::make_default(Variant::LwrFdl);
    fdl.punn.widths = {2, 4, 1};
    fdl.fdl.widths = {1, 4, 1};
    ParamVector r(fdl.layout().total, 0.0);
    r[fdl.layout().find("fdl").offset + fdl.fdl.n_params() - 1] = 0.33;
    FdCurve ac = export_fd_curve(r, fdl, 0.0, 1.0, 4);
    CHECK(ac.anchor_offset == doctest::Approx(0.33).epsilon(1e-15));
    for (double v : ac.value) CHECK(v == 0.0);
}

TEST_CASE("fd fit error statistics") {
    std::vector<double> a = {0.0, 0.2, 0.3};
    CHECK(fd_fit_error(a, a).max_abs == 0.0);
    CHECK(fd_fit_error(a, a).rms == 0.0);
    std::vector<double> b = a;
    for (double& v : b) v += 0.05;
    CHECK(fd_fit_error(b, a).max_abs == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(fd_fit_error(b, a).rms == doctest::Approx(0.05).epsilon(1e-12));
    CHECK_THROWS_AS(fd_fit_error(a, std::vector<double>{0.0}), ConfigError);

    // Greenshields resampled by linear interpolation stays within 1e-8.
    const int n_fine = 20001;
    std::vector<double> fine_rho(n_fine), fine_q(n_fine);
    for (int k = 0; k < n_fine; ++k) {
        fine_rho[k] = static_cast<double>(k) / (n_fine - 1);
        fine_q[k] = greenshields_flux(fine_rho[k], 1.0, 1.0);
    }
    const int n_coarse = 101;
    std::vector<double> resampled(n_coarse), direct(n_coarse);
    for (int k = 0; k < n_coarse; ++k) {
        const double rho = static_cast<double>(k) / (n_coarse - 1);
        const double pos = rho * (n_fine - 1);
        const int i0 = std::min(static_cast<int>(pos), n_fine - 2);
        const double w = pos - i0;
        resampled[k] = (1.0 - w) * fine_q[i0] + w * fine_q[i0 + 1];
        direct[k] = greenshields_flux(rho, 1.0, 1.0);
    }
    CHECK(fd_fit_error(resampled, direct).max_abs <= 1e-8);
}

TEST_CASE("evaluate_on_grid: constant network gives a constant field") {
    PhysicsSpec spec = PhysicsSpec::make_default(Variant::LwrFdl);
    spec.punn.widths = {2, 4, 1};
    spec.fdl.widths = {1, 4, 1};
    ParamVector p(spec.layout().total, 0.0);
    p[spec.layout().find("punn").offset + spec.punn.n_params() - 1] = 0.42;
    Domain d{1.0, 1.0, 6, 7};
    GridField f = evaluate_on_grid(p, spec, d);
    for (double v : f.rho) CHECK(v == doctest::Approx(0.42).epsilon(1e-15));
}
