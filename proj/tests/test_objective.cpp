#include <cmath>
#include <numbers>

#include "doctest.h"
#include "tse/errors.hpp"
#include "tse/objective.hpp"
#include "tse/rng.hpp"

using namespace tse;

namespace {

PhysicsSpec small_spec(Variant v = Variant::LwrFdl) {
    PhysicsSpec s = PhysicsSpec::make_default(v);
    s.punn.widths = {2, 5, s.is_arz() ? 2 : 1};
    s.fdl.widths = {1, 5, 1};
    return s;
}

ParamVector const_punn(const PhysicsSpec& spec, double c, double fdl_c = 0.0) {
    const ParamLayout layout = spec.layout();
    ParamVector p(layout.total, 0.0);
    std::size_t off = layout.find("punn").offset + spec.punn.n_params() - spec.punn.output_width();
    p[off] = c;
    if (layout.has("fdl")) p[layout.find("fdl").offset + spec.fdl.n_params() - 1] = fdl_c;
    if (layout.has("eps")) p[layout.find("eps").offset] = spec.eps;
    if (layout.has("tau")) p[layout.find("tau").offset] = spec.tau;
    return p;
}

} // namespace

TEST_CASE("observation mse: interpolation, offset, arithmetic") {
    PhysicsSpec spec = small_spec();
    ParamVector p = const_punn(spec, 0.42);
    std::vector<Point> obs = {{0.1, 0.2}, {0.5, 0.9}, {2.0, 0.0}};

    std::vector<StateSample> exact(obs.size(), StateSample{0.42, 0.0, false});
    CHECK(mse_observation(p, spec, obs, exact).first == 0.0);

    const double delta = 0.07;
    std::vector<StateSample> shifted(obs.size(), StateSample{0.42 - delta, 0.0, false});
    CHECK(mse_observation(p, spec, obs, shifted).first == doctest::Approx(delta * delta).epsilon(1e-12));

    ParamVector zero = const_punn(spec, 0.0);
    std::vector<Point> two = {{0.0, 0.0}, {1.0, 1.0}};
    std::vector<StateSample> tgt = {{0.0, 0.0, false}, {1.0, 0.0, false}};
    CHECK(mse_observation(zero, spec, two, tgt).first == doctest::Approx(0.5).epsilon(1e-15));

    CHECK_THROWS_AS(mse_observation(p, spec, {}, {}), ConfigError);
}

TEST_CASE("physics mse arithmetic") {
    CHECK(mse_physics(std::vector<double>{0.0, 0.0, 0.0}) == 0.0);
    CHECK(mse_physics(std::vector<double>{1.0, -1.0}) == 1.0);
    CHECK(mse_physics(std::vector<double>{0.3, 0.3, 0.3}) == doctest::Approx(0.09).epsilon(1e-15));
    CHECK_THROWS_AS(mse_physics(std::vector<double>{}), ConfigError);
}

TEST_CASE("boundary terms: periodic, linear, sine") {
    PhysicsSpec spec = small_spec();
    std::vector<double> btimes = {0.1, 0.7, 2.2};

    // constant punn is trivially ring-periodic
    ParamVector c = const_punn(spec, 0.3);
    BoundaryTerms bt = boundary_terms(c, spec, btimes, 1.0);
    CHECK(bt.b1_rho == 0.0);
    CHECK(bt.b2 == 0.0);

    // punn v = x: value gap is L^2, slope gap is zero
    PhysicsSpec lin = small_spec();
    lin.punn.widths = {2, 1};
    ParamVector p(lin.layout().total, 0.0);
    p[lin.layout().find("punn").offset + 1] = 1.0;
    const double L = 0.7;
    BoundaryTerms bl = boundary_terms(p, lin, btimes, L);
    CHECK(bl.b1_rho == doctest::Approx(L * L).epsilon(1e-15));
    CHECK(bl.b2 == 0.0);

    // v = sin(2*pi*x/L): periodic in value and slope (jets fed directly)
    std::vector<Jet> at0, atL;
    for (double t : btimes) {
        (void)t;
        const double k = 2.0 * std::numbers::pi / L;
        at0.push_back({std::sin(0.0), 0.0, k * std::cos(0.0), 0.0});
        atL.push_back({std::sin(k * L), 0.0, k * std::cos(k * L), 0.0});
    }
    BoundaryTerms bs = boundary_terms_from_jets(at0, atL, true);
    CHECK(bs.b1_rho <= 1e-28);
    CHECK(bs.b2 <= 1e-28);
}

TEST_CASE("concavity regularizer") {
    RegConfig cfg{0.0, 1.0, 1001};

    // linear FD: zero second derivative
    PhysicsSpec lin = small_spec();
    lin.fdl.widths = {1, 1};
    ParamVector p(lin.layout().total, 0.0);
    p[lin.layout().find("fdl").offset] = 0.9;
    CHECK(concavity_reg(p, lin, cfg) == 0.0);

    // Q = rho^2 has constant curvature 2: integral over [0,1] is exactly 2
    std::vector<double> d2(cfg.n_quad, 2.0);
    CHECK(concavity_reg_from_samples(d2, cfg) == doctest::Approx(2.0).epsilon(1e-9));

    // exact Greenshields flux is concave: zero
    PhysicsSpec gs = small_spec(Variant::LwrFdl);
    gs.fd_form = FdForm::GreenshieldsFlux;
    ParamVector q(gs.layout().total, 0.0);
    CHECK(concavity_reg(q, gs, cfg) == 0.0);

    // monotone in b for a learner FD (non-negative integrand)
    PhysicsSpec mlp = small_spec();
    ParamVector r = init_params(mlp, 9);
    double prev = 0.0;
    for (double b : {0.3, 0.5, 0.8, 1.1}) {
        const double v = concavity_reg(r, mlp, RegConfig{0.1, b, 801});
        CHECK(v >= prev - 1e-9);
        prev = v;
    }
}

namespace {

Problem tiny_problem() {
    Problem prob;
    prob.physics = small_spec();
    Rng rng(4);
    for (int i = 0; i < 5; ++i) {
        prob.data.observations.push_back({rng.uniform(0.0, 3.0), rng.uniform(0.0, 1.0)});
        prob.data.targets.push_back({rng.uniform(0.0, 1.0), 0.0, false});
    }
    for (int i = 0; i < 7; ++i)
        prob.data.auxiliary.push_back({rng.uniform(0.0, 3.0), rng.uniform(0.0, 1.0)});
    prob.data.boundary_times = {0.2, 1.4};
    prob.weights = {};
    prob.weights.alpha = 3.0;
    prob.weights.beta = 2.0;
    prob.weights.gamma = 1.5;
    prob.weights.eta = 0.5;
    prob.weights.xi = 0.25;
    prob.reg = {0.0, 1.0, 51};
    return prob;
}

} // namespace

TEST_CASE("total loss: interpolating punn with only alpha active gives zero") {
    Problem prob = tiny_problem();
    prob.weights = {};
    prob.weights.alpha = 5.0;
    prob.weights.beta = prob.weights.gamma = prob.weights.eta = prob.weights.xi = 0.0;
    ParamVector p = const_punn(prob.physics, 0.42);
    for (auto& t : prob.data.targets) t.rho = 0.42;
    prob.data.boundary_times.clear();
    CHECK(total_loss(prob, p) == 0.0);
}

TEST_CASE("total loss equals the weighted sum of independent components") {
    Problem prob = tiny_problem();
    ParamVector p = init_params(prob.physics, 3);
    LossBreakdown bd;
    const double total = total_loss(prob, p, &bd);

    const auto [mo, mo_u] = mse_observation(p, prob.physics, prob.data.observations, prob.data.targets);
    ResidualChunk rc(prob.physics);
    rc.forward(p.data(), prob.data.auxiliary, false);
    const double ma = mse_physics(rc.res(0));
    const BoundaryTerms bt = boundary_terms(p, prob.physics, prob.data.boundary_times, prob.ring_length);
    const double reg = concavity_reg(p, prob.physics, prob.reg);

    CHECK(bd.mse_o == doctest::Approx(mo).epsilon(1e-15));
    CHECK(bd.mse_a == doctest::Approx(ma).epsilon(1e-15));
    CHECK(bd.b1 == doctest::Approx(bt.b1_rho).epsilon(1e-15));
    CHECK(bd.b2 == doctest::Approx(bt.b2).epsilon(1e-15));
    CHECK(bd.reg == doctest::Approx(reg).epsilon(1e-15));
    const double recomposed = prob.weights.alpha * mo + prob.weights.beta * ma +
                              prob.weights.gamma * bt.b1_rho + prob.weights.eta * bt.b2 +
                              prob.weights.xi * reg;
    CHECK(total == doctest::Approx(recomposed).epsilon(1e-14));
    CHECK(total >= 0.0);
    CHECK(mo_u == 0.0);
}

TEST_CASE("doubling every weight doubles the loss and the gradient") {
    Problem prob = tiny_problem();
    PidlLoss loss1(prob);
    Problem prob2 = prob;
    prob2.weights.alpha *= 2.0;
    prob2.weights.beta *= 2.0;
    prob2.weights.gamma *= 2.0;
    prob2.weights.eta *= 2.0;
    prob2.weights.xi *= 2.0;
    PidlLoss loss2(prob2);
    ParamVector p = init_params(prob.physics, 8);
    ParamVector g1, g2;
    const double f1 = loss1.value_and_grad(p, g1);
    const double f2 = loss2.value_and_grad(p, g2);
    CHECK(f2 == doctest::Approx(2.0 * f1).epsilon(1e-14));
    for (std::size_t k = 0; k < g1.size(); ++k)
        CHECK(g2[k] == doctest::Approx(2.0 * g1[k]).epsilon(1e-12));
}

TEST_CASE("weight/variant mismatches are configuration errors") {
    Problem prob = tiny_problem();
    prob.data.boundary_times.clear(); // gamma,eta > 0 but B empty
    CHECK_THROWS_AS(PidlLoss{prob}, ConfigError);

    Problem ng = tiny_problem();
    ng.physics = small_spec(Variant::LwrNgsim);
    for (auto& t : ng.data.targets) {
        t.u = 0.5;
        t.has_u = true;
    }
    CHECK_THROWS_AS(PidlLoss{ng}, ConfigError); // boundary times on ngsim

    Problem fixed = tiny_problem();
    fixed.physics = small_spec(Variant::LwrFixed);
    CHECK_THROWS_AS(PidlLoss{fixed}, ConfigError); // xi > 0 without an FD learner

    Problem empty_obs = tiny_problem();
    empty_obs.data.observations.clear();
    empty_obs.data.targets.clear();
    CHECK_THROWS_AS(PidlLoss{empty_obs}, ConfigError);
}
