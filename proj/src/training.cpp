#include "tse/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "tse/errors.hpp"

namespace tse {

void TrainConfig::validate() const {
    if (adam_steps < 0 || lbfgs_max_iters < 0) throw ConfigError("step counts must be >= 0");
    if (!(adam_lr > 0.0)) throw ConfigError("adam_lr must be positive");
    if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0))
        throw ConfigError("adam betas must lie in [0,1)");
    if (!(adam_eps_hat > 0.0)) throw ConfigError("adam_eps_hat must be positive");
    if (lbfgs_memory < 1) throw ConfigError("lbfgs_memory must be >= 1");
    if (checkpoint_interval < 0) throw ConfigError("checkpoint_interval must be >= 0");
}

double TrainConfig::tol_for(double loss_scale) const {
    if (strict_tol) return 1e-16;
    if (lbfgs_tol >= 0.0) return lbfgs_tol;
    return 1e-12 * (1.0 + std::abs(loss_scale));
}

namespace {

bool all_finite(const ParamVector& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

double dot(const ParamVector& a, const ParamVector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double inf_norm(const ParamVector& a) {
    double s = 0.0;
    for (double x : a) s = std::max(s, std::abs(x));
    return s;
}

} // namespace

ParamVector run_adam(const LossFunction& loss, ParamVector params, const TrainConfig& cfg,
                     AdamState* state, const TrainLogger& log) {
    cfg.validate();
    const std::size_t n = params.size();
    AdamState local;
    AdamState& st = state ? *state : local;
    if (st.m.empty()) {
        st.m.assign(n, 0.0);
        st.v.assign(n, 0.0);
    }
    if (st.m.size() != n || st.v.size() != n)
        throw ConfigError("adam state does not match the parameter size");

    ParamVector grad(n);
    ParamVector last_good = params;
    for (long step = st.step; step < cfg.adam_steps; ++step) {
        const double f = loss.value_and_grad(params, grad);
        if (!std::isfinite(f) || !all_finite(grad)) return last_good;
        last_good = params;
        if (log) log("adam", step, f, params);

        const long t = step + 1;
        const double bc1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(t));
        for (std::size_t i = 0; i < n; ++i) {
            st.m[i] = cfg.adam_beta1 * st.m[i] + (1.0 - cfg.adam_beta1) * grad[i];
            st.v[i] = cfg.adam_beta2 * st.v[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
            const double mhat = st.m[i] / bc1;
            const double vhat = st.v[i] / bc2;
            params[i] -= cfg.adam_lr * mhat / (std::sqrt(vhat) + cfg.adam_eps_hat);
        }
        loss.project(params);
        st.step = t;
    }
    return params;
}

namespace {

struct WolfeResult {
    bool ok = false;
    double alpha = 0.0;
    double f = 0.0;
    ParamVector x, g;
};

// Strong Wolfe line search (bracket + zoom with bisection/interpolation).
WolfeResult wolfe_search(const LossFunction& loss, const ParamVector& x0, double f0,
                         const ParamVector& g0, const ParamVector& dir, double alpha_init,
                         long& evals) {
    constexpr double c1 = 1e-4;
    constexpr double c2 = 0.9;
    constexpr int max_trials = 60;
    const double dphi0 = dot(g0, dir);
    WolfeResult res;
    if (!(dphi0 < 0.0)) return res;

    const std::size_t n = x0.size();
    ParamVector x(n), g(n);
    // Best sufficient-decrease trial, kept as a fallback for when the
    // curvature condition cannot be verified at floating-point noise scale.
    WolfeResult fallback;
    auto phi = [&](double a, double& dphi) {
        for (std::size_t i = 0; i < n; ++i) x[i] = x0[i] + a * dir[i];
        double f;
        try {
            f = loss.value_and_grad(x, g);
            ++evals;
        } catch (const NumericError&) {
            dphi = std::numeric_limits<double>::quiet_NaN();
            return std::numeric_limits<double>::quiet_NaN();
        }
        dphi = dot(g, dir);
        if (std::isfinite(f) && f <= f0 + c1 * a * dphi0 && (!fallback.ok || f < fallback.f)) {
            fallback.ok = true;
            fallback.alpha = a;
            fallback.f = f;
            fallback.x = x;
            fallback.g = g;
        }
        return f;
    };

    auto accept = [&](double a, double f) {
        res.ok = true;
        res.alpha = a;
        res.f = f;
        res.x = x;
        res.g = g;
    };

    auto zoom = [&](double lo, double f_lo, double dphi_lo, double hi, double f_hi) {
        for (int it = 0; it < 50; ++it) {
            // Quadratic interpolation using phi(lo), phi'(lo), phi(hi);
            // fall back to bisection when the fit is degenerate or outside.
            double a = lo + 0.5 * (hi - lo);
            const double denom = f_hi - f_lo - dphi_lo * (hi - lo);
            if (std::abs(denom) > 1e-300) {
                const double cand = lo - 0.5 * dphi_lo * (hi - lo) * (hi - lo) / denom;
                const double lo2 = std::min(lo, hi), hi2 = std::max(lo, hi);
                const double margin = 0.1 * (hi2 - lo2);
                if (cand > lo2 + margin && cand < hi2 - margin) a = cand;
            }
            double dphi_a;
            const double f_a = phi(a, dphi_a);
            if (!std::isfinite(f_a)) {
                hi = a;
                f_hi = f_a;
                continue;
            }
            if (f_a > f0 + c1 * a * dphi0 || f_a >= f_lo) {
                hi = a;
                f_hi = f_a;
            } else {
                if (std::abs(dphi_a) <= -c2 * dphi0) {
                    accept(a, f_a);
                    return;
                }
                if (dphi_a * (hi - lo) >= 0.0) {
                    hi = lo;
                    f_hi = f_lo;
                }
                lo = a;
                f_lo = f_a;
                dphi_lo = dphi_a;
            }
            if (std::abs(hi - lo) < 1e-18 * std::max(1.0, std::abs(lo))) break;
        }
    };

    double a_prev = 0.0, f_prev = f0, dphi_prev = dphi0;
    double a = alpha_init;
    for (int trial = 0; trial < max_trials; ++trial) {
        double dphi_a;
        const double f_a = phi(a, dphi_a);
        if (!std::isfinite(f_a)) {
            // shrink into the finite region
            a = 0.5 * (a_prev + a);
            continue;
        }
        if (f_a > f0 + c1 * a * dphi0 || (trial > 0 && f_a >= f_prev)) {
            zoom(a_prev, f_prev, dphi_prev, a, f_a);
            return res.ok ? res : fallback;
        }
        if (std::abs(dphi_a) <= -c2 * dphi0) {
            accept(a, f_a);
            return res;
        }
        if (dphi_a >= 0.0) {
            zoom(a, f_a, dphi_a, a_prev, f_prev);
            return res.ok ? res : fallback;
        }
        a_prev = a;
        f_prev = f_a;
        dphi_prev = dphi_a;
        a *= 2.0;
        if (a > 1e10) break;
    }
    return res.ok ? res : fallback;
}

} // namespace

ParamVector run_lbfgs(const LossFunction& loss, ParamVector params, const TrainConfig& cfg,
                      LbfgsReport* report, const TrainLogger& log) {
    cfg.validate();
    if (!all_finite(params)) throw NumericError("l-bfgs started from non-finite parameters");
    const std::size_t n = params.size();
    LbfgsReport rep;

    ParamVector g(n);
    double f = loss.value_and_grad(params, g);
    ++rep.evaluations;
    if (!std::isfinite(f)) throw NumericError("l-bfgs initial loss is non-finite");
    rep.initial_loss = f;

    std::vector<ParamVector> s_hist, y_hist;
    std::vector<double> rho_hist;
    ParamVector dir(n), q(n);
    ParamVector best_x = params;
    double best_f = f;
    int stalled = 0;

    auto finish = [&](const std::string& why) {
        rep.termination = why;
        rep.final_loss = best_f;
        rep.grad_norm = inf_norm(g);
        if (report) *report = rep;
        return best_x;
    };

    for (long iter = 0; iter < cfg.lbfgs_max_iters; ++iter) {
        // Two-loop recursion for dir = -H*g.
        q = g;
        const int m = static_cast<int>(s_hist.size());
        std::vector<double> alpha(m);
        for (int i = m - 1; i >= 0; --i) {
            alpha[i] = rho_hist[i] * dot(s_hist[i], q);
            for (std::size_t k = 0; k < n; ++k) q[k] -= alpha[i] * y_hist[i][k];
        }
        double h0 = 1.0;
        if (m > 0) {
            const double yy = dot(y_hist[m - 1], y_hist[m - 1]);
            if (yy > 0.0) h0 = dot(s_hist[m - 1], y_hist[m - 1]) / yy;
        }
        for (std::size_t k = 0; k < n; ++k) q[k] *= h0;
        for (int i = 0; i < m; ++i) {
            const double beta = rho_hist[i] * dot(y_hist[i], q);
            for (std::size_t k = 0; k < n; ++k) q[k] += (alpha[i] - beta) * s_hist[i][k];
        }
        for (std::size_t k = 0; k < n; ++k) dir[k] = -q[k];

        if (!(dot(dir, g) < 0.0)) { // not a descent direction: steepest descent restart
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
            for (std::size_t k = 0; k < n; ++k) dir[k] = -g[k];
            if (!(dot(dir, g) < 0.0)) return finish("tol"); // zero gradient
        }

        const double alpha_init =
            (iter == 0 && m == 0) ? std::min(1.0, 1.0 / std::max(1e-12, inf_norm(g))) : 1.0;
        WolfeResult ls = wolfe_search(loss, params, f, g, dir, alpha_init, rep.evaluations);
        if (!ls.ok) return finish("line_search");

        ParamVector x_new = ls.x;
        loss.project(x_new);
        double f_new = ls.f;
        ParamVector g_new = ls.g;
        if (x_new != ls.x) { // projection was active; refresh the oracle
            f_new = loss.value_and_grad(x_new, g_new);
            ++rep.evaluations;
            if (!std::isfinite(f_new)) return finish("non_finite");
        }

        ParamVector s(n), y(n);
        for (std::size_t k = 0; k < n; ++k) {
            s[k] = x_new[k] - params[k];
            y[k] = g_new[k] - g[k];
        }
        const double sy = dot(s, y);
        if (sy > 1e-10 * std::sqrt(dot(s, s)) * std::sqrt(dot(y, y))) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(y));
            rho_hist.push_back(1.0 / sy);
            if (static_cast<int>(s_hist.size()) > cfg.lbfgs_memory) {
                s_hist.erase(s_hist.begin());
                y_hist.erase(y_hist.begin());
                rho_hist.erase(rho_hist.begin());
            }
        }

        const double delta = std::abs(f - f_new);
        params = std::move(x_new);
        g = std::move(g_new);
        f = f_new;
        if (f < best_f) {
            best_f = f;
            best_x = params;
        }
        ++rep.iterations;
        if (log) log("lbfgs", iter, f, params);
        if (f == best_f) best_x = params; // same loss, fresher gradient
        if (cfg.strict_tol && delta <= 1e-16) return finish("tol");
        if (delta > 0.0 && delta <= cfg.tol_for(f)) return finish("tol");
        // The loss can stall at double resolution while the gradient still
        // shrinks; allow a few stalled iterations, then stop either way.
        stalled = (delta == 0.0) ? stalled + 1 : 0;
        if (stalled >= 10) return finish("tol");
        if (inf_norm(g) <= 1e-12 * std::max(1.0, inf_norm(params))) return finish("gradient");
    }
    return finish("max_iters");
}

void save_checkpoint(const std::string& path, const ParamLayout& layout, const ParamVector& params,
                     const AdamState* adam) {
    nlohmann::json j;
    j["format"] = "tse-checkpoint-v1";
    for (const auto& seg : layout.segments)
        j["layout"].push_back({{"name", seg.name}, {"offset", seg.offset}, {"size", seg.size}});
    j["params"] = params;
    if (adam) {
        j["adam"]["m"] = adam->m;
        j["adam"]["v"] = adam->v;
        j["adam"]["step"] = adam->step;
    }
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write checkpoint file " + path);
    out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read checkpoint file " + path);
    nlohmann::json j;
    in >> j;
    if (j.value("format", "") != "tse-checkpoint-v1")
        throw ConfigError("unrecognized checkpoint format in " + path);
    Checkpoint ck;
    for (const auto& seg : j.at("layout"))
        ck.layout.push_back(
            {seg.at("name").get<std::string>(), seg.at("offset").get<std::size_t>(),
             seg.at("size").get<std::size_t>()});
    ck.params = j.at("params").get<ParamVector>();
    if (j.contains("adam")) {
        ck.has_adam = true;
        ck.adam.m = j["adam"]["m"].get<std::vector<double>>();
        ck.adam.v = j["adam"]["v"].get<std::vector<double>>();
        ck.adam.step = j["adam"]["step"].get<long>();
    }
    return ck;
}

std::pair<ParamVector, TrainReport> train_pipeline(const PidlLoss& loss, const TrainConfig& cfg,
                                                   const TrainArtifacts& artifacts,
                                                   const Checkpoint* resume) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();
    const PhysicsSpec& spec = loss.problem().physics;
    const ParamLayout& layout = loss.layout();

    ParamVector params;
    AdamState adam;
    if (resume) {
        if (resume->params.size() != layout.total)
            throw ConfigError("checkpoint does not match the parameter layout");
        params = resume->params;
        if (resume->has_adam) adam = resume->adam;
    } else {
        params = init_params(spec, cfg.seed);
    }

    std::ofstream log_csv;
    if (!artifacts.log_csv.empty()) {
        log_csv.open(artifacts.log_csv);
        if (!log_csv) throw ConfigError("cannot write training log " + artifacts.log_csv);
        log_csv << "stage,step,total,mse_o,mse_a,b1,b2,reg,eps_or_tau\n";
    }
    auto scalar_of = [&](const ParamVector& p) {
        for (const char* name : {"eps", "tau"})
            if (layout.has(name)) return p[layout.find(name).offset];
        return std::numeric_limits<double>::quiet_NaN();
    };
    TrainLogger logger;
    if (log_csv.is_open() || cfg.checkpoint_interval > 0) {
        logger = [&](const std::string& stage, long step, double /*loss_val*/,
                     const ParamVector& p) {
            if (log_csv.is_open() && step % std::max(1, artifacts.log_every) == 0) {
                const LossBreakdown bd = loss.breakdown(p);
                log_csv << stage << ',' << step << ',' << bd.total << ',' << bd.mse_o + bd.mse_o_u
                        << ',' << bd.mse_a + bd.mse_a2 << ',' << bd.b1 + bd.b1_u << ',' << bd.b2
                        << ',' << bd.reg << ',' << scalar_of(p) << "\n";
            }
            if (stage == "adam" && cfg.checkpoint_interval > 0 &&
                !artifacts.checkpoint_path.empty() && step > 0 &&
                step % cfg.checkpoint_interval == 0) {
                save_checkpoint(artifacts.checkpoint_path, layout, p, &adam);
            }
        };
    }

    TrainReport report;
    report.seed = cfg.seed;
    report.initial_loss = loss.value(params);

    params = run_adam(loss, std::move(params), cfg, &adam, logger);
    if (!all_finite(params)) throw NumericError("adam produced non-finite parameters");
    report.adam_steps = adam.step;

    LbfgsReport lrep;
    params = run_lbfgs(loss, std::move(params), cfg, &lrep, logger);
    report.lbfgs_iterations = lrep.iterations;
    report.lbfgs_termination = lrep.termination;

    report.final_parts = loss.breakdown(params);
    report.final_loss = report.final_parts.total;
    for (const char* name : {"eps", "tau", "rho_max", "u_max"})
        if (layout.has(name)) report.learned_scalars[name] = params[layout.find(name).offset];
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return {std::move(params), report};
}

} // namespace tse
