#include "tse/objective.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tse/errors.hpp"

namespace tse {

void LossWeights::validate() const {
    for (double w : {alpha, beta, gamma, eta, alpha1, alpha2, beta1, beta2, gamma1, gamma2, xi})
        if (w < 0.0 || !std::isfinite(w)) throw ConfigError("loss weights must be finite and >= 0");
}

void RegConfig::validate() const {
    if (!(0.0 <= a && a < b)) throw ConfigError("reg interval requires 0 <= a < b");
    if (n_quad < 2) throw ConfigError("reg quadrature needs n_quad >= 2");
}

void Problem::validate() const {
    physics.validate();
    weights.validate();
    reg.validate();
    if (!(ring_length > 0.0)) throw ConfigError("ring_length must be positive");
    if (chunk < 1) throw ConfigError("chunk must be >= 1");
    if (data.observations.size() != data.targets.size())
        throw ConfigError("observations and targets must align index-for-index");
    if (data.observations.empty()) throw ConfigError("observation set is empty");

    const bool arz = physics.is_arz();
    const bool wants_u = arz || physics.variant == Variant::LwrNgsim;
    if (wants_u)
        for (const auto& t : data.targets)
            if (!t.has_u)
                throw ConfigError("variant " + variant_name(physics.variant) +
                                  " needs velocity targets");
    const bool needs_res = arz ? (weights.beta1 > 0.0 || weights.beta2 > 0.0) : weights.beta > 0.0;
    if (needs_res && data.auxiliary.empty()) throw ConfigError("auxiliary set is empty");

    if (physics.variant == Variant::LwrNgsim) {
        if (!data.boundary_times.empty())
            throw ConfigError("the ngsim variant drops the boundary terms");
    } else {
        const bool wants_boundary =
            arz ? (weights.gamma1 > 0.0 || weights.gamma2 > 0.0) : (weights.gamma > 0.0 || weights.eta > 0.0);
        if (wants_boundary && data.boundary_times.empty())
            throw ConfigError("boundary time set is empty but boundary weights are positive");
    }
    if (weights.xi > 0.0 && !physics.has_fdl())
        throw ConfigError("the reshaping term applies to FD-learner variants only");
}

namespace {

void fill_value_inputs(JetBatch& in, std::span<const Point> pts) {
    const int n = static_cast<int>(pts.size());
    in.configure(0, false, 0, 2, n);
    for (int j = 0; j < n; ++j) {
        in.value().at(0, j) = pts[j].t;
        in.value().at(1, j) = pts[j].x;
    }
}

void fill_tx_inputs(JetBatch& in, std::span<const Point> pts) {
    const int n = static_cast<int>(pts.size());
    in.configure(2, false, 0, 2, n);
    for (int j = 0; j < n; ++j) {
        in.value().at(0, j) = pts[j].t;
        in.value().at(1, j) = pts[j].x;
        in.first(0).at(0, j) = 1.0;
        in.first(0).at(1, j) = 0.0;
        in.first(1).at(0, j) = 0.0;
        in.first(1).at(1, j) = 1.0;
    }
}

void zero_like(JetBatch& bar, const JetBatch& ref) {
    bar.configure(ref.n_first, ref.has_second, ref.second_dir, ref.value().rows, ref.cols());
    for (Mat& m : bar.slot) std::fill(m.a.begin(), m.a.end(), 0.0);
}

// Observation data term. Returns the unweighted per-variable MSEs; when
// `grad` is non-null, accumulates the gradient of
// w_rho*mse_rho + w_u*mse_u.
std::pair<double, double> eval_observations(const PhysicsSpec& spec, const ParamLayout& layout,
                                            const double* params, std::span<const Point> obs,
                                            std::span<const StateSample> targets, int chunk,
                                            double w_rho, double w_u, double* grad) {
    if (obs.empty()) throw ConfigError("observation set is empty");
    const std::size_t n_total = obs.size();
    const double* punn_p = params + layout.find("punn").offset;
    const bool ngsim_head = spec.variant == Variant::LwrNgsim;
    const bool arz = spec.is_arz();
    const bool fdl_mlp = spec.fd_form == FdForm::Mlp;

    double sum_rho = 0.0, sum_u = 0.0;
    JetBatch in, out, bar;
    JetBatch fin, fout, fbar, finbar;
    MlpTape tape, ftape;
    for (std::size_t start = 0; start < n_total; start += chunk) {
        const std::size_t len = std::min<std::size_t>(chunk, n_total - start);
        const int n = static_cast<int>(len);
        fill_value_inputs(in, obs.subspan(start, len));
        mlp_batch_forward(punn_p, spec.punn, in, out, grad ? &tape : nullptr);
        const double* rv = out.value().row(0);

        std::vector<double> head; // NGSIM velocity estimates
        const double* qv = nullptr;
        if (ngsim_head) {
            fin.configure(0, false, 0, 1, n);
            double* iv = fin.value().row(0);
            for (int j = 0; j < n; ++j) iv[j] = rv[j];
            if (fdl_mlp) {
                mlp_batch_forward(params + layout.find("fdl").offset, spec.fdl, fin, fout,
                                  grad ? &ftape : nullptr);
                qv = fout.value().row(0);
            } else {
                head.resize(n); // reuse as flux buffer below
                for (int j = 0; j < n; ++j)
                    head[j] = rv[j] * spec.u_max * (1.0 - rv[j] / spec.rho_max);
                qv = head.data();
            }
        }

        if (grad) zero_like(bar, out);
        double* rv_bar = grad ? bar.value().row(0) : nullptr;
        std::vector<double> qv_bar(grad && ngsim_head ? n : 0, 0.0);

        for (int j = 0; j < n; ++j) {
            const StateSample& tgt = targets[start + j];
            const double dr = rv[j] - tgt.rho;
            sum_rho += dr * dr;
            if (grad) rv_bar[j] += 2.0 * w_rho / n_total * dr;
            if (arz) {
                const double du = out.value().at(1, j) - tgt.u;
                sum_u += du * du;
                if (grad) bar.value().at(1, j) += 2.0 * w_u / n_total * du;
            } else if (ngsim_head) {
                const bool live = rv[j] > spec.rho_floor;
                const double h = live ? qv[j] / rv[j] : spec.u_cap;
                const double du = h - tgt.u;
                sum_u += du * du;
                if (grad && live) {
                    const double hb = 2.0 * w_u / n_total * du;
                    qv_bar[j] = hb / rv[j];
                    rv_bar[j] += hb * (-qv[j] / (rv[j] * rv[j]));
                }
            }
        }

        if (grad) {
            if (ngsim_head && fdl_mlp) {
                fbar.configure(0, false, 0, 1, n);
                double* fb = fbar.value().row(0);
                for (int j = 0; j < n; ++j) fb[j] = qv_bar[j];
                mlp_batch_backward(params + layout.find("fdl").offset, spec.fdl, ftape, fbar,
                                   grad + layout.find("fdl").offset, &finbar);
                const double* ib = finbar.value().row(0);
                for (int j = 0; j < n; ++j) rv_bar[j] += ib[j];
            } else if (ngsim_head) {
                for (int j = 0; j < n; ++j)
                    rv_bar[j] += qv_bar[j] * spec.u_max * (1.0 - 2.0 * rv[j] / spec.rho_max);
            }
            mlp_batch_backward(punn_p, spec.punn, tape, bar, grad + layout.find("punn").offset,
                               nullptr);
        }
    }
    return {sum_rho / n_total, sum_u / n_total};
}

// Physics (residual) term: unweighted per-component MSEs; gradient of
// w1*mse_f1 + w2*mse_f2 when grad is non-null.
std::pair<double, double> eval_residual_mse(ResidualChunk& rc, const double* params,
                                            std::span<const Point> aux, int chunk, double w1,
                                            double w2, double* grad) {
    if (aux.empty()) throw ConfigError("auxiliary set is empty");
    const std::size_t n_total = aux.size();
    const int n_res = rc.spec().n_residuals();
    double sum1 = 0.0, sum2 = 0.0;
    std::vector<double> f1_bar, f2_bar;
    for (std::size_t start = 0; start < n_total; start += chunk) {
        const std::size_t len = std::min<std::size_t>(chunk, n_total - start);
        const int n = static_cast<int>(len);
        rc.forward(params, aux.subspan(start, len), grad != nullptr);
        const auto f1 = rc.res(0);
        for (int j = 0; j < n; ++j) sum1 += f1[j] * f1[j];
        if (n_res == 2) {
            const auto f2 = rc.res(1);
            for (int j = 0; j < n; ++j) sum2 += f2[j] * f2[j];
        }
        if (grad) {
            f1_bar.resize(n);
            for (int j = 0; j < n; ++j) f1_bar[j] = 2.0 * w1 / n_total * f1[j];
            const double* bars[2] = {f1_bar.data(), nullptr};
            if (n_res == 2) {
                f2_bar.resize(n);
                const auto f2 = rc.res(1);
                for (int j = 0; j < n; ++j) f2_bar[j] = 2.0 * w2 / n_total * f2[j];
                bars[1] = f2_bar.data();
            }
            rc.backward(params, std::span<const double* const>(bars, n_res), grad);
        }
    }
    return {sum1 / n_total, sum2 / n_total};
}

// Periodic boundary terms; gradient of w_b1r*b1_rho + w_b1u*b1_u + w_b2*b2.
BoundaryTerms eval_boundary(const PhysicsSpec& spec, const ParamLayout& layout,
                            const double* params, std::span<const double> btimes,
                            double ring_length, int chunk, double w_b1r, double w_b1u, double w_b2,
                            double* grad) {
    if (btimes.empty()) throw ConfigError("boundary time set is empty");
    const std::size_t n_total = btimes.size();
    const double* punn_p = params + layout.find("punn").offset;
    const bool arz = spec.is_arz();
    const bool with_slope = !arz; // the LWR loss matches d/dx across the ring seam

    BoundaryTerms bt;
    JetBatch in0, inL, out0, outL, bar0, barL;
    MlpTape tape0, tapeL;
    std::vector<Point> p0, pL;
    for (std::size_t start = 0; start < n_total; start += chunk) {
        const std::size_t len = std::min<std::size_t>(chunk, n_total - start);
        const int n = static_cast<int>(len);
        p0.resize(len);
        pL.resize(len);
        for (int j = 0; j < n; ++j) {
            p0[j] = {btimes[start + j], 0.0};
            pL[j] = {btimes[start + j], ring_length};
        }
        fill_tx_inputs(in0, p0);
        fill_tx_inputs(inL, pL);
        mlp_batch_forward(punn_p, spec.punn, in0, out0, grad ? &tape0 : nullptr);
        mlp_batch_forward(punn_p, spec.punn, inL, outL, grad ? &tapeL : nullptr);
        if (grad) {
            zero_like(bar0, out0);
            zero_like(barL, outL);
        }
        for (int j = 0; j < n; ++j) {
            const double dv = out0.value().at(0, j) - outL.value().at(0, j);
            bt.b1_rho += dv * dv / n_total;
            if (grad) {
                const double s = 2.0 * w_b1r / n_total * dv;
                bar0.value().at(0, j) += s;
                barL.value().at(0, j) -= s;
            }
            if (arz) {
                const double du = out0.value().at(1, j) - outL.value().at(1, j);
                bt.b1_u += du * du / n_total;
                if (grad) {
                    const double s = 2.0 * w_b1u / n_total * du;
                    bar0.value().at(1, j) += s;
                    barL.value().at(1, j) -= s;
                }
            }
            if (with_slope) {
                const double dd = out0.first(1).at(0, j) - outL.first(1).at(0, j);
                bt.b2 += dd * dd / n_total;
                if (grad) {
                    const double s = 2.0 * w_b2 / n_total * dd;
                    bar0.first(1).at(0, j) += s;
                    barL.first(1).at(0, j) -= s;
                }
            }
        }
        if (grad) {
            mlp_batch_backward(punn_p, spec.punn, tape0, bar0, grad + layout.find("punn").offset,
                               nullptr);
            mlp_batch_backward(punn_p, spec.punn, tapeL, barL, grad + layout.find("punn").offset,
                               nullptr);
        }
    }
    return bt;
}

// Concavity reshaping term; unweighted integral, gradient scaled by xi.
double eval_reg(const PhysicsSpec& spec, const ParamLayout& layout, const double* params,
                const RegConfig& cfg, double xi, double* grad) {
    cfg.validate();
    const int nq = cfg.n_quad;
    const double dr = (cfg.b - cfg.a) / (nq - 1);
    const bool flux_form = !spec.is_arz(); // ARZ reshapes rho*U_eq
    std::vector<double> nodes(nq), d2(nq), dslot(nq), ddslot(nq);
    for (int k = 0; k < nq; ++k) nodes[k] = cfg.a + k * dr;

    JetBatch fin, fout, fbar;
    MlpTape ftape;
    if (spec.fd_form == FdForm::Mlp) {
        fin.configure(1, true, 0, 1, nq);
        for (int k = 0; k < nq; ++k) {
            fin.value().at(0, k) = nodes[k];
            fin.first(0).at(0, k) = 1.0;
            fin.second().at(0, k) = 0.0;
        }
        mlp_batch_forward(params + layout.find("fdl").offset, spec.fdl, fin, fout,
                          grad ? &ftape : nullptr);
        for (int k = 0; k < nq; ++k) {
            dslot[k] = fout.first(0).at(0, k);
            ddslot[k] = fout.second().at(0, k);
            d2[k] = flux_form ? ddslot[k] : 2.0 * dslot[k] + nodes[k] * ddslot[k];
        }
    } else {
        for (int k = 0; k < nq; ++k) {
            // Greenshields: Q'' = -2*u_max/rho_max, (rho*U_eq)'' likewise.
            d2[k] = -2.0 * spec.u_max / spec.rho_max;
        }
    }

    double integral = 0.0;
    for (int k = 0; k < nq; ++k) {
        const double w = dr * ((k == 0 || k == nq - 1) ? 0.5 : 1.0);
        if (d2[k] > 0.0) integral += w * d2[k];
    }
    if (grad && spec.fd_form == FdForm::Mlp) {
        fbar.configure(1, true, 0, 1, nq);
        for (int k = 0; k < nq; ++k) {
            const double w = dr * ((k == 0 || k == nq - 1) ? 0.5 : 1.0);
            const double g = (d2[k] > 0.0) ? xi * w : 0.0;
            fbar.value().at(0, k) = 0.0;
            fbar.first(0).at(0, k) = flux_form ? 0.0 : 2.0 * g;
            fbar.second().at(0, k) = flux_form ? g : nodes[k] * g;
        }
        mlp_batch_backward(params + layout.find("fdl").offset, spec.fdl, ftape, fbar,
                           grad + layout.find("fdl").offset, nullptr);
    }
    return integral;
}

} // namespace

PidlLoss::PidlLoss(Problem problem) : prob_(std::move(problem)), layout_(prob_.physics.layout()) {
    prob_.validate();
}

double PidlLoss::value(const ParamVector& params) const { return eval(params, nullptr, nullptr); }

double PidlLoss::value_and_grad(const ParamVector& params, ParamVector& grad) const {
    return eval(params, &grad, nullptr);
}

LossBreakdown PidlLoss::breakdown(const ParamVector& params) const {
    LossBreakdown parts;
    eval(params, nullptr, &parts);
    return parts;
}

void PidlLoss::project(ParamVector& params) const { project_scalars(prob_.physics, params); }

double PidlLoss::eval(const ParamVector& params, ParamVector* grad, LossBreakdown* parts) const {
    if (params.size() != layout_.total)
        throw ConfigError("parameter vector does not match the layout");
    if (grad) grad->assign(layout_.total, 0.0);
    double* g = grad ? grad->data() : nullptr;

    const PhysicsSpec& spec = prob_.physics;
    const LossWeights& w = prob_.weights;
    const bool arz = spec.is_arz();
    const bool ngsim = spec.variant == Variant::LwrNgsim;

    // Per-variant weight binding.
    const double w_rho = (arz || ngsim) ? w.alpha1 : w.alpha;
    const double w_u = (arz || ngsim) ? w.alpha2 : 0.0;
    const double w_f1 = arz ? w.beta1 : w.beta;
    const double w_f2 = arz ? w.beta2 : 0.0;
    const double w_b1r = arz ? w.gamma1 : w.gamma;
    const double w_b1u = arz ? w.gamma2 : 0.0;
    const double w_b2 = arz ? 0.0 : w.eta;

    LossBreakdown bd;
    auto [mo_r, mo_u] =
        eval_observations(spec, layout_, params.data(), prob_.data.observations, prob_.data.targets,
                          prob_.chunk, w_rho, w_u, g);
    bd.mse_o = mo_r;
    bd.mse_o_u = mo_u;

    const bool needs_res = arz ? (w.beta1 > 0.0 || w.beta2 > 0.0) : w.beta > 0.0;
    if (needs_res) {
        ResidualChunk rc(spec);
        auto [ma1, ma2] =
            eval_residual_mse(rc, params.data(), prob_.data.auxiliary, prob_.chunk, w_f1, w_f2, g);
        bd.mse_a = ma1;
        bd.mse_a2 = ma2;
    }

    if (!ngsim && !prob_.data.boundary_times.empty() &&
        (w_b1r > 0.0 || w_b1u > 0.0 || w_b2 > 0.0)) {
        BoundaryTerms bt = eval_boundary(spec, layout_, params.data(), prob_.data.boundary_times,
                                         prob_.ring_length, prob_.chunk, w_b1r, w_b1u, w_b2, g);
        bd.b1 = bt.b1_rho;
        bd.b1_u = bt.b1_u;
        bd.b2 = bt.b2;
    }

    if (w.xi > 0.0) bd.reg = eval_reg(spec, layout_, params.data(), prob_.reg, w.xi, g);

    bd.total = w_rho * bd.mse_o + w_u * bd.mse_o_u + w_f1 * bd.mse_a + w_f2 * bd.mse_a2 +
               w_b1r * bd.b1 + w_b1u * bd.b1_u + w_b2 * bd.b2 + w.xi * bd.reg;
    if (!std::isfinite(bd.total)) throw NumericError("non-finite training loss");
    if (parts) *parts = bd;
    return bd.total;
}

std::pair<double, double> mse_observation(const ParamVector& params, const PhysicsSpec& spec,
                                          std::span<const Point> obs,
                                          std::span<const StateSample> targets) {
    if (obs.size() != targets.size())
        throw ConfigError("observations and targets must align index-for-index");
    const ParamLayout layout = spec.layout();
    return eval_observations(spec, layout, params.data(), obs, targets, 1024, 0.0, 0.0, nullptr);
}

double mse_physics(std::span<const double> residuals) {
    if (residuals.empty()) throw ConfigError("auxiliary set is empty");
    double s = 0.0;
    for (double f : residuals) s += f * f;
    return s / residuals.size();
}

BoundaryTerms boundary_terms(const ParamVector& params, const PhysicsSpec& spec,
                             std::span<const double> boundary_times, double ring_length) {
    const ParamLayout layout = spec.layout();
    return eval_boundary(spec, layout, params.data(), boundary_times, ring_length, 1024, 0.0, 0.0,
                         0.0, nullptr);
}

BoundaryTerms boundary_terms_from_jets(std::span<const Jet> at0, std::span<const Jet> atL,
                                       bool with_slope) {
    if (at0.size() != atL.size() || at0.empty())
        throw ConfigError("boundary jet spans must be non-empty and equal length");
    BoundaryTerms bt;
    const double n = static_cast<double>(at0.size());
    for (std::size_t k = 0; k < at0.size(); ++k) {
        const double dv = at0[k].v - atL[k].v;
        bt.b1_rho += dv * dv / n;
        if (with_slope) {
            const double dd = at0[k].dx - atL[k].dx;
            bt.b2 += dd * dd / n;
        }
    }
    return bt;
}

double concavity_reg_from_samples(std::span<const double> d2, const RegConfig& cfg) {
    cfg.validate();
    if (static_cast<int>(d2.size()) != cfg.n_quad)
        throw ConfigError("d2 sample count must equal n_quad");
    const double dr = (cfg.b - cfg.a) / (cfg.n_quad - 1);
    double integral = 0.0;
    for (int k = 0; k < cfg.n_quad; ++k) {
        const double w = dr * ((k == 0 || k == cfg.n_quad - 1) ? 0.5 : 1.0);
        if (d2[k] > 0.0) integral += w * d2[k];
    }
    return integral;
}

double concavity_reg(const ParamVector& params, const PhysicsSpec& spec, const RegConfig& cfg) {
    const ParamLayout layout = spec.layout();
    return eval_reg(spec, layout, params.data(), cfg, 0.0, nullptr);
}

double total_loss(const Problem& prob, const ParamVector& params, LossBreakdown* parts) {
    PidlLoss loss(prob);
    if (!parts) return loss.value(params);
    *parts = loss.breakdown(params);
    return parts->total;
}

} // namespace tse
