#include "tse/physics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tse/errors.hpp"

namespace tse {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::LwrFdl: return "lwr-fdl";
        case Variant::ArzFdl: return "arz-fdl";
        case Variant::LwrFixed: return "lwr-fixed";
        case Variant::ArzFixed: return "arz-fixed";
        case Variant::LwrNgsim: return "lwr-ngsim";
    }
    throw ConfigError("unknown variant");
}

Variant variant_from_name(std::string_view name) {
    if (name == "lwr-fdl") return Variant::LwrFdl;
    if (name == "arz-fdl") return Variant::ArzFdl;
    if (name == "lwr-fixed") return Variant::LwrFixed;
    if (name == "arz-fixed") return Variant::ArzFixed;
    if (name == "lwr-ngsim") return Variant::LwrNgsim;
    throw ConfigError("unknown model variant '" + std::string(name) + "'");
}

namespace {

const std::vector<std::string>& allowed_scalars(Variant v) {
    static const std::vector<std::string> lwr_fdl = {"eps"};
    static const std::vector<std::string> arz_fdl = {"tau"};
    static const std::vector<std::string> lwr_fixed = {"eps", "rho_max", "u_max"};
    static const std::vector<std::string> arz_fixed = {"tau", "rho_max", "u_max"};
    static const std::vector<std::string> none = {};
    switch (v) {
        case Variant::LwrFdl: return lwr_fdl;
        case Variant::ArzFdl: return arz_fdl;
        case Variant::LwrFixed: return lwr_fixed;
        case Variant::ArzFixed: return arz_fixed;
        case Variant::LwrNgsim: return none;
    }
    return none;
}

bool contains(const std::vector<std::string>& v, std::string_view s) {
    return std::find(v.begin(), v.end(), s) != v.end();
}

// Scalar values resolved against the parameter vector, with gradient slots
// for the learnable ones (-1 when fixed).
struct Scalars {
    double eps = 0.0, tau = 0.0, rho_max = 0.0, u_max = 0.0;
    std::ptrdiff_t i_eps = -1, i_tau = -1, i_rho_max = -1, i_u_max = -1;
};

Scalars bind_scalars(const PhysicsSpec& spec, const ParamLayout& layout, const double* params) {
    Scalars s;
    auto bind = [&](const char* name, double fallback, double& value, std::ptrdiff_t& index) {
        if (layout.has(name)) {
            index = static_cast<std::ptrdiff_t>(layout.find(name).offset);
            value = params[index];
        } else {
            value = fallback;
        }
    };
    bind("eps", spec.eps, s.eps, s.i_eps);
    bind("tau", spec.tau, s.tau, s.i_tau);
    bind("rho_max", spec.rho_max, s.rho_max, s.i_rho_max);
    bind("u_max", spec.u_max, s.u_max, s.i_u_max);
    return s;
}

} // namespace

PhysicsSpec PhysicsSpec::make_default(Variant v) {
    PhysicsSpec s;
    s.variant = v;
    if (s.is_arz()) s.punn.widths.back() = 2;
    s.learnable = allowed_scalars(v);
    switch (v) {
        case Variant::LwrFdl:
        case Variant::LwrNgsim:
            s.eps = 0.0;
            break;
        case Variant::LwrFixed:
            s.eps = 0.0;
            break;
        case Variant::ArzFdl:
        case Variant::ArzFixed:
            s.tau = 0.1;
            break;
    }
    return s;
}

void PhysicsSpec::validate() const {
    punn.validate();
    if (punn.input_width() != 2) throw ConfigError("punn input width must be 2");
    if (punn.output_width() != punn_outputs())
        throw ConfigError("punn output width inconsistent with variant " + variant_name(variant));
    if (has_fdl() && fd_form == FdForm::Mlp) {
        fdl.validate();
        if (fdl.input_width() != 1 || fdl.output_width() != 1)
            throw ConfigError("fdl must map one density to one output");
    }
    const auto& allowed = allowed_scalars(variant);
    for (const auto& name : learnable)
        if (!contains(allowed, name))
            throw ConfigError("scalar '" + name + "' is not learnable for variant " +
                              variant_name(variant));
    if (!(rho_max > 0.0) || !(u_max > 0.0)) throw ConfigError("rho_max and u_max must be positive");
    if (is_arz() && !(tau > 0.0)) throw ConfigError("tau must be positive");
    if (eps < 0.0) throw ConfigError("eps must be non-negative");
    if (!(rho_floor > 0.0)) throw ConfigError("rho_floor must be positive");
}

ParamLayout PhysicsSpec::layout() const {
    ParamLayout layout;
    layout.add("punn", punn.n_params());
    if (has_fdl() && fd_form == FdForm::Mlp) layout.add("fdl", fdl.n_params());
    for (const char* name : {"eps", "tau", "rho_max", "u_max"})
        if (contains(learnable, name)) layout.add(name, 1);
    return layout;
}

ParamVector init_params(const PhysicsSpec& spec, std::uint64_t seed) {
    spec.validate();
    const ParamLayout layout = spec.layout();
    ParamVector p(layout.total, 0.0);
    xavier_init_mlp(spec.punn, seed, p.data() + layout.find("punn").offset);
    if (layout.has("fdl"))
        xavier_init_mlp(spec.fdl, seed ^ 0x9e3779b97f4a7c15ull, p.data() + layout.find("fdl").offset);
    auto set = [&](const char* name, double v) {
        if (layout.has(name)) p[layout.find(name).offset] = v;
    };
    set("eps", spec.eps);
    set("tau", spec.tau);
    set("rho_max", spec.rho_max);
    set("u_max", spec.u_max);
    return p;
}

void project_scalars(const PhysicsSpec& spec, ParamVector& params) {
    const ParamLayout layout = spec.layout();
    for (const char* name : {"tau", "rho_max", "u_max"})
        if (layout.has(name)) {
            double& v = params[layout.find(name).offset];
            v = std::max(v, 1e-6);
        }
}

ResidualChunk::ResidualChunk(const PhysicsSpec& spec) : spec_(spec), layout_(spec.layout()) {
    spec_.validate();
}

std::span<const double> ResidualChunk::res(int k) const {
    return k == 0 ? std::span<const double>(f1_) : std::span<const double>(f2_);
}

void ResidualChunk::eval_fd(const double* params, bool keep_tape) {
    const Scalars sc = bind_scalars(spec_, layout_, params);
    const double* rv = punn_out_.value().row(0);
    fd_v_.resize(n_);
    fd_d_.resize(n_);
    switch (spec_.fd_form) {
        case FdForm::Mlp: {
            fdl_in_.configure(1, false, 0, 1, n_);
            double* iv = fdl_in_.value().row(0);
            double* id = fdl_in_.first(0).row(0);
            for (int j = 0; j < n_; ++j) {
                iv[j] = rv[j];
                id[j] = 1.0;
            }
            mlp_batch_forward(params + layout_.find("fdl").offset, spec_.fdl, fdl_in_, fdl_out_,
                              keep_tape ? &fdl_tape_ : nullptr);
            const double* ov = fdl_out_.value().row(0);
            const double* od = fdl_out_.first(0).row(0);
            for (int j = 0; j < n_; ++j) {
                fd_v_[j] = ov[j];
                fd_d_[j] = od[j];
            }
            break;
        }
        case FdForm::GreenshieldsFlux:
            for (int j = 0; j < n_; ++j) {
                fd_v_[j] = rv[j] * sc.u_max * (1.0 - rv[j] / sc.rho_max);
                fd_d_[j] = sc.u_max * (1.0 - 2.0 * rv[j] / sc.rho_max);
            }
            break;
        case FdForm::GreenshieldsUeq:
            for (int j = 0; j < n_; ++j) {
                fd_v_[j] = sc.u_max * (1.0 - rv[j] / sc.rho_max);
                fd_d_[j] = -sc.u_max / sc.rho_max;
            }
            break;
    }
}

void ResidualChunk::fd_backward(const double* params, double* grad) {
    const Scalars sc = bind_scalars(spec_, layout_, params);
    const double* rv = punn_out_.value().row(0);
    double* rv_bar = punn_bar_.value().row(0);
    switch (spec_.fd_form) {
        case FdForm::Mlp: {
            fdl_bar_.configure(1, false, 0, 1, n_);
            double* bv = fdl_bar_.value().row(0);
            double* bd = fdl_bar_.first(0).row(0);
            for (int j = 0; j < n_; ++j) {
                bv[j] = fd_vbar_[j];
                bd[j] = fd_dbar_[j];
            }
            mlp_batch_backward(params + layout_.find("fdl").offset, spec_.fdl, fdl_tape_, fdl_bar_,
                               grad + layout_.find("fdl").offset, &fdl_in_bar_);
            const double* ib = fdl_in_bar_.value().row(0);
            for (int j = 0; j < n_; ++j) rv_bar[j] += ib[j];
            break;
        }
        case FdForm::GreenshieldsFlux:
            for (int j = 0; j < n_; ++j)
                rv_bar[j] += fd_vbar_[j] * sc.u_max * (1.0 - 2.0 * rv[j] / sc.rho_max) +
                             fd_dbar_[j] * (-2.0 * sc.u_max / sc.rho_max);
            break;
        case FdForm::GreenshieldsUeq:
            for (int j = 0; j < n_; ++j) rv_bar[j] += fd_vbar_[j] * (-sc.u_max / sc.rho_max);
            break;
    }
}

void ResidualChunk::forward(const double* params, std::span<const Point> pts, bool keep_tape) {
    n_ = static_cast<int>(pts.size());
    const bool second = spec_.uses_second_x();
    punn_in_.configure(2, second, 1, 2, n_);
    for (int j = 0; j < n_; ++j) {
        punn_in_.value().at(0, j) = pts[j].t;
        punn_in_.value().at(1, j) = pts[j].x;
        punn_in_.first(0).at(0, j) = 1.0;
        punn_in_.first(0).at(1, j) = 0.0;
        punn_in_.first(1).at(0, j) = 0.0;
        punn_in_.first(1).at(1, j) = 1.0;
        if (second) {
            punn_in_.second().at(0, j) = 0.0;
            punn_in_.second().at(1, j) = 0.0;
        }
    }
    mlp_batch_forward(params + layout_.find("punn").offset, spec_.punn, punn_in_, punn_out_,
                      keep_tape ? &punn_tape_ : nullptr);

    const Scalars sc = bind_scalars(spec_, layout_, params);
    const double* rv = punn_out_.value().row(0);
    const double* rt = punn_out_.first(0).row(0);
    const double* rx = punn_out_.first(1).row(0);
    f1_.resize(n_);

    switch (spec_.variant) {
        case Variant::LwrFdl:
        case Variant::LwrNgsim: {
            eval_fd(params, keep_tape);
            const double* rxx = second ? punn_out_.second().row(0) : nullptr;
            for (int j = 0; j < n_; ++j) {
                f1_[j] = rt[j] + fd_d_[j] * rx[j];
                if (second) f1_[j] -= sc.eps * rxx[j];
            }
            f2_.clear();
            break;
        }
        case Variant::LwrFixed: {
            const double* rxx = punn_out_.second().row(0);
            for (int j = 0; j < n_; ++j) {
                const double qd = sc.u_max * (1.0 - 2.0 * rv[j] / sc.rho_max);
                f1_[j] = rt[j] + qd * rx[j] - sc.eps * rxx[j];
            }
            f2_.clear();
            break;
        }
        case Variant::ArzFdl:
        case Variant::ArzFixed: {
            if (!(sc.tau > 0.0)) throw ConfigError("arz residual requires tau > 0");
            const double* uv = punn_out_.value().row(1);
            const double* ut = punn_out_.first(0).row(1);
            const double* ux = punn_out_.first(1).row(1);
            if (spec_.variant == Variant::ArzFdl) {
                eval_fd(params, keep_tape);
            } else {
                fd_v_.resize(n_);
                fd_d_.resize(n_);
                for (int j = 0; j < n_; ++j) {
                    fd_v_[j] = sc.u_max * (1.0 - rv[j] / sc.rho_max);
                    fd_d_[j] = -sc.u_max / sc.rho_max;
                }
            }
            f2_.resize(n_);
            for (int j = 0; j < n_; ++j) {
                // Traffic pressure slope h'(rho); by default taken from the
                // learned surrogate, optionally from the fixed closed form.
                const double hp = spec_.learned_pressure && spec_.variant == Variant::ArzFdl
                                      ? -fd_d_[j]
                                      : sc.u_max / sc.rho_max;
                f1_[j] = rt[j] + rx[j] * uv[j] + rv[j] * ux[j];
                f2_[j] = (ut[j] + hp * rt[j]) + uv[j] * (ux[j] + hp * rx[j]) -
                         (fd_v_[j] - uv[j]) / sc.tau;
            }
            break;
        }
    }

    for (int k = 0; k < spec_.n_residuals(); ++k) {
        const auto& f = (k == 0) ? f1_ : f2_;
        for (int j = 0; j < n_; ++j)
            if (!std::isfinite(f[j])) {
                std::ostringstream msg;
                msg << "non-finite residual f" << (k + 1) << " at (t=" << pts[j].t
                    << ", x=" << pts[j].x << ")";
                throw NumericError(msg.str());
            }
    }
}

void ResidualChunk::backward(const double* params, std::span<const double* const> res_bar,
                             double* grad) {
    const Scalars sc = bind_scalars(spec_, layout_, params);
    const bool second = spec_.uses_second_x();
    const double* rv = punn_out_.value().row(0);
    const double* rt = punn_out_.first(0).row(0);
    const double* rx = punn_out_.first(1).row(0);

    punn_bar_.configure(2, second, 1, punn_out_.value().rows, n_);
    for (Mat& m : punn_bar_.slot) std::fill(m.a.begin(), m.a.end(), 0.0);
    double* rv_bar = punn_bar_.value().row(0);
    double* rt_bar = punn_bar_.first(0).row(0);
    double* rx_bar = punn_bar_.first(1).row(0);

    switch (spec_.variant) {
        case Variant::LwrFdl:
        case Variant::LwrNgsim: {
            const double* fb = res_bar[0];
            fd_vbar_.assign(n_, 0.0);
            fd_dbar_.resize(n_);
            double eps_acc = 0.0;
            const double* rxx = second ? punn_out_.second().row(0) : nullptr;
            double* rxx_bar = second ? punn_bar_.second().row(0) : nullptr;
            for (int j = 0; j < n_; ++j) {
                rt_bar[j] += fb[j];
                rx_bar[j] += fb[j] * fd_d_[j];
                fd_dbar_[j] = fb[j] * rx[j];
                if (second) {
                    rxx_bar[j] -= fb[j] * sc.eps;
                    eps_acc -= fb[j] * rxx[j];
                }
            }
            if (sc.i_eps >= 0) grad[sc.i_eps] += eps_acc;
            fd_backward(params, grad);
            break;
        }
        case Variant::LwrFixed: {
            const double* fb = res_bar[0];
            const double* rxx = punn_out_.second().row(0);
            double* rxx_bar = punn_bar_.second().row(0);
            double eps_acc = 0.0, um_acc = 0.0, rm_acc = 0.0;
            for (int j = 0; j < n_; ++j) {
                const double qd = sc.u_max * (1.0 - 2.0 * rv[j] / sc.rho_max);
                rt_bar[j] += fb[j];
                rx_bar[j] += fb[j] * qd;
                rxx_bar[j] -= fb[j] * sc.eps;
                eps_acc -= fb[j] * rxx[j];
                const double qd_bar = fb[j] * rx[j];
                rv_bar[j] += qd_bar * (-2.0 * sc.u_max / sc.rho_max);
                um_acc += qd_bar * (1.0 - 2.0 * rv[j] / sc.rho_max);
                rm_acc += qd_bar * (2.0 * sc.u_max * rv[j] / (sc.rho_max * sc.rho_max));
            }
            if (sc.i_eps >= 0) grad[sc.i_eps] += eps_acc;
            if (sc.i_u_max >= 0) grad[sc.i_u_max] += um_acc;
            if (sc.i_rho_max >= 0) grad[sc.i_rho_max] += rm_acc;
            break;
        }
        case Variant::ArzFdl:
        case Variant::ArzFixed: {
            const double* f1b = res_bar[0];
            const double* f2b = res_bar[1];
            const double* uv = punn_out_.value().row(1);
            const double* ut = punn_out_.first(0).row(1);
            const double* ux = punn_out_.first(1).row(1);
            double* uv_bar = punn_bar_.value().row(1);
            double* ut_bar = punn_bar_.first(0).row(1);
            double* ux_bar = punn_bar_.first(1).row(1);
            const bool learned_hp = spec_.learned_pressure && spec_.variant == Variant::ArzFdl;
            fd_vbar_.assign(n_, 0.0);
            fd_dbar_.assign(n_, 0.0);
            double tau_acc = 0.0, um_acc = 0.0, rm_acc = 0.0;
            for (int j = 0; j < n_; ++j) {
                const double hp = learned_hp ? -fd_d_[j] : sc.u_max / sc.rho_max;
                rt_bar[j] += f1b[j] + f2b[j] * hp;
                rx_bar[j] += f1b[j] * uv[j] + f2b[j] * uv[j] * hp;
                rv_bar[j] += f1b[j] * ux[j];
                ux_bar[j] += f1b[j] * rv[j] + f2b[j] * uv[j];
                uv_bar[j] += f1b[j] * rx[j] + f2b[j] * (ux[j] + hp * rx[j]) + f2b[j] / sc.tau;
                ut_bar[j] += f2b[j];
                const double hp_bar = f2b[j] * (rt[j] + uv[j] * rx[j]);
                const double uveq_bar = -f2b[j] / sc.tau;
                tau_acc += f2b[j] * (fd_v_[j] - uv[j]) / (sc.tau * sc.tau);
                if (spec_.variant == Variant::ArzFdl) {
                    fd_vbar_[j] = uveq_bar;
                    if (learned_hp) fd_dbar_[j] = -hp_bar;
                } else {
                    // Closed-form U_eq = u_max*(1 - rho/rho_max), h' = u_max/rho_max.
                    rv_bar[j] += uveq_bar * (-sc.u_max / sc.rho_max);
                    um_acc += uveq_bar * (1.0 - rv[j] / sc.rho_max) + hp_bar / sc.rho_max;
                    rm_acc += uveq_bar * (sc.u_max * rv[j] / (sc.rho_max * sc.rho_max)) -
                              hp_bar * sc.u_max / (sc.rho_max * sc.rho_max);
                }
            }
            if (sc.i_tau >= 0) grad[sc.i_tau] += tau_acc;
            if (sc.i_u_max >= 0) grad[sc.i_u_max] += um_acc;
            if (sc.i_rho_max >= 0) grad[sc.i_rho_max] += rm_acc;
            if (spec_.variant == Variant::ArzFdl) fd_backward(params, grad);
            break;
        }
    }

    mlp_batch_backward(params + layout_.find("punn").offset, spec_.punn, punn_tape_, punn_bar_,
                       grad + layout_.find("punn").offset, nullptr);
}

namespace {

std::vector<double> chunk_residual(const ParamVector& params, const PhysicsSpec& spec, Point pt) {
    ResidualChunk chunk(spec);
    chunk.forward(params.data(), std::span<const Point>(&pt, 1), false);
    std::vector<double> out;
    for (int k = 0; k < spec.n_residuals(); ++k) out.push_back(chunk.res(k)[0]);
    return out;
}

void require_variant(const PhysicsSpec& spec, Variant v, const char* op) {
    if (spec.variant != v)
        throw ConfigError(std::string(op) + " requires variant " + variant_name(v));
}

} // namespace

double lwr_fdl_residual(const ParamVector& params, const PhysicsSpec& spec, Point pt) {
    require_variant(spec, Variant::LwrFdl, "lwr_fdl_residual");
    return chunk_residual(params, spec, pt)[0];
}

std::pair<double, double> arz_fdl_residuals(const ParamVector& params, const PhysicsSpec& spec,
                                            Point pt) {
    require_variant(spec, Variant::ArzFdl, "arz_fdl_residuals");
    auto r = chunk_residual(params, spec, pt);
    return {r[0], r[1]};
}

double lwr_fixed_residual(const ParamVector& params, const PhysicsSpec& spec, Point pt) {
    require_variant(spec, Variant::LwrFixed, "lwr_fixed_residual");
    return chunk_residual(params, spec, pt)[0];
}

std::pair<double, double> arz_fixed_residuals(const ParamVector& params, const PhysicsSpec& spec,
                                              Point pt) {
    require_variant(spec, Variant::ArzFixed, "arz_fixed_residuals");
    auto r = chunk_residual(params, spec, pt);
    return {r[0], r[1]};
}

double ngsim_lwr_residual(const ParamVector& params, const PhysicsSpec& spec, Point pt) {
    require_variant(spec, Variant::LwrNgsim, "ngsim_lwr_residual");
    return chunk_residual(params, spec, pt)[0];
}

double ngsim_velocity_head(const ParamVector& params, const PhysicsSpec& spec, Point pt) {
    require_variant(spec, Variant::LwrNgsim, "ngsim_velocity_head");
    const ParamLayout layout = spec.layout();
    const double rho =
        mlp_forward(params.data() + layout.find("punn").offset, spec.punn,
                    std::vector<double>{pt.t, pt.x})[0];
    if (!(rho > spec.rho_floor)) return spec.u_cap;
    double q = 0.0;
    switch (spec.fd_form) {
        case FdForm::Mlp:
            q = mlp_forward(params.data() + layout.find("fdl").offset, spec.fdl,
                            std::vector<double>{rho})[0];
            break;
        case FdForm::GreenshieldsFlux:
            q = rho * spec.u_max * (1.0 - rho / spec.rho_max);
            break;
        case FdForm::GreenshieldsUeq:
            q = rho * spec.u_max * (1.0 - rho / spec.rho_max);
            break;
    }
    return q / rho;
}

} // namespace tse
