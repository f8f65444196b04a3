#include "tse/eval.hpp"

#include <algorithm>
#include <cmath>

#include "tse/errors.hpp"

namespace tse {

double rel_l2_error(std::span<const double> estimate, std::span<const double> truth,
                    const std::vector<std::pair<int, int>>* exclude, int nx) {
    if (estimate.size() != truth.size())
        throw ConfigError("rel_l2_error: field dimensions do not match");
    std::vector<char> skip;
    if (exclude && !exclude->empty()) {
        if (nx <= 0) throw ConfigError("rel_l2_error: exclusion needs the row width nx");
        skip.assign(truth.size(), 0);
        for (auto [i, j] : *exclude) skip[static_cast<std::size_t>(i) * nx + j] = 1;
    }
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
        if (!skip.empty() && skip[k]) continue;
        const double d = estimate[k] - truth[k];
        num += d * d;
        den += truth[k] * truth[k];
    }
    if (den == 0.0) throw NumericError("rel_l2_error: reference field has zero norm");
    return std::sqrt(num) / std::sqrt(den);
}

GridField interp2_baseline(const GridField& observed_field, std::span<const int> detector_cols,
                           const Domain& domain) {
    if (detector_cols.empty()) throw ConfigError("interp2 needs at least one detector column");
    if (observed_field.nt != domain.nt || observed_field.nx != domain.nx)
        throw ConfigError("interp2: field dimensions do not match the domain");
    std::vector<int> cols(detector_cols.begin(), detector_cols.end());
    std::sort(cols.begin(), cols.end());
    for (int c : cols)
        if (c < 0 || c >= domain.nx) throw ConfigError("interp2: detector column out of range");

    const bool with_u = observed_field.has_u();
    GridField out(domain.nt, domain.nx, with_u);
    for (int i = 0; i < domain.nt; ++i) {
        auto interp = [&](auto&& get, auto&& set) {
            for (int j = 0; j < domain.nx; ++j) {
                if (j <= cols.front()) {
                    set(i, j, get(i, cols.front()));
                } else if (j >= cols.back()) {
                    set(i, j, get(i, cols.back()));
                } else {
                    const auto hi = std::upper_bound(cols.begin(), cols.end(), j);
                    const int c1 = *hi;
                    const int c0 = *(hi - 1);
                    const double w = static_cast<double>(j - c0) / (c1 - c0);
                    set(i, j, (1.0 - w) * get(i, c0) + w * get(i, c1));
                }
            }
        };
        interp([&](int a, int b) { return observed_field.rho_at(a, b); },
               [&](int a, int b, double v) { out.rho_at(a, b) = v; });
        if (with_u)
            interp([&](int a, int b) { return observed_field.u_at(a, b); },
                   [&](int a, int b, double v) { out.u_at(a, b) = v; });
    }
    return out;
}

GridField evaluate_on_grid(const ParamVector& params, const PhysicsSpec& spec,
                           const Domain& domain) {
    domain.validate();
    const ParamLayout layout = spec.layout();
    const double* punn_p = params.data() + layout.find("punn").offset;
    const bool arz = spec.is_arz();
    const bool ngsim = spec.variant == Variant::LwrNgsim;
    GridField out(domain.nt, domain.nx, arz || ngsim);

    const int chunk = 4096;
    JetBatch in, net_out, fin, fout;
    std::vector<Point> pts;
    const std::int64_t total = domain.n_grid();
    for (std::int64_t start = 0; start < total; start += chunk) {
        const int len = static_cast<int>(std::min<std::int64_t>(chunk, total - start));
        pts.resize(len);
        for (int k = 0; k < len; ++k) {
            const int i = static_cast<int>((start + k) / domain.nx);
            const int j = static_cast<int>((start + k) % domain.nx);
            pts[k] = {domain.t(i), domain.x(j)};
        }
        in.configure(0, false, 0, 2, len);
        for (int k = 0; k < len; ++k) {
            in.value().at(0, k) = pts[k].t;
            in.value().at(1, k) = pts[k].x;
        }
        mlp_batch_forward(punn_p, spec.punn, in, net_out);
        const double* rv = net_out.value().row(0);
        for (int k = 0; k < len; ++k) out.rho[start + k] = rv[k];
        if (arz) {
            const double* uv = net_out.value().row(1);
            for (int k = 0; k < len; ++k) out.u[start + k] = uv[k];
        } else if (ngsim) {
            if (spec.fd_form == FdForm::Mlp) {
                fin.configure(0, false, 0, 1, len);
                for (int k = 0; k < len; ++k) fin.value().at(0, k) = rv[k];
                mlp_batch_forward(params.data() + layout.find("fdl").offset, spec.fdl, fin, fout);
                const double* qv = fout.value().row(0);
                for (int k = 0; k < len; ++k)
                    out.u[start + k] = rv[k] > spec.rho_floor ? qv[k] / rv[k] : spec.u_cap;
            } else {
                for (int k = 0; k < len; ++k)
                    out.u[start + k] = rv[k] > spec.rho_floor
                                           ? spec.u_max * (1.0 - rv[k] / spec.rho_max)
                                           : spec.u_cap;
            }
        }
    }
    return out;
}

FdCurve export_fd_curve(const ParamVector& params, const PhysicsSpec& spec, double rho_lo,
                        double rho_hi, int n_samples, bool anchor_zero) {
    if (n_samples < 2) throw ConfigError("fd curve needs at least two samples");
    if (!(rho_hi > rho_lo)) throw ConfigError("fd curve needs rho_hi > rho_lo");
    const ParamLayout layout = spec.layout();
    FdCurve curve;
    curve.velocity_form = spec.is_arz();
    curve.rho.resize(n_samples);
    curve.value.resize(n_samples);
    for (int k = 0; k < n_samples; ++k)
        curve.rho[k] = rho_lo + (rho_hi - rho_lo) * k / (n_samples - 1);

    auto fd_value = [&](double rho) {
        switch (spec.fd_form) {
            case FdForm::Mlp:
                return mlp_forward(params.data() + layout.find("fdl").offset, spec.fdl,
                                   std::vector<double>{rho})[0];
            case FdForm::GreenshieldsFlux: {
                const double um = layout.has("u_max") ? params[layout.find("u_max").offset] : spec.u_max;
                const double rm =
                    layout.has("rho_max") ? params[layout.find("rho_max").offset] : spec.rho_max;
                return rho * um * (1.0 - rho / rm);
            }
            case FdForm::GreenshieldsUeq: {
                const double um = layout.has("u_max") ? params[layout.find("u_max").offset] : spec.u_max;
                const double rm =
                    layout.has("rho_max") ? params[layout.find("rho_max").offset] : spec.rho_max;
                return um * (1.0 - rho / rm);
            }
        }
        return 0.0;
    };

    // Fixed-FD variants export their closed form directly.
    if (!spec.has_fdl()) {
        const double um = layout.has("u_max") ? params[layout.find("u_max").offset] : spec.u_max;
        const double rm = layout.has("rho_max") ? params[layout.find("rho_max").offset] : spec.rho_max;
        if (curve.velocity_form) curve.ueq.resize(n_samples);
        for (int k = 0; k < n_samples; ++k) {
            const double ueq = um * (1.0 - curve.rho[k] / rm);
            if (curve.velocity_form) {
                curve.ueq[k] = ueq;
                curve.value[k] = curve.rho[k] * ueq;
            } else {
                curve.value[k] = curve.rho[k] * ueq;
            }
        }
        return curve;
    }

    if (curve.velocity_form) {
        curve.ueq.resize(n_samples);
        for (int k = 0; k < n_samples; ++k) {
            curve.ueq[k] = fd_value(curve.rho[k]);
            curve.value[k] = curve.rho[k] * curve.ueq[k];
        }
    } else {
        for (int k = 0; k < n_samples; ++k) curve.value[k] = fd_value(curve.rho[k]);
        // The LWR-FDL physics sees the flux only through its derivative, so
        // the learned curve carries an unidentifiable additive constant; the
        // exported curve is pinned to the physical anchor Q(0) = 0.
        if (anchor_zero && spec.variant == Variant::LwrFdl) {
            curve.anchor_offset = fd_value(0.0);
            for (double& v : curve.value) v -= curve.anchor_offset;
        }
    }
    return curve;
}

FdFitError fd_fit_error(std::span<const double> curve, std::span<const double> reference) {
    if (curve.size() != reference.size() || curve.empty())
        throw ConfigError("fd_fit_error: curves must be non-empty and equally sampled");
    FdFitError e;
    double ss = 0.0;
    for (std::size_t k = 0; k < curve.size(); ++k) {
        const double d = std::abs(curve[k] - reference[k]);
        e.max_abs = std::max(e.max_abs, d);
        ss += d * d;
    }
    e.rms = std::sqrt(ss / curve.size());
    return e;
}

} // namespace tse
