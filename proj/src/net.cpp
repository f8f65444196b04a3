#include "tse/net.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tse/errors.hpp"
#include "tse/rng.hpp"

namespace tse {

void MlpSpec::validate() const {
    if (widths.size() < 2) throw ConfigError("mlp spec needs at least input and output widths");
    for (int w : widths)
        if (w < 1) throw ConfigError("mlp spec has a layer of width < 1");
    if (widths.front() != 1 && widths.front() != 2)
        throw ConfigError("mlp input width must be 1 or 2");
}

std::size_t MlpSpec::n_params() const {
    std::size_t n = 0;
    for (int k = 0; k + 1 < static_cast<int>(widths.size()); ++k)
        n += static_cast<std::size_t>(widths[k + 1]) * widths[k] + widths[k + 1];
    return n;
}

std::size_t ParamLayout::add(std::string name, std::size_t size) {
    segments.push_back({std::move(name), total, size});
    total += size;
    return segments.back().offset;
}

bool ParamLayout::has(std::string_view name) const {
    for (const auto& s : segments)
        if (s.name == name) return true;
    return false;
}

const ParamLayout::Segment& ParamLayout::find(std::string_view name) const {
    for (const auto& s : segments)
        if (s.name == name) return s;
    throw ConfigError("no parameter segment named '" + std::string(name) + "'");
}

void JetBatch::configure(int n_first_, bool has_second_, int second_dir_, int width, int n) {
    n_first = n_first_;
    has_second = has_second_;
    second_dir = second_dir_;
    slot.resize(n_slots());
    for (Mat& m : slot)
        if (m.rows != width || m.cols != n) m.resize(width, n);
}

void xavier_init_mlp(const MlpSpec& spec, std::uint64_t seed, double* dst) {
    spec.validate();
    Rng rng(seed);
    std::size_t off = 0;
    for (int k = 0; k + 1 < static_cast<int>(spec.widths.size()); ++k) {
        const int n_in = spec.widths[k];
        const int n_out = spec.widths[k + 1];
        const double bound = std::sqrt(6.0 / (n_in + n_out));
        for (int i = 0; i < n_out * n_in; ++i) dst[off++] = rng.uniform(-bound, bound);
        for (int i = 0; i < n_out; ++i) dst[off++] = 0.0;
    }
}

namespace {

// Fixed-order dot product: four independent accumulators recombined as
// ((s0+s1)+(s2+s3)), then a sequential tail.
double dot4(const double* __restrict a, const double* __restrict b, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
        s0 += a[j] * b[j];
        s1 += a[j + 1] * b[j + 1];
        s2 += a[j + 2] * b[j + 2];
        s3 += a[j + 3] * b[j + 3];
    }
    double s = (s0 + s1) + (s2 + s3);
    for (; j < n; ++j) s += a[j] * b[j];
    return s;
}

double sum4(const double* a, int n) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    int j = 0;
    for (; j + 4 <= n; j += 4) {
        s0 += a[j];
        s1 += a[j + 1];
        s2 += a[j + 2];
        s3 += a[j + 3];
    }
    double s = (s0 + s1) + (s2 + s3);
    for (; j < n; ++j) s += a[j];
    return s;
}

// y += w0*a0 + w1*a1 + w2*a2 + w3*a3, fixed evaluation order per element.
void axpy4(double* __restrict y, const double* __restrict a0, const double* __restrict a1,
           const double* __restrict a2, const double* __restrict a3, double w0, double w1,
           double w2, double w3, int n) {
    for (int j = 0; j < n; ++j) y[j] += w0 * a0[j] + w1 * a1[j] + w2 * a2[j] + w3 * a3[j];
}

void axpy1(double* __restrict y, const double* __restrict a, double w, int n) {
    for (int j = 0; j < n; ++j) y[j] += w * a[j];
}

// Z_s = W * A_s for every slot; the value slot additionally gets the bias.
void affine_forward(const double* w, const double* b, int n_out, int n_in, const JetBatch& a,
                    JetBatch& z) {
    const int n = a.cols();
    z.configure(a.n_first, a.has_second, a.second_dir, n_out, n);
    for (int s = 0; s < a.n_slots(); ++s) {
        const Mat& as = a.slot[s];
        Mat& zs = z.slot[s];
        for (int i = 0; i < n_out; ++i) {
            double* zi = zs.row(i);
            std::fill(zi, zi + n, s == 0 ? b[i] : 0.0);
            const double* wi = w + static_cast<std::size_t>(i) * n_in;
            int k = 0;
            for (; k + 4 <= n_in; k += 4)
                axpy4(zi, as.row(k), as.row(k + 1), as.row(k + 2), as.row(k + 3), wi[k], wi[k + 1],
                      wi[k + 2], wi[k + 3], n);
            for (; k < n_in; ++k) axpy1(zi, as.row(k), wi[k], n);
        }
    }
}

// Tanh activation with exact jet propagation; the tanh values end up in
// a.value() and double as the cache for the reverse sweep.
void tanh_forward(const JetBatch& z, JetBatch& a) {
    const int rows = z.slot[0].rows;
    const int n = z.cols();
    a.configure(z.n_first, z.has_second, z.second_dir, rows, n);
    const int d2 = z.has_second ? z.second_dir : 0;
    for (int i = 0; i < rows; ++i) {
        const double* zv = z.value().row(i);
        double* t = a.value().row(i);
        for (int j = 0; j < n; ++j) t[j] = std::tanh(zv[j]);
        for (int s = 0; s < z.n_first; ++s) {
            const double* zs = z.first(s).row(i);
            double* as = a.first(s).row(i);
            for (int j = 0; j < n; ++j) as[j] = (1.0 - t[j] * t[j]) * zs[j];
        }
        if (z.has_second) {
            const double* z2 = z.second().row(i);
            const double* zd = z.first(d2).row(i);
            double* a2 = a.second().row(i);
            for (int j = 0; j < n; ++j) {
                const double u = 1.0 - t[j] * t[j];
                a2[j] = u * z2[j] - 2.0 * t[j] * u * zd[j] * zd[j];
            }
        }
    }
}

// Reverse of tanh_forward: adjoints of the activation jets -> adjoints of
// the pre-activation jets. `tv` holds the tanh values.
void tanh_backward(const JetBatch& z, const Mat& tv, const JetBatch& a_bar, JetBatch& z_bar) {
    const int rows = z.slot[0].rows;
    const int n = z.cols();
    z_bar.configure(z.n_first, z.has_second, z.second_dir, rows, n);
    const int d2 = z.has_second ? z.second_dir : 0;
    for (int i = 0; i < rows; ++i) {
        const double* t = tv.row(i);
        const double* avb = a_bar.value().row(i);
        double* zvb = z_bar.value().row(i);
        for (int j = 0; j < n; ++j) zvb[j] = avb[j] * (1.0 - t[j] * t[j]);
        for (int s = 0; s < z.n_first; ++s) {
            const double* asb = a_bar.first(s).row(i);
            const double* zs = z.first(s).row(i);
            double* zsb = z_bar.first(s).row(i);
            for (int j = 0; j < n; ++j) {
                const double u = 1.0 - t[j] * t[j];
                zsb[j] = asb[j] * u;
                zvb[j] += asb[j] * (-2.0 * t[j] * u) * zs[j];
            }
        }
        if (z.has_second) {
            const double* a2b = a_bar.second().row(i);
            const double* z2 = z.second().row(i);
            const double* zd = z.first(d2).row(i);
            double* z2b = z_bar.second().row(i);
            double* zdb = z_bar.first(d2).row(i);
            for (int j = 0; j < n; ++j) {
                const double u = 1.0 - t[j] * t[j];
                z2b[j] = a2b[j] * u;
                zdb[j] += a2b[j] * (-4.0 * t[j] * u * zd[j]);
                zvb[j] += a2b[j] * (-2.0 * t[j] * u * z2[j] -
                                    2.0 * u * (u - 2.0 * t[j] * t[j]) * zd[j] * zd[j]);
            }
        }
    }
}

// Reverse of affine_forward: accumulates parameter gradients and (when
// `a_bar` is non-null) writes the adjoints of the layer input.
void affine_backward(const double* w, int n_out, int n_in, const JetBatch& a, const JetBatch& z_bar,
                     double* w_grad, double* b_grad, JetBatch* a_bar) {
    const int n = a.cols();
    for (int s = 0; s < a.n_slots(); ++s) {
        const Mat& as = a.slot[s];
        const Mat& zbs = z_bar.slot[s];
        for (int i = 0; i < n_out; ++i) {
            double* wg = w_grad + static_cast<std::size_t>(i) * n_in;
            const double* zbi = zbs.row(i);
            for (int k = 0; k < n_in; ++k) wg[k] += dot4(zbi, as.row(k), n);
        }
    }
    for (int i = 0; i < n_out; ++i) b_grad[i] += sum4(z_bar.value().row(i), n);
    if (a_bar) {
        a_bar->configure(a.n_first, a.has_second, a.second_dir, n_in, n);
        for (int s = 0; s < a.n_slots(); ++s) {
            const Mat& zbs = z_bar.slot[s];
            Mat& abs_ = a_bar->slot[s];
            for (int k = 0; k < n_in; ++k) {
                double* ab = abs_.row(k);
                std::fill(ab, ab + n, 0.0);
                int i = 0;
                for (; i + 4 <= n_out; i += 4)
                    axpy4(ab, zbs.row(i), zbs.row(i + 1), zbs.row(i + 2), zbs.row(i + 3),
                          w[static_cast<std::size_t>(i) * n_in + k],
                          w[static_cast<std::size_t>(i + 1) * n_in + k],
                          w[static_cast<std::size_t>(i + 2) * n_in + k],
                          w[static_cast<std::size_t>(i + 3) * n_in + k], n);
                for (; i < n_out; ++i)
                    axpy1(ab, zbs.row(i), w[static_cast<std::size_t>(i) * n_in + k], n);
            }
        }
    }
}

} // namespace

void mlp_batch_forward(const double* params, const MlpSpec& spec, const JetBatch& input,
                       JetBatch& out, MlpTape* tape) {
    const int n_layers = spec.n_layers();
    thread_local MlpTape scratch;
    MlpTape& tp = tape ? *tape : scratch;
    tp.z.resize(std::max(0, n_layers - 1));
    tp.act.resize(n_layers); // act[k] feeds layer k; act[0] unused (input borrowed)
    tp.input = &input;

    const JetBatch* cur = &input;
    std::size_t off = 0;
    for (int k = 0; k < n_layers; ++k) {
        const int n_in = spec.widths[k];
        const int n_out = spec.widths[k + 1];
        const double* w = params + off;
        const double* b = params + off + static_cast<std::size_t>(n_out) * n_in;
        off += static_cast<std::size_t>(n_out) * n_in + n_out;

        if (k == n_layers - 1) {
            affine_forward(w, b, n_out, n_in, *cur, out); // identity output layer
            break;
        }
        affine_forward(w, b, n_out, n_in, *cur, tp.z[k]);
        tanh_forward(tp.z[k], tp.act[k + 1]);
        cur = &tp.act[k + 1];
    }
}

void mlp_batch_backward(const double* params, const MlpSpec& spec, const MlpTape& tape,
                        const JetBatch& out_bar, double* grad, JetBatch* input_bar) {
    const int n_layers = spec.n_layers();
    thread_local JetBatch zbar_buf, abar_buf;

    std::vector<std::size_t> off(n_layers);
    std::size_t acc = 0;
    for (int k = 0; k < n_layers; ++k) {
        off[k] = acc;
        acc += static_cast<std::size_t>(spec.widths[k + 1]) * spec.widths[k] + spec.widths[k + 1];
    }

    const JetBatch* zbar = &out_bar;
    for (int k = n_layers - 1; k >= 0; --k) {
        const int n_in = spec.widths[k];
        const int n_out = spec.widths[k + 1];
        const double* w = params + off[k];
        double* wg = grad + off[k];
        double* bg = grad + off[k] + static_cast<std::size_t>(n_out) * n_in;

        const JetBatch* a_in = (k == 0) ? tape.input : &tape.act[k];
        const bool need_input_adjoint = (k > 0) || (input_bar != nullptr);
        affine_backward(w, n_out, n_in, *a_in, *zbar, wg, bg,
                        need_input_adjoint ? &abar_buf : nullptr);
        if (k == 0) {
            if (input_bar) *input_bar = abar_buf;
            break;
        }
        tanh_backward(tape.z[k - 1], tape.act[k].value(), abar_buf, zbar_buf);
        zbar = &zbar_buf;
    }
}

std::vector<double> mlp_forward(const double* params, const MlpSpec& spec,
                                std::span<const double> input) {
    if (static_cast<int>(input.size()) != spec.input_width())
        throw ConfigError("mlp_forward: input width mismatch");
    for (double v : input)
        if (!std::isfinite(v)) throw NumericError("mlp_forward: non-finite input");
    thread_local JetBatch in, out;
    in.configure(0, false, 0, spec.input_width(), 1);
    for (int k = 0; k < spec.input_width(); ++k) in.value().at(k, 0) = input[k];
    mlp_batch_forward(params, spec, in, out);
    std::vector<double> res(spec.output_width());
    for (int i = 0; i < spec.output_width(); ++i) res[i] = out.value().at(i, 0);
    return res;
}

std::vector<Jet> mlp_forward_jet_tx(const double* params, const MlpSpec& spec, double t, double x) {
    if (spec.input_width() != 2) throw ConfigError("mlp_forward_jet_tx requires input width 2");
    thread_local JetBatch in, out;
    in.configure(2, true, 1, 2, 1);
    in.value().at(0, 0) = t;
    in.value().at(1, 0) = x;
    in.first(0).at(0, 0) = 1.0;
    in.first(0).at(1, 0) = 0.0;
    in.first(1).at(0, 0) = 0.0;
    in.first(1).at(1, 0) = 1.0;
    in.second().at(0, 0) = 0.0;
    in.second().at(1, 0) = 0.0;
    mlp_batch_forward(params, spec, in, out);
    std::vector<Jet> jets(spec.output_width());
    for (int i = 0; i < spec.output_width(); ++i) {
        jets[i].v = out.value().at(i, 0);
        jets[i].dt = out.first(0).at(i, 0);
        jets[i].dx = out.first(1).at(i, 0);
        jets[i].dxx = out.second().at(i, 0);
    }
    return jets;
}

std::vector<Jet> mlp_forward_jet_scalar(const double* params, const MlpSpec& spec, double rho) {
    if (spec.input_width() != 1) throw ConfigError("mlp_forward_jet_scalar requires input width 1");
    thread_local JetBatch in, out;
    in.configure(1, true, 0, 1, 1);
    in.value().at(0, 0) = rho;
    in.first(0).at(0, 0) = 1.0;
    in.second().at(0, 0) = 0.0;
    mlp_batch_forward(params, spec, in, out);
    std::vector<Jet> jets(spec.output_width());
    for (int i = 0; i < spec.output_width(); ++i) {
        jets[i].v = out.value().at(i, 0);
        jets[i].dx = out.first(0).at(i, 0);
        jets[i].dxx = out.second().at(i, 0);
    }
    return jets;
}

} // namespace tse
