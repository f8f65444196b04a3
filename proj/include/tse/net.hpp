#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tse {

/// Fully-connected feed-forward architecture: tanh on hidden layers,
/// identity on the output layer. `widths` runs input -> hidden... -> output.
/// A two-entry spec is a single affine (purely linear) map.
struct MlpSpec {
    std::vector<int> widths;

    void validate() const;
    int input_width() const { return widths.front(); }
    int output_width() const { return widths.back(); }
    int n_layers() const { return static_cast<int>(widths.size()) - 1; }
    std::size_t n_params() const;
};

/// Name -> index-range table over one flat parameter array. The layout is
/// frozen at construction; optimizers treat the array as opaque.
struct ParamLayout {
    struct Segment {
        std::string name;
        std::size_t offset = 0;
        std::size_t size = 0;
    };
    std::vector<Segment> segments;
    std::size_t total = 0;

    std::size_t add(std::string name, std::size_t size);
    bool has(std::string_view name) const;
    const Segment& find(std::string_view name) const; // throws ConfigError
};

using ParamVector = std::vector<double>;

/// Value of one scalar output together with its exact input derivatives.
/// For (t,x)-input networks the slots are (v, dt, dx, dxx); for
/// density-input networks dt is unused and (dx, dxx) hold (d/drho, d2/drho2).
struct Jet {
    double v = 0.0;
    double dt = 0.0;
    double dx = 0.0;
    double dxx = 0.0;
};

/// Xavier-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases,
/// written to dst[0 .. spec.n_params()). Deterministic under seed.
void xavier_init_mlp(const MlpSpec& spec, std::uint64_t seed, double* dst);

/// Plain forward pass for one input vector.
std::vector<double> mlp_forward(const double* params, const MlpSpec& spec,
                                std::span<const double> input);

/// Forward pass carrying exact first derivatives w.r.t. both inputs and the
/// exact second derivative along the second input (x). One jet per output.
/// The value slot is computed by the same arithmetic path as mlp_forward.
std::vector<Jet> mlp_forward_jet_tx(const double* params, const MlpSpec& spec, double t, double x);

/// Jet of a scalar-input network: value, first and second derivative
/// w.r.t. the input (dt slot unused). Used by the FD learner.
std::vector<Jet> mlp_forward_jet_scalar(const double* params, const MlpSpec& spec, double rho);

// ---------------------------------------------------------------------------
// Batched jet engine.
//
// A JetBatch is a stack of row-major (width x n) matrices, one per slot:
// slot 0 holds values, slots 1..n_first hold first derivatives along
// caller-chosen directions, and an optional trailing slot holds the second
// derivative along direction `second_dir`. All kernels process columns
// independently with fixed-order dot products, so batched evaluation is
// bitwise equal to pointwise evaluation and summation order never depends
// on the batch size.
// ---------------------------------------------------------------------------

struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
    void resize(int r, int c) {
        rows = r;
        cols = c;
        a.assign(static_cast<std::size_t>(r) * c, 0.0);
    }
    double* row(int i) { return a.data() + static_cast<std::size_t>(i) * cols; }
    const double* row(int i) const { return a.data() + static_cast<std::size_t>(i) * cols; }
    double& at(int i, int j) { return a[static_cast<std::size_t>(i) * cols + j]; }
    double at(int i, int j) const { return a[static_cast<std::size_t>(i) * cols + j]; }
};

struct JetBatch {
    int n_first = 0;      // number of first-derivative slots
    bool has_second = false;
    int second_dir = 0;   // direction (index into first slots) of the d2 slot
    std::vector<Mat> slot; // size 1 + n_first + (has_second ? 1 : 0)

    int n_slots() const { return 1 + n_first + (has_second ? 1 : 0); }
    int cols() const { return slot.empty() ? 0 : slot[0].cols; }
    Mat& value() { return slot[0]; }
    const Mat& value() const { return slot[0]; }
    Mat& first(int d) { return slot[1 + d]; }
    const Mat& first(int d) const { return slot[1 + d]; }
    Mat& second() { return slot[1 + n_first]; }
    const Mat& second() const { return slot[1 + n_first]; }

    void configure(int n_first_, bool has_second_, int second_dir_, int width, int n);
};

/// Forward activations cached for the reverse sweep.
struct MlpTape {
    std::vector<JetBatch> z;   // pre-activation jets of hidden layers 0..L-2
    std::vector<JetBatch> act; // act[k] = activation entering layer k; act[0] unused
    const JetBatch* input = nullptr; // borrowed; must outlive the backward call
};

/// Batched jet forward through the network; fills `out` (and `tape` when
/// a reverse sweep will follow).
void mlp_batch_forward(const double* params, const MlpSpec& spec, const JetBatch& input,
                       JetBatch& out, MlpTape* tape = nullptr);

/// Reverse sweep: given adjoints of every output slot, accumulate (+=) the
/// loss gradient w.r.t. the network parameters into grad[0..n_params) and,
/// if `input_bar` is non-null, the adjoints of the input jet slots.
void mlp_batch_backward(const double* params, const MlpSpec& spec, const MlpTape& tape,
                        const JetBatch& out_bar, double* grad, JetBatch* input_bar = nullptr);

} // namespace tse
