#pragma once

#include <functional>
#include <map>
#include <string>

#include "tse/objective.hpp"

namespace tse {

struct TrainConfig {
    int adam_steps = 20000;
    double adam_lr = 1e-3;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps_hat = 1e-8;
    int lbfgs_memory = 10;
    int lbfgs_max_iters = 50000;
    // Loss-delta stopping tolerance. Negative selects the adaptive default
    // 1e-12*(1+|loss|); strict_tol uses the literal 1e-16 instead.
    double lbfgs_tol = -1.0;
    bool strict_tol = false;
    std::uint64_t seed = 0;
    int checkpoint_interval = 0; // Adam steps between checkpoints; 0 = off

    void validate() const;
    double tol_for(double loss_scale) const;
};

/// Adam first/second moments; checkpointing these makes resume bitwise.
struct AdamState {
    std::vector<double> m, v;
    long step = 0;
};

/// Called after every optimizer step with the pre-update loss.
using TrainLogger =
    std::function<void(const std::string& stage, long step, double loss, const ParamVector&)>;

/// Full-batch Adam for cfg.adam_steps steps (resumes from state->step when
/// a state is passed). Aborts back to the last finite iterate if the loss
/// or gradient stops being finite.
ParamVector run_adam(const LossFunction& loss, ParamVector params, const TrainConfig& cfg,
                     AdamState* state = nullptr, const TrainLogger& log = {});

struct LbfgsReport {
    long iterations = 0;
    long evaluations = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
    double grad_norm = 0.0;
    std::string termination; // "tol" | "max_iters" | "line_search" | "non_finite"
};

/// Limited-memory BFGS with a strong-Wolfe line search. Terminates when the
/// loss change between consecutive accepted iterates drops to the stopping
/// tolerance; a failed line search returns the best iterate seen (reported,
/// not fatal). The returned loss never exceeds the initial loss.
ParamVector run_lbfgs(const LossFunction& loss, ParamVector params, const TrainConfig& cfg,
                      LbfgsReport* report = nullptr, const TrainLogger& log = {});

struct TrainReport {
    double initial_loss = 0.0;
    double final_loss = 0.0;
    LossBreakdown final_parts;
    std::map<std::string, double> learned_scalars;
    long adam_steps = 0;
    long lbfgs_iterations = 0;
    std::string lbfgs_termination;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
};

struct Checkpoint {
    std::vector<ParamLayout::Segment> layout;
    ParamVector params;
    AdamState adam;
    bool has_adam = false;
};

void save_checkpoint(const std::string& path, const ParamLayout& layout, const ParamVector& params,
                     const AdamState* adam = nullptr);
Checkpoint load_checkpoint(const std::string& path);

struct TrainArtifacts {
    std::string log_csv;         // training-log CSV path ("" = no log)
    std::string checkpoint_path; // checkpoint file ("" = no checkpoints)
    int log_every = 50;          // log cadence in optimizer steps
};

/// Xavier init -> Adam -> L-BFGS. Optionally resumes a checkpointed Adam
/// stage; writes the training log and periodic checkpoints when asked.
std::pair<ParamVector, TrainReport> train_pipeline(const PidlLoss& loss, const TrainConfig& cfg,
                                                   const TrainArtifacts& artifacts = {},
                                                   const Checkpoint* resume = nullptr);

} // namespace tse
