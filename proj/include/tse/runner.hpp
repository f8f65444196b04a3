#pragma once

#include <optional>

#include "tse/io.hpp"

namespace tse {

struct ExperimentResult {
    ParamVector params;
    PhysicsSpec spec;
    TrainReport report;
    EstimationReport est;
    GridField estimate;
};

/// Builds the training sets from a ground-truth field per the run config,
/// trains the configured variant, and evaluates it on the full grid.
/// When `artifact_dir` is non-empty the run writes its training log,
/// checkpoints, parameter file, estimate field, and reports there.
ExperimentResult run_experiment(const RunConfig& cfg, const GridField& truth,
                                const std::vector<std::uint8_t>* mask = nullptr,
                                const std::string& artifact_dir = "",
                                const Checkpoint* resume = nullptr,
                                const Scales* scales = nullptr);

/// Ground truth for the configured model.
GridField generate_truth(const RunConfig& cfg);

} // namespace tse
