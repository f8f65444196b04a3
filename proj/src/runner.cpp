#include "tse/runner.hpp"

#include <filesystem>
#include <fstream>

#include "tse/errors.hpp"

namespace fs = std::filesystem;

namespace tse {

GridField generate_truth(const RunConfig& cfg) {
    SimConfig sim = cfg.sim;
    sim.domain = cfg.domain;
    return sim.model == Model::Lwr ? solve_lwr_godunov(sim) : solve_arz_lf(sim);
}

ExperimentResult run_experiment(const RunConfig& cfg, const GridField& truth,
                                const std::vector<std::uint8_t>* mask,
                                const std::string& artifact_dir, const Checkpoint* resume,
                                const Scales* scales) {
    Problem prob;
    prob.physics = cfg.physics.to_spec();
    sample_loop_observations(truth, cfg.sampling.loops, cfg.domain, prob.data, mask);
    prob.data.auxiliary = sample_auxiliary(cfg.domain, cfg.sampling.n_aux, cfg.sampling.seed_aux);
    if (prob.physics.variant != Variant::LwrNgsim && cfg.sampling.n_boundary > 0)
        prob.data.boundary_times =
            sample_boundary(cfg.domain, cfg.sampling.n_boundary, cfg.sampling.seed_boundary);
    prob.weights = cfg.weights;
    prob.reg = cfg.reg;
    prob.ring_length = cfg.domain.L;
    prob.chunk = cfg.io.chunk;
    PidlLoss loss(prob);

    TrainArtifacts artifacts;
    if (!artifact_dir.empty()) {
        fs::create_directories(artifact_dir);
        artifacts.log_csv = (fs::path(artifact_dir) / "train_log.csv").string();
        artifacts.checkpoint_path = (fs::path(artifact_dir) / "checkpoint.json").string();
        artifacts.log_every = cfg.io.log_every;
    }

    ExperimentResult res;
    res.spec = prob.physics;
    auto [params, report] = train_pipeline(loss, cfg.train, artifacts, resume);
    res.params = std::move(params);
    res.report = report;

    res.estimate = evaluate_on_grid(res.params, res.spec, cfg.domain);
    res.est.variant = variant_name(res.spec.variant);
    res.est.err_rho = rel_l2_error(res.estimate.rho, truth.rho);
    if (truth.has_u() && res.estimate.has_u())
        res.est.err_u = rel_l2_error(res.estimate.u, truth.u);
    res.est.learned_scalars = report.learned_scalars;
    res.est.loops = cfg.sampling.loops;
    res.est.seed = cfg.train.seed;
    res.est.train_seconds = report.wall_seconds;
    res.est.final_loss = report.final_loss;
    res.est.config_hash = config_hash(cfg);
    res.est.fd_curve = export_fd_curve(res.params, res.spec, 0.0, cfg.sim.rho_max, 201);

    if (!artifact_dir.empty()) {
        const fs::path dir(artifact_dir);
        write_points_csv((dir / "observations.csv").string(), prob.data.observations,
                         prob.data.targets);
        write_points_csv((dir / "auxiliary.csv").string(), prob.data.auxiliary);
        if (!prob.data.boundary_times.empty()) {
            std::vector<Point> bpts;
            for (double t : prob.data.boundary_times) {
                bpts.push_back({t, 0.0});
                bpts.push_back({t, cfg.domain.L});
            }
            write_points_csv((dir / "boundary.csv").string(), bpts);
        }
        save_checkpoint((dir / "params.json").string(), loss.layout(), res.params);
        std::ofstream(dir / "train_report.json") << train_report_to_json(report) << "\n";
        write_field_csv((dir / "estimate.csv").string(), res.estimate);
        write_field_meta((dir / "estimate.meta.json").string(), cfg.domain, cfg.sim,
                         config_hash(cfg));
        std::ofstream(dir / "estimation_report.json")
            << estimation_report_to_json(res.est, scales) << "\n";
    }
    return res;
}

} // namespace tse
