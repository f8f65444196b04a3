// Command-line front end: ground-truth generation, training, evaluation,
// FD export, hyperparameter grid search, and one-shot reproduction runs.

#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tse/errors.hpp"
#include "tse/runner.hpp"

namespace fs = std::filesystem;
using namespace tse;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitAcceptance = 3;

std::string timestamp() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y%m%d-%H%M%S", std::localtime(&now));
    return buf;
}

fs::path prepare_run_dir(const RunConfig& cfg, const std::string& out_override) {
    fs::path dir = out_override.empty()
                       ? fs::path(cfg.io.out_dir) / (timestamp() + "-" + config_hash(cfg))
                       : fs::path(out_override);
    fs::create_directories(dir);
    save_config(cfg, (dir / "config.ini").string());
    return dir;
}

struct CommonOpts {
    std::string config_path;
    std::string out;
    std::string model;
    long seed = -1;
    int loops = -1;
    bool strict_tol = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_config = true) {
    if (with_config) cmd->add_option("--config", o.config_path, "run configuration file");
    cmd->add_option("--out", o.out, "output directory (default: runs/<timestamp>-<hash>)");
    cmd->add_option("--seed", o.seed, "override train.seed and derived sampling seeds");
    cmd->add_option("--loops", o.loops, "override sampling.loops");
    cmd->add_option("--model", o.model,
                    "override physics.variant (lwr-fdl|arz-fdl|lwr-fixed|arz-fixed|lwr-ngsim)");
    cmd->add_flag("--strict-tol", o.strict_tol, "stop L-BFGS at the literal 1e-16 loss delta");
}

RunConfig resolve_config(const CommonOpts& o) {
    RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
    if (o.seed >= 0) {
        cfg.train.seed = static_cast<std::uint64_t>(o.seed);
        cfg.sampling.seed_aux = cfg.train.seed * 1000 + 1;
        cfg.sampling.seed_boundary = cfg.train.seed * 1000 + 2;
    }
    if (o.loops > 0) cfg.sampling.loops = o.loops;
    if (!o.model.empty()) {
        cfg.physics.variant = o.model;
        cfg.sim.model = cfg.physics.to_spec().is_arz() ? Model::Arz : Model::Lwr;
    }
    if (o.strict_tol) cfg.train.strict_tol = true;
    cfg.sim.domain = cfg.domain;
    return cfg;
}

int cmd_generate(const CommonOpts& o) {
    RunConfig cfg = resolve_config(o);
    const fs::path dir = prepare_run_dir(cfg, o.out);
    GridField truth = generate_truth(cfg);
    write_field_csv((dir / "truth.csv").string(), truth);
    write_field_meta((dir / "truth.meta.json").string(), cfg.domain, cfg.sim, config_hash(cfg));
    std::cout << "wrote " << (dir / "truth.csv").string() << " (" << truth.nt << "x" << truth.nx
              << (truth.has_u() ? ", rho+u" : ", rho") << ")\n";
    return kExitOk;
}

int cmd_train(const CommonOpts& o, const std::string& truth_dir, const std::string& cells_path,
              const std::string& resume_path, bool force) {
    RunConfig cfg = resolve_config(o);
    const fs::path dir = prepare_run_dir(cfg, o.out);

    Checkpoint resume;
    const Checkpoint* resume_ptr = nullptr;
    if (!resume_path.empty()) {
        resume = load_checkpoint(resume_path);
        resume_ptr = &resume;
    }

    if (!cells_path.empty()) {
        // NGSIM-shaped pipeline: ingest -> nondimensionalize -> train.
        CellDataset cells = ingest_cells(cells_path);
        auto [field, scales] = nondimensionalize(cells);
        cfg.domain = {1.0, 1.0, cells.nt, cells.nx};
        cfg.sim.domain = cfg.domain;
        ExperimentResult run =
            run_experiment(cfg, field, &cells.valid, dir.string(), resume_ptr, &scales);
        std::cout << "err_rho=" << run.est.err_rho << " err_u=" << run.est.err_u << "\n";
        return kExitOk;
    }

    const fs::path tdir(truth_dir);
    GridField truth = read_field_csv((tdir / "truth.csv").string());
    FieldMeta meta = read_field_meta((tdir / "truth.meta.json").string());
    if (!force && meta.cfg_hash != config_hash(cfg))
        throw ConfigError("truth artifacts were produced by config " + meta.cfg_hash +
                          " but the current config hashes to " + config_hash(cfg) +
                          " (use --force to override)");
    cfg.domain = meta.domain;
    cfg.sim = meta.sim;
    ExperimentResult run = run_experiment(cfg, truth, nullptr, dir.string(), resume_ptr);
    std::cout << "err_rho=" << run.est.err_rho;
    if (truth.has_u()) std::cout << " err_u=" << run.est.err_u;
    for (const auto& [k, v] : run.est.learned_scalars) std::cout << " " << k << "*=" << v;
    std::cout << "\n";
    return kExitOk;
}

int cmd_evaluate(const std::string& truth_path, const std::string& estimate_path, int interp_loops,
                 bool force, const std::string& out_json) {
    GridField truth = read_field_csv(truth_path);
    const std::string truth_meta = fs::path(truth_path).replace_extension(".meta.json").string();

    Domain dom;
    dom.nt = truth.nt;
    dom.nx = truth.nx;
    if (fs::exists(truth_meta)) {
        FieldMeta m = read_field_meta(truth_meta);
        dom = m.domain;
    }

    GridField est;
    std::vector<std::pair<int, int>> exclusion;
    if (interp_loops > 0) {
        const std::vector<int> cols = loop_columns(interp_loops, dom.nx);
        est = interp2_baseline(truth, cols, dom);
        // Non-parametric baseline: observation points leave the metric.
        for (int i = 0; i < dom.nt; ++i)
            for (int c : cols) exclusion.emplace_back(i, c);
    } else {
        est = read_field_csv(estimate_path);
        const std::string est_meta =
            fs::path(estimate_path).replace_extension(".meta.json").string();
        if (!force && fs::exists(truth_meta) && fs::exists(est_meta)) {
            const std::string h_t = read_field_meta(truth_meta).cfg_hash;
            const std::string h_e = read_field_meta(est_meta).cfg_hash;
            if (h_t != h_e)
                throw ConfigError("estimate config hash " + h_e + " does not match truth " + h_t +
                                  " (use --force to override)");
        }
    }

    const double err_rho = rel_l2_error(est.rho, truth.rho,
                                        exclusion.empty() ? nullptr : &exclusion, dom.nx);
    double err_u = 0.0;
    if (truth.has_u() && est.has_u())
        err_u = rel_l2_error(est.u, truth.u, exclusion.empty() ? nullptr : &exclusion, dom.nx);
    std::cout << "err_rho=" << err_rho;
    if (truth.has_u() && est.has_u()) std::cout << " err_u=" << err_u;
    std::cout << "\n";
    if (!out_json.empty()) {
        std::ofstream out(out_json);
        out << "{\n  \"err_rho\": " << err_rho << ",\n  \"err_u\": " << err_u << "\n}\n";
    }
    return kExitOk;
}

int cmd_export_fd(const std::string& config_path, const std::string& params_path,
                  const std::string& out_csv, double lo, double hi, int samples) {
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_config(config_path);
    PhysicsSpec spec = cfg.physics.to_spec();
    Checkpoint ck = load_checkpoint(params_path);
    if (ck.params.size() != spec.layout().total)
        throw ConfigError("checkpoint size does not match the configured physics spec");
    FdCurve curve = export_fd_curve(ck.params, spec, lo, hi, samples);
    std::ofstream out(out_csv);
    if (!out) throw ConfigError("cannot write " + out_csv);
    out << (curve.velocity_form ? "rho,flow,ueq\n" : "rho,flow\n");
    for (std::size_t k = 0; k < curve.rho.size(); ++k) {
        out << curve.rho[k] << ',' << curve.value[k];
        if (curve.velocity_form) out << ',' << curve.ueq[k];
        out << '\n';
    }
    std::cout << "wrote " << out_csv << " (" << samples << " samples";
    if (curve.anchor_offset != 0.0) std::cout << ", anchored by " << curve.anchor_offset;
    std::cout << ")\n";
    return kExitOk;
}

int cmd_gridsearch(const CommonOpts& o, const std::string& truth_dir,
                   const std::string& weights_csv, const std::string& values_csv) {
    RunConfig base = resolve_config(o);
    const fs::path dir = prepare_run_dir(base, o.out);
    const fs::path tdir(truth_dir);
    GridField truth = read_field_csv((tdir / "truth.csv").string());
    FieldMeta meta = read_field_meta((tdir / "truth.meta.json").string());
    base.domain = meta.domain;
    base.sim = meta.sim;

    std::vector<std::string> names;
    {
        std::istringstream in(weights_csv);
        std::string w;
        while (std::getline(in, w, ',')) names.push_back(w);
    }
    std::vector<double> values;
    {
        std::istringstream in(values_csv);
        std::string v;
        while (std::getline(in, v, ',')) values.push_back(std::stod(v));
    }
    if (names.empty() || values.empty())
        throw ConfigError("gridsearch needs --weights and --values");

    auto weight_ref = [](RunConfig& c, const std::string& name) -> double& {
        if (name == "beta") return c.weights.beta;
        if (name == "gamma") return c.weights.gamma;
        if (name == "eta") return c.weights.eta;
        if (name == "beta1") return c.weights.beta1;
        if (name == "beta2") return c.weights.beta2;
        if (name == "gamma1") return c.weights.gamma1;
        if (name == "gamma2") return c.weights.gamma2;
        if (name == "xi") return c.weights.xi;
        throw ConfigError("gridsearch cannot tune weight '" + name + "'");
    };

    std::ofstream table(dir / "gridsearch.csv");
    table << "run";
    for (const auto& n : names) table << ',' << n;
    table << ",err_rho,err_u,final_loss\n";

    std::vector<std::size_t> idx(names.size(), 0);
    long run_id = 0;
    double best_err = 1e300;
    std::string best_desc;
    while (true) {
        RunConfig cfg = base;
        for (std::size_t k = 0; k < names.size(); ++k) weight_ref(cfg, names[k]) = values[idx[k]];
        const fs::path rdir = dir / ("run" + std::to_string(run_id));
        fs::create_directories(rdir);
        save_config(cfg, (rdir / "config.ini").string());
        ExperimentResult run = run_experiment(cfg, truth, nullptr, rdir.string());
        table << run_id;
        std::ostringstream desc;
        for (std::size_t k = 0; k < names.size(); ++k) {
            table << ',' << values[idx[k]];
            desc << names[k] << "=" << values[idx[k]] << " ";
        }
        table << ',' << run.est.err_rho << ',' << run.est.err_u << ',' << run.est.final_loss
              << "\n";
        table.flush();
        std::cout << "run " << run_id << ": " << desc.str() << "-> err_rho=" << run.est.err_rho
                  << "\n";
        if (run.est.err_rho < best_err) {
            best_err = run.est.err_rho;
            best_desc = desc.str();
        }
        ++run_id;
        std::size_t k = 0;
        while (k < idx.size() && ++idx[k] == values.size()) idx[k++] = 0;
        if (k == idx.size()) break;
    }
    std::cout << "best: " << best_desc << "(err_rho=" << best_err << ")\n";
    return kExitOk;
}

int cmd_reproduce(const std::string& model, const std::string& out, const std::string& loops_csv,
                  long seed, bool check) {
    RunConfig base = model == "arz" ? default_arz_run() : default_lwr_run();
    if (seed >= 0) base.train.seed = static_cast<std::uint64_t>(seed);
    const fs::path dir = out.empty()
                             ? fs::path(base.io.out_dir) / (timestamp() + "-reproduce-" + model)
                             : fs::path(out);
    fs::create_directories(dir);

    std::vector<int> loop_list;
    {
        std::istringstream in(loops_csv);
        std::string v;
        while (std::getline(in, v, ',')) loop_list.push_back(std::stoi(v));
    }
    if (loop_list.empty()) loop_list = {2, 3, 4, 5};

    GridField truth = generate_truth(base);
    write_field_csv((dir / "truth.csv").string(), truth);
    write_field_meta((dir / "truth.meta.json").string(), base.domain, base.sim, config_hash(base));

    const bool arz = base.sim.model == Model::Arz;
    std::ofstream table(dir / "table.csv");
    table << (arz ? "loops,err_rho,err_u,tau_star\n" : "loops,err_rho,eps_star\n");

    bool ok = true;
    for (int loops : loop_list) {
        RunConfig cfg = base;
        cfg.sampling.loops = loops;
        cfg.sampling.seed_aux = cfg.train.seed * 1000 + 1;
        cfg.sampling.seed_boundary = cfg.train.seed * 1000 + 2;
        const fs::path rdir = dir / ("loops" + std::to_string(loops));
        fs::create_directories(rdir);
        save_config(cfg, (rdir / "config.ini").string());
        ExperimentResult run = run_experiment(cfg, truth, nullptr, rdir.string());
        const double scalar = arz ? run.est.learned_scalars.at("tau")
                                  : run.est.learned_scalars.at("eps");
        table << loops << ',' << run.est.err_rho;
        if (arz) table << ',' << run.est.err_u;
        table << ',' << scalar << "\n";
        table.flush();
        std::cout << "loops=" << loops << " err_rho=" << run.est.err_rho;
        if (arz) std::cout << " err_u=" << run.est.err_u;
        std::cout << (arz ? " tau*=" : " eps*=") << scalar << " (" << run.report.wall_seconds
                  << "s)\n";
        if (check) {
            if (arz && loops >= 4)
                ok = ok && run.est.err_rho <= 6.0e-2 && run.est.err_u <= 2.9e-2 &&
                     std::abs(scalar - 0.02) <= 0.25 * 0.02;
            if (!arz && loops >= 3)
                ok = ok && run.est.err_rho <= 6.0e-2;
            if (!arz && loops == 5) ok = ok && scalar >= 0.0025 && scalar <= 0.0075;
        }
    }
    if (check && !ok) {
        std::cerr << "reproduction thresholds not met\n";
        return kExitAcceptance;
    }
    return kExitOk;
}

int cmd_print_config(const std::string& model) {
    const RunConfig cfg = model == "arz" ? default_arz_run() : default_lwr_run();
    std::cout << config_to_text(cfg);
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Traffic state and fundamental-diagram estimation from loop detectors"};
    app.require_subcommand(1);

    CommonOpts gen_o, train_o, grid_o;
    std::string truth_dir, cells_path, resume_path;
    bool force = false;

    auto* gen = app.add_subcommand("generate", "solve the configured model for a ground truth");
    add_common(gen, gen_o);

    auto* train = app.add_subcommand("train", "train an estimator against a ground truth");
    add_common(train, train_o);
    train->add_option("--truth", truth_dir, "directory holding truth.csv + truth.meta.json");
    train->add_option("--cells", cells_path, "pre-aggregated cell CSV (NGSIM-shaped runs)");
    train->add_option("--resume", resume_path, "resume from a checkpoint file");
    train->add_flag("--force", force, "skip the config-hash consistency check");

    std::string ev_truth, ev_estimate, ev_json;
    int ev_interp = 0;
    bool ev_force = false;
    auto* ev = app.add_subcommand("evaluate", "relative L2 error of an estimate (or interp2)");
    ev->add_option("--truth", ev_truth, "truth field CSV")->required();
    ev->add_option("--estimate", ev_estimate, "estimate field CSV");
    ev->add_option("--interp2", ev_interp,
                   "evaluate the interp2 baseline at this many loop detectors");
    ev->add_option("--report", ev_json, "write the errors to this JSON file");
    ev->add_flag("--force", ev_force, "skip the config-hash consistency check");

    std::string fd_config, fd_params, fd_out = "fd_curve.csv";
    double fd_lo = 0.0, fd_hi = 1.0;
    int fd_samples = 201;
    auto* fd = app.add_subcommand("export-fd", "sample the learned fundamental diagram");
    fd->add_option("--config", fd_config, "run configuration file");
    fd->add_option("--params", fd_params, "trained parameter checkpoint")->required();
    fd->add_option("--out", fd_out, "output CSV");
    fd->add_option("--lo", fd_lo, "density range start");
    fd->add_option("--hi", fd_hi, "density range end");
    fd->add_option("--samples", fd_samples, "sample count");

    std::string gs_weights = "beta,gamma,eta", gs_values = "1,10,50,100,150,200", gs_truth;
    auto* gs = app.add_subcommand("gridsearch", "tune loss weights over a value grid");
    add_common(gs, grid_o);
    gs->add_option("--truth", gs_truth, "directory holding truth artifacts")->required();
    gs->add_option("--weights", gs_weights, "comma-separated weight names to tune");
    gs->add_option("--values", gs_values, "comma-separated grid values");

    std::string rp_model = "lwr", rp_out, rp_loops = "2,3,4,5";
    long rp_seed = -1;
    bool rp_check = false;
    auto* rp = app.add_subcommand("reproduce", "generate+train+evaluate across loop counts");
    rp->add_option("--model", rp_model, "lwr or arz")->check(CLI::IsMember({"lwr", "arz"}));
    rp->add_option("--out", rp_out, "output directory");
    rp->add_option("--loops", rp_loops, "comma-separated loop counts");
    rp->add_option("--seed", rp_seed, "training seed");
    rp->add_flag("--check", rp_check, "exit nonzero when reproduction thresholds fail");

    std::string pc_model = "lwr";
    auto* pc = app.add_subcommand("print-config", "print a reference configuration");
    pc->add_option("--model", pc_model, "lwr or arz")->check(CLI::IsMember({"lwr", "arz"}));

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_generate(gen_o);
        if (train->parsed()) return cmd_train(train_o, truth_dir, cells_path, resume_path, force);
        if (ev->parsed()) return cmd_evaluate(ev_truth, ev_estimate, ev_interp, ev_force, ev_json);
        if (fd->parsed()) return cmd_export_fd(fd_config, fd_params, fd_out, fd_lo, fd_hi, fd_samples);
        if (gs->parsed()) return cmd_gridsearch(grid_o, gs_truth, gs_weights, gs_values);
        if (rp->parsed()) return cmd_reproduce(rp_model, rp_out, rp_loops, rp_seed, rp_check);
        if (pc->parsed()) return cmd_print_config(pc_model);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    }
    return kExitOk;
}
