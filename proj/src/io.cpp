#include "tse/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "tse/errors.hpp"

namespace tse {

namespace {

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// Schema-driven config binding: each entry knows how to print and parse one
// key, so load/save/hash all share a single canonical key list.
struct Binding {
    std::string section, key;
    std::function<std::string(const RunConfig&)> get;
    std::function<void(RunConfig&, const std::string&)> set;
};

template <class T>
void parse_into(T& dst, const std::string& raw, const std::string& where) {
    std::istringstream in(raw);
    if constexpr (std::is_same_v<T, bool>) {
        std::string w;
        in >> w;
        if (w == "true" || w == "1") dst = true;
        else if (w == "false" || w == "0") dst = false;
        else throw ConfigError("bad boolean for " + where + ": '" + raw + "'");
        return;
    } else {
        in >> dst;
        std::string rest;
        if (!in || (in >> rest && !rest.empty()))
            throw ConfigError("bad value for " + where + ": '" + raw + "'");
    }
}

std::vector<Binding> config_schema() {
    std::vector<Binding> s;
    auto add = [&](std::string section, std::string key, auto accessor) {
        using Field = std::remove_reference_t<decltype(accessor(std::declval<RunConfig&>()))>;
        const std::string where = section + "." + key;
        s.push_back(Binding{
            std::move(section), std::move(key),
            [accessor](const RunConfig& c) {
                const auto& v = accessor(const_cast<RunConfig&>(c));
                if constexpr (std::is_same_v<Field, double>) return fmt_double(v);
                else if constexpr (std::is_same_v<Field, bool>) return std::string(v ? "true" : "false");
                else if constexpr (std::is_same_v<Field, std::string>) return v;
                else return std::to_string(v);
            },
            [accessor, where](RunConfig& c, const std::string& raw) {
                if constexpr (std::is_same_v<Field, std::string>) accessor(c) = raw;
                else parse_into(accessor(c), raw, where);
            }});
    };

    add("domain", "T", [](RunConfig& c) -> double& { return c.domain.T; });
    add("domain", "L", [](RunConfig& c) -> double& { return c.domain.L; });
    add("domain", "nt", [](RunConfig& c) -> int& { return c.domain.nt; });
    add("domain", "nx", [](RunConfig& c) -> int& { return c.domain.nx; });

    add("sim", "model", [](RunConfig& c) -> std::string& {
        static thread_local std::string tmp;
        tmp = c.sim.model == Model::Lwr ? "lwr" : "arz";
        return tmp;
    });
    add("sim", "rho_max", [](RunConfig& c) -> double& { return c.sim.rho_max; });
    add("sim", "u_max", [](RunConfig& c) -> double& { return c.sim.u_max; });
    add("sim", "eps", [](RunConfig& c) -> double& { return c.sim.eps; });
    add("sim", "tau", [](RunConfig& c) -> double& { return c.sim.tau; });
    add("sim", "cfl", [](RunConfig& c) -> double& { return c.sim.cfl; });

    add("sampling", "loops", [](RunConfig& c) -> int& { return c.sampling.loops; });
    add("sampling", "n_aux", [](RunConfig& c) -> std::int64_t& { return c.sampling.n_aux; });
    add("sampling", "n_boundary", [](RunConfig& c) -> int& { return c.sampling.n_boundary; });
    add("sampling", "seed_aux", [](RunConfig& c) -> std::uint64_t& { return c.sampling.seed_aux; });
    add("sampling", "seed_boundary",
        [](RunConfig& c) -> std::uint64_t& { return c.sampling.seed_boundary; });

    add("physics", "variant", [](RunConfig& c) -> std::string& { return c.physics.variant; });
    add("physics", "punn_hidden_layers",
        [](RunConfig& c) -> int& { return c.physics.punn_hidden_layers; });
    add("physics", "punn_hidden_width",
        [](RunConfig& c) -> int& { return c.physics.punn_hidden_width; });
    add("physics", "fdl_hidden_layers",
        [](RunConfig& c) -> int& { return c.physics.fdl_hidden_layers; });
    add("physics", "fdl_hidden_width",
        [](RunConfig& c) -> int& { return c.physics.fdl_hidden_width; });
    add("physics", "learn", [](RunConfig& c) -> std::string& { return c.physics.learn; });
    add("physics", "eps_init", [](RunConfig& c) -> double& { return c.physics.eps_init; });
    add("physics", "tau_init", [](RunConfig& c) -> double& { return c.physics.tau_init; });
    add("physics", "rho_max_init", [](RunConfig& c) -> double& { return c.physics.rho_max_init; });
    add("physics", "u_max_init", [](RunConfig& c) -> double& { return c.physics.u_max_init; });
    add("physics", "learned_pressure",
        [](RunConfig& c) -> bool& { return c.physics.learned_pressure; });
    add("physics", "rho_floor", [](RunConfig& c) -> double& { return c.physics.rho_floor; });
    add("physics", "u_cap", [](RunConfig& c) -> double& { return c.physics.u_cap; });

    add("weights", "alpha", [](RunConfig& c) -> double& { return c.weights.alpha; });
    add("weights", "beta", [](RunConfig& c) -> double& { return c.weights.beta; });
    add("weights", "gamma", [](RunConfig& c) -> double& { return c.weights.gamma; });
    add("weights", "eta", [](RunConfig& c) -> double& { return c.weights.eta; });
    add("weights", "alpha1", [](RunConfig& c) -> double& { return c.weights.alpha1; });
    add("weights", "alpha2", [](RunConfig& c) -> double& { return c.weights.alpha2; });
    add("weights", "beta1", [](RunConfig& c) -> double& { return c.weights.beta1; });
    add("weights", "beta2", [](RunConfig& c) -> double& { return c.weights.beta2; });
    add("weights", "gamma1", [](RunConfig& c) -> double& { return c.weights.gamma1; });
    add("weights", "gamma2", [](RunConfig& c) -> double& { return c.weights.gamma2; });
    add("weights", "xi", [](RunConfig& c) -> double& { return c.weights.xi; });

    add("reg", "a", [](RunConfig& c) -> double& { return c.reg.a; });
    add("reg", "b", [](RunConfig& c) -> double& { return c.reg.b; });
    add("reg", "n_quad", [](RunConfig& c) -> int& { return c.reg.n_quad; });

    add("train", "adam_steps", [](RunConfig& c) -> int& { return c.train.adam_steps; });
    add("train", "adam_lr", [](RunConfig& c) -> double& { return c.train.adam_lr; });
    add("train", "adam_beta1", [](RunConfig& c) -> double& { return c.train.adam_beta1; });
    add("train", "adam_beta2", [](RunConfig& c) -> double& { return c.train.adam_beta2; });
    add("train", "adam_eps_hat", [](RunConfig& c) -> double& { return c.train.adam_eps_hat; });
    add("train", "lbfgs_memory", [](RunConfig& c) -> int& { return c.train.lbfgs_memory; });
    add("train", "lbfgs_max_iters", [](RunConfig& c) -> int& { return c.train.lbfgs_max_iters; });
    add("train", "lbfgs_tol", [](RunConfig& c) -> double& { return c.train.lbfgs_tol; });
    add("train", "strict_tol", [](RunConfig& c) -> bool& { return c.train.strict_tol; });
    add("train", "seed", [](RunConfig& c) -> std::uint64_t& { return c.train.seed; });
    add("train", "checkpoint_interval",
        [](RunConfig& c) -> int& { return c.train.checkpoint_interval; });

    add("io", "out_dir", [](RunConfig& c) -> std::string& { return c.io.out_dir; });
    add("io", "log_every", [](RunConfig& c) -> int& { return c.io.log_every; });
    add("io", "chunk", [](RunConfig& c) -> int& { return c.io.chunk; });
    return s;
}

void set_model_from_text(RunConfig& cfg, const std::string& raw) {
    if (raw == "lwr") cfg.sim.model = Model::Lwr;
    else if (raw == "arz") cfg.sim.model = Model::Arz;
    else throw ConfigError("sim.model must be lwr or arz, got '" + raw + "'");
}

} // namespace

RunConfig default_lwr_run() {
    RunConfig cfg;
    cfg.domain = {3.0, 1.0, 480, 120};
    cfg.sim.model = Model::Lwr;
    cfg.sim.rho_max = 1.0;
    cfg.sim.u_max = 1.0;
    cfg.sim.eps = 0.005;
    cfg.sim.domain = cfg.domain;
    cfg.sampling = {5, 20000, 300, 1, 2};
    cfg.physics.variant = "lwr-fdl";
    cfg.weights.alpha = 100.0;
    cfg.weights.beta = 50.0;
    cfg.weights.gamma = 100.0;
    cfg.weights.eta = 100.0;
    cfg.weights.xi = 0.0;
    cfg.train.adam_steps = 1200;
    cfg.train.adam_lr = 1e-3;
    cfg.train.lbfgs_max_iters = 1500;
    cfg.io.chunk = 256;
    return cfg;
}

RunConfig default_arz_run() {
    RunConfig cfg = default_lwr_run();
    cfg.sim.model = Model::Arz;
    cfg.sim.rho_max = 1.13;
    cfg.sim.u_max = 1.02;
    cfg.sim.tau = 0.02;
    cfg.sampling.loops = 4;
    cfg.physics.variant = "arz-fdl";
    cfg.weights.alpha1 = 100.0;
    cfg.weights.alpha2 = 100.0;
    cfg.weights.beta1 = 50.0;
    cfg.weights.beta2 = 50.0;
    cfg.weights.gamma1 = 100.0;
    cfg.weights.gamma2 = 100.0;
    return cfg;
}

PhysicsSpec PhysicsConfig::to_spec() const {
    PhysicsSpec spec = PhysicsSpec::make_default(variant_from_name(variant));
    spec.punn.widths.assign(1, 2);
    for (int i = 0; i < punn_hidden_layers; ++i) spec.punn.widths.push_back(punn_hidden_width);
    spec.punn.widths.push_back(spec.is_arz() ? 2 : 1);
    spec.fdl.widths.assign(1, 1);
    for (int i = 0; i < fdl_hidden_layers; ++i) spec.fdl.widths.push_back(fdl_hidden_width);
    spec.fdl.widths.push_back(1);
    if (!learn.empty()) {
        spec.learnable.clear();
        std::istringstream in(learn);
        std::string item;
        while (std::getline(in, item, ',')) {
            item.erase(std::remove_if(item.begin(), item.end(), ::isspace), item.end());
            if (!item.empty() && item != "none") spec.learnable.push_back(item);
        }
    }
    spec.eps = eps_init;
    spec.tau = tau_init;
    spec.rho_max = rho_max_init;
    spec.u_max = u_max_init;
    spec.learned_pressure = learned_pressure;
    spec.rho_floor = rho_floor;
    spec.u_cap = u_cap;
    spec.validate();
    return spec;
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    RunConfig cfg;
    const auto schema = config_schema();
    std::istringstream in(text);
    std::string line, section;
    std::vector<std::string> unknown;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(lineno) + ": malformed section header");
            section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        const auto it = std::find_if(schema.begin(), schema.end(), [&](const Binding& b) {
            return b.section == section && b.key == key;
        });
        if (it == schema.end()) {
            unknown.push_back(section.empty() ? key : section + "." + key);
            continue;
        }
        if (it->section == "sim" && it->key == "model") set_model_from_text(cfg, value);
        else it->set(cfg, value);
    }
    if (!unknown.empty()) {
        std::string msg = origin + ": unknown config keys:";
        for (const auto& k : unknown) msg += " " + k;
        throw ConfigError(msg);
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), path);
}

std::string config_to_text(const RunConfig& cfg) {
    const auto schema = config_schema();
    std::ostringstream out;
    std::string section;
    for (const auto& b : schema) {
        if (b.section != section) {
            if (!section.empty()) out << "\n";
            section = b.section;
            out << "[" << section << "]\n";
        }
        out << b.key << " = " << b.get(cfg) << "\n";
    }
    return out.str();
}

void save_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write config file " + path);
    out << config_to_text(cfg);
}

std::string config_hash(const RunConfig& cfg) {
    const std::string text = config_to_text(cfg);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_field_csv(const std::string& path, const GridField& field) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write field file " + path);
    const bool with_u = field.has_u();
    out << (with_u ? "t_index,x_index,rho,u\n" : "t_index,x_index,rho\n");
    for (int i = 0; i < field.nt; ++i)
        for (int j = 0; j < field.nx; ++j) {
            out << i << ',' << j << ',' << fmt_double(field.rho_at(i, j));
            if (with_u) out << ',' << fmt_double(field.u_at(i, j));
            out << '\n';
        }
}

GridField read_field_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read field file " + path);
    std::string header;
    if (!std::getline(in, header)) throw ConfigError(path + ": empty field file");
    bool with_u;
    if (header == "t_index,x_index,rho,u") with_u = true;
    else if (header == "t_index,x_index,rho") with_u = false;
    else throw ConfigError(path + ": unrecognized field header '" + header + "'");

    struct Row {
        int i, j;
        double rho, u;
    };
    std::vector<Row> rows;
    std::string line;
    int lineno = 1;
    int max_i = -1, max_j = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        Row r{};
        char extra;
        const int want = with_u ? 4 : 3;
        const int got = with_u
                            ? std::sscanf(line.c_str(), "%d,%d,%lf,%lf %c", &r.i, &r.j, &r.rho, &r.u, &extra)
                            : std::sscanf(line.c_str(), "%d,%d,%lf %c", &r.i, &r.j, &r.rho, &extra);
        if (got != want || r.i < 0 || r.j < 0)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed field row");
        max_i = std::max(max_i, r.i);
        max_j = std::max(max_j, r.j);
        rows.push_back(r);
    }
    if (rows.empty()) throw ConfigError(path + ": field file has no data rows");
    GridField f(max_i + 1, max_j + 1, with_u);
    std::vector<std::uint8_t> seen(rows.size() ? f.rho.size() : 0, 0);
    for (const Row& r : rows) {
        f.rho_at(r.i, r.j) = r.rho;
        if (with_u) f.u_at(r.i, r.j) = r.u;
        seen[f.idx(r.i, r.j)] = 1;
    }
    for (std::size_t k = 0; k < seen.size(); ++k)
        if (!seen[k]) throw ConfigError(path + ": field grid is incomplete");
    return f;
}

void write_field_meta(const std::string& path, const Domain& domain, const SimConfig& sim,
                      const std::string& cfg_hash) {
    nlohmann::json j;
    j["domain"] = {{"T", domain.T}, {"L", domain.L}, {"nt", domain.nt}, {"nx", domain.nx}};
    j["sim"] = {{"model", sim.model == Model::Lwr ? "lwr" : "arz"},
                {"rho_max", sim.rho_max},
                {"u_max", sim.u_max},
                {"eps", sim.eps},
                {"tau", sim.tau},
                {"cfl", sim.cfl}};
    j["config_hash"] = cfg_hash;
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write field metadata " + path);
    out << j.dump(2) << "\n";
}

FieldMeta read_field_meta(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read field metadata " + path);
    nlohmann::json j;
    in >> j;
    FieldMeta m;
    m.domain.T = j["domain"]["T"];
    m.domain.L = j["domain"]["L"];
    m.domain.nt = j["domain"]["nt"];
    m.domain.nx = j["domain"]["nx"];
    const std::string model = j["sim"]["model"];
    m.sim.model = model == "arz" ? Model::Arz : Model::Lwr;
    m.sim.rho_max = j["sim"]["rho_max"];
    m.sim.u_max = j["sim"]["u_max"];
    m.sim.eps = j["sim"]["eps"];
    m.sim.tau = j["sim"]["tau"];
    m.sim.cfl = j["sim"]["cfl"];
    m.sim.domain = m.domain;
    m.cfg_hash = j.value("config_hash", "");
    return m;
}

void write_points_csv(const std::string& path, std::span<const Point> pts,
                      std::span<const StateSample> targets) {
    if (!targets.empty() && targets.size() != pts.size())
        throw ConfigError("targets must align with points");
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write points file " + path);
    const bool with_t = !targets.empty();
    const bool with_u = with_t && targets[0].has_u;
    out << "t,x";
    if (with_t) out << ",rho";
    if (with_u) out << ",u";
    out << "\n";
    for (std::size_t k = 0; k < pts.size(); ++k) {
        out << fmt_double(pts[k].t) << ',' << fmt_double(pts[k].x);
        if (with_t) out << ',' << fmt_double(targets[k].rho);
        if (with_u) out << ',' << fmt_double(targets[k].u);
        out << '\n';
    }
}

CellDataset ingest_cells(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read cell file " + path);
    std::string header;
    if (!std::getline(in, header) || header != "t_index,x_index,rho,u")
        throw ConfigError(path + ": expected header t_index,x_index,rho,u");
    struct Row {
        int i, j;
        double rho, u;
    };
    std::vector<Row> rows;
    std::string line;
    int lineno = 1, max_i = -1, max_j = -1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        Row r{};
        char extra;
        if (std::sscanf(line.c_str(), "%d,%d,%lf,%lf %c", &r.i, &r.j, &r.rho, &r.u, &extra) != 4 ||
            r.i < 0 || r.j < 0)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": malformed cell row");
        if (!(r.rho >= 0.0) || !(r.u >= 0.0) || !std::isfinite(r.rho) || !std::isfinite(r.u))
            throw ConfigError(path + ":" + std::to_string(lineno) +
                              ": cell values must be finite and non-negative");
        max_i = std::max(max_i, r.i);
        max_j = std::max(max_j, r.j);
        rows.push_back(r);
    }
    if (rows.empty()) throw ConfigError(path + ": no cell rows");
    CellDataset cells;
    cells.nt = max_i + 1;
    cells.nx = max_j + 1;
    cells.rho.assign(static_cast<std::size_t>(cells.nt) * cells.nx, 0.0);
    cells.u.assign(cells.rho.size(), 0.0);
    cells.valid.assign(cells.rho.size(), 0);
    for (const Row& r : rows) {
        cells.rho[cells.idx(r.i, r.j)] = r.rho;
        cells.u[cells.idx(r.i, r.j)] = r.u;
        cells.valid[cells.idx(r.i, r.j)] = 1;
    }
    for (std::uint8_t v : cells.valid)
        if (!v) ++cells.n_missing;
    if (cells.n_missing * 20 > cells.valid.size())
        std::cerr << "warning: " << path << ": " << cells.n_missing << " of " << cells.valid.size()
                  << " cells missing (masked)\n";
    return cells;
}

void write_cells_csv(const std::string& path, const CellDataset& cells) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write cell file " + path);
    out << "t_index,x_index,rho,u\n";
    for (int i = 0; i < cells.nt; ++i)
        for (int j = 0; j < cells.nx; ++j)
            if (cells.valid[cells.idx(i, j)])
                out << i << ',' << j << ',' << fmt_double(cells.rho[cells.idx(i, j)]) << ','
                    << fmt_double(cells.u[cells.idx(i, j)]) << '\n';
}

std::pair<GridField, Scales> nondimensionalize(const CellDataset& cells) {
    double max_rho = 0.0, max_u = 0.0;
    for (std::size_t k = 0; k < cells.rho.size(); ++k)
        if (cells.valid[k]) {
            max_rho = std::max(max_rho, cells.rho[k]);
            max_u = std::max(max_u, cells.u[k]);
        }
    if (max_rho == 0.0 || max_u == 0.0)
        throw ConfigError("cell dataset is degenerate (all-zero density or speed)");
    Scales s;
    s.rho = 1.1 * max_rho;
    s.u = 1.1 * max_u;
    s.t = cells.nt * cells.cell_dt_s;
    s.x = cells.nx * cells.cell_dx_m;
    GridField f(cells.nt, cells.nx, true);
    for (std::size_t k = 0; k < cells.rho.size(); ++k) {
        f.rho[k] = cells.rho[k] / s.rho;
        f.u[k] = cells.u[k] / s.u;
    }
    return {std::move(f), s};
}

GridField dimensionalize(const GridField& field, const Scales& scales) {
    GridField out = field;
    for (double& v : out.rho) v *= scales.rho;
    for (double& v : out.u) v *= scales.u;
    return out;
}

namespace {

nlohmann::json breakdown_to_json(const LossBreakdown& b) {
    return {{"total", b.total}, {"mse_o", b.mse_o},   {"mse_o_u", b.mse_o_u},
            {"mse_a", b.mse_a}, {"mse_a2", b.mse_a2}, {"b1", b.b1},
            {"b1_u", b.b1_u},   {"b2", b.b2},         {"reg", b.reg}};
}

LossBreakdown breakdown_from_json(const nlohmann::json& j) {
    LossBreakdown b;
    b.total = j["total"];
    b.mse_o = j["mse_o"];
    b.mse_o_u = j["mse_o_u"];
    b.mse_a = j["mse_a"];
    b.mse_a2 = j["mse_a2"];
    b.b1 = j["b1"];
    b.b1_u = j["b1_u"];
    b.b2 = j["b2"];
    b.reg = j["reg"];
    return b;
}

} // namespace

std::string train_report_to_json(const TrainReport& r) {
    nlohmann::json j;
    j["initial_loss"] = r.initial_loss;
    j["final_loss"] = r.final_loss;
    j["final_parts"] = breakdown_to_json(r.final_parts);
    j["learned_scalars"] = r.learned_scalars;
    j["adam_steps"] = r.adam_steps;
    j["lbfgs_iterations"] = r.lbfgs_iterations;
    j["lbfgs_termination"] = r.lbfgs_termination;
    j["wall_seconds"] = r.wall_seconds;
    j["seed"] = r.seed;
    return j.dump(2);
}

TrainReport train_report_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    TrainReport r;
    r.initial_loss = j["initial_loss"];
    r.final_loss = j["final_loss"];
    r.final_parts = breakdown_from_json(j["final_parts"]);
    r.learned_scalars = j["learned_scalars"].get<std::map<std::string, double>>();
    r.adam_steps = j["adam_steps"];
    r.lbfgs_iterations = j["lbfgs_iterations"];
    r.lbfgs_termination = j["lbfgs_termination"];
    r.wall_seconds = j["wall_seconds"];
    r.seed = j["seed"];
    return r;
}

std::string estimation_report_to_json(const EstimationReport& r, const Scales* scales) {
    nlohmann::json j;
    j["variant"] = r.variant;
    j["err_rho"] = r.err_rho;
    j["err_u"] = r.err_u;
    j["learned_scalars"] = r.learned_scalars;
    j["loops"] = r.loops;
    j["seed"] = r.seed;
    j["train_seconds"] = r.train_seconds;
    j["final_loss"] = r.final_loss;
    j["config_hash"] = r.config_hash;
    j["fd_curve"] = {{"rho", r.fd_curve.rho},
                     {"value", r.fd_curve.value},
                     {"ueq", r.fd_curve.ueq},
                     {"velocity_form", r.fd_curve.velocity_form},
                     {"anchor_offset", r.fd_curve.anchor_offset}};
    if (scales)
        j["scales"] = {{"rho", scales->rho}, {"u", scales->u}, {"t", scales->t}, {"x", scales->x}};
    return j.dump(2);
}

} // namespace tse
