#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "tse/errors.hpp"
#include "tse/io.hpp"

using namespace tse;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& name) : path("tmp_io_" + name) {}
    ~TempFile() { std::remove(path.c_str()); }
};

} // namespace

TEST_CASE("config: empty text yields documented defaults") {
    RunConfig cfg = parse_config_text("");
    CHECK(cfg.domain.nt == 480);
    CHECK(cfg.sampling.n_aux == 100000);
    CHECK(cfg.weights.alpha == 100.0);
    CHECK(cfg.train.adam_steps == 20000);
    CHECK(cfg.physics.variant == "lwr-fdl");
}

TEST_CASE("config: unknown keys are rejected by name") {
    try {
        parse_config_text("[domain]\nnt = 10\nbogus_key = 3\n");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("domain.bogus_key") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text("[nosuch]\nx = 1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("[domain]\nnt = notanint\n"), ConfigError);
}

TEST_CASE("config: save/load round-trip is idempotent") {
    RunConfig cfg = parse_config_text("[domain]\nnt = 96\nnx = 24\n[weights]\nbeta = 7.5\n");
    const std::string text = config_to_text(cfg);
    RunConfig again = parse_config_text(text);
    CHECK(config_to_text(again) == text);
    CHECK(config_hash(again) == config_hash(cfg));

    RunConfig other = parse_config_text("[domain]\nnt = 97\n");
    CHECK(config_hash(other) != config_hash(cfg));
}

TEST_CASE("config: physics spec construction honors sizes and learn list") {
    RunConfig cfg = parse_config_text(
        "[physics]\nvariant = arz-fdl\npunn_hidden_layers = 3\npunn_hidden_width = 7\n"
        "learn = tau\ntau_init = 0.25\n");
    PhysicsSpec spec = cfg.physics.to_spec();
    CHECK(spec.variant == Variant::ArzFdl);
    CHECK(spec.punn.widths == std::vector<int>{2, 7, 7, 7, 2});
    CHECK(spec.learnable == std::vector<std::string>{"tau"});
    CHECK(spec.tau == 0.25);
}

TEST_CASE("field csv round-trips exactly") {
    TempFile f("field.csv");
    GridField field(3, 4, true);
    for (std::size_t k = 0; k < field.rho.size(); ++k) {
        field.rho[k] = 0.1 * static_cast<double>(k) + 1.0 / 3.0;
        field.u[k] = 0.05 * static_cast<double>(k) - 1.0 / 7.0;
    }
    write_field_csv(f.path, field);
    GridField back = read_field_csv(f.path);
    CHECK(back.nt == 3);
    CHECK(back.nx == 4);
    CHECK(back.rho == field.rho);
    CHECK(back.u == field.u);
}

TEST_CASE("field csv rejects malformed and incomplete data") {
    TempFile f("bad_field.csv");
    {
        std::ofstream out(f.path);
        out << "t_index,x_index,rho\n0,0,0.5\n0,1,oops\n";
    }
    try {
        read_field_csv(f.path);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos); // line number
    }
    {
        std::ofstream out(f.path);
        out << "t_index,x_index,rho\n0,0,0.5\n1,1,0.25\n"; // holes at (0,1),(1,0)
    }
    CHECK_THROWS_AS(read_field_csv(f.path), ConfigError);
}

TEST_CASE("field metadata sidecar round-trips") {
    TempFile f("meta.json");
    Domain d{3.0, 1.0, 96, 24};
    SimConfig sim;
    sim.model = Model::Arz;
    sim.rho_max = 1.13;
    sim.u_max = 1.02;
    sim.tau = 0.02;
    sim.domain = d;
    write_field_meta(f.path, d, sim, "deadbeef00000000");
    FieldMeta m = read_field_meta(f.path);
    CHECK(m.domain.nt == 96);
    CHECK(m.sim.model == Model::Arz);
    CHECK(m.sim.rho_max == 1.13);
    CHECK(m.cfg_hash == "deadbeef00000000");
}

TEST_CASE("cell ingestion: full grid round-trips, holes are masked") {
    TempFile f("cells.csv");
    CellDataset cells;
    cells.nt = 4;
    cells.nx = 3;
    cells.rho.assign(12, 0.0);
    cells.u.assign(12, 0.0);
    cells.valid.assign(12, 1);
    for (int k = 0; k < 12; ++k) {
        cells.rho[k] = 0.01 * k + 0.2;
        cells.u[k] = 0.5 * k + 1.0;
    }
    write_cells_csv(f.path, cells);
    CellDataset back = ingest_cells(f.path);
    CHECK(back.nt == 4);
    CHECK(back.nx == 3);
    CHECK(back.n_missing == 0u);
    CHECK(back.rho == cells.rho);
    CHECK(back.u == cells.u);

    cells.valid[5] = 0; // drop one cell
    write_cells_csv(f.path, cells);
    CellDataset holey = ingest_cells(f.path);
    CHECK(holey.n_missing == 1u);
    CHECK(holey.valid[5] == 0);
}

TEST_CASE("cell ingestion rejects negative density naming the line") {
    TempFile f("neg.csv");
    {
        std::ofstream out(f.path);
        out << "t_index,x_index,rho,u\n0,0,0.5,1.0\n0,1,-0.25,1.0\n";
    }
    try {
        ingest_cells(f.path);
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find(":3") != std::string::npos);
    }
}

TEST_CASE("nondimensionalize scales and inverts") {
    CellDataset cells;
    cells.nt = 2;
    cells.nx = 2;
    cells.rho = {0.1, 0.4, 0.2, 1.0};
    cells.u = {2.0, 1.0, 0.5, 4.0};
    cells.valid.assign(4, 1);
    auto [field, scales] = nondimensionalize(cells);
    CHECK(scales.rho == doctest::Approx(1.1).epsilon(1e-15));
    CHECK(scales.u == doctest::Approx(4.4).epsilon(1e-15));
    CHECK(scales.t == doctest::Approx(2 * 1.5).epsilon(1e-15));
    CHECK(scales.x == doctest::Approx(2 * 30.0).epsilon(1e-15));
    for (double v : field.rho) CHECK(v <= 1.0);
    GridField back = dimensionalize(field, scales);
    for (std::size_t k = 0; k < back.rho.size(); ++k) {
        CHECK(back.rho[k] == doctest::Approx(cells.rho[k]).epsilon(1e-12));
        CHECK(back.u[k] == doctest::Approx(cells.u[k]).epsilon(1e-12));
    }

    CellDataset zero = cells;
    zero.rho.assign(4, 0.0);
    CHECK_THROWS_AS(nondimensionalize(zero), ConfigError);
}

TEST_CASE("train report json round-trips unchanged") {
    TrainReport r;
    r.initial_loss = 12.5;
    r.final_loss = 1.0 / 3.0;
    r.final_parts.total = 1.0 / 3.0;
    r.final_parts.mse_o = 0.1;
    r.final_parts.mse_a = 0.2;
    r.learned_scalars = {{"eps", 0.00495}, {"tau", 0.019654}};
    r.adam_steps = 2000;
    r.lbfgs_iterations = 517;
    r.lbfgs_termination = "tol";
    r.wall_seconds = 123.25;
    r.seed = 42;
    TrainReport back = train_report_from_json(train_report_to_json(r));
    CHECK(back.initial_loss == r.initial_loss);
    CHECK(back.final_loss == r.final_loss);
    CHECK(back.final_parts.mse_o == r.final_parts.mse_o);
    CHECK(back.learned_scalars == r.learned_scalars);
    CHECK(back.adam_steps == r.adam_steps);
    CHECK(back.lbfgs_iterations == r.lbfgs_iterations);
    CHECK(back.lbfgs_termination == r.lbfgs_termination);
    CHECK(back.wall_seconds == r.wall_seconds);
    CHECK(back.seed == r.seed);
}

TEST_CASE("points csv audit export") {
    TempFile f("points.csv");
    std::vector<Point> pts = {{0.5, 0.25}, {1.0, 0.75}};
    std::vector<StateSample> tgt = {{0.9, 0.5, true}, {0.1, 0.2, true}};
    write_points_csv(f.path, pts, tgt);
    std::ifstream in(f.path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,x,rho,u");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);
}
