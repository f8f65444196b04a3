#include "tse/grid.hpp"

#include <cmath>
#include <sstream>

#include "tse/errors.hpp"
#include "tse/rng.hpp"

namespace tse {

void Domain::validate() const {
    std::ostringstream bad;
    if (!(T > 0.0)) bad << " T=" << T;
    if (!(L > 0.0)) bad << " L=" << L;
    if (nt < 2) bad << " nt=" << nt;
    if (nx < 2) bad << " nx=" << nx;
    if (!bad.str().empty()) throw ConfigError("invalid domain:" + bad.str());
}

std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t k, Rng& rng) {
    std::vector<std::int64_t> pool(n);
    for (std::int64_t i = 0; i < n; ++i) pool[i] = i;
    for (std::int64_t i = 0; i < k; ++i) {
        const std::int64_t j = i + static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

std::vector<Point> build_grid(const Domain& domain) {
    domain.validate();
    std::vector<Point> grid;
    grid.reserve(static_cast<std::size_t>(domain.n_grid()));
    for (int i = 0; i < domain.nt; ++i)
        for (int j = 0; j < domain.nx; ++j)
            grid.push_back({domain.t(i), domain.x(j)});
    return grid;
}

std::vector<int> loop_columns(int loops, int nx) {
    if (loops < 1 || loops > nx) {
        std::ostringstream msg;
        msg << "loops=" << loops << " outside [1, nx=" << nx << "]";
        throw ConfigError(msg.str());
    }
    std::vector<int> cols(loops);
    for (int m = 0; m < loops; ++m)
        cols[m] = static_cast<int>(std::lround(static_cast<double>(m) * nx / loops));
    return cols;
}

void sample_loop_observations(const GridField& field, int loops, const Domain& domain,
                              TrainingSets& out, const std::vector<std::uint8_t>* valid) {
    domain.validate();
    if (field.nt != domain.nt || field.nx != domain.nx)
        throw ConfigError("field dimensions do not match domain");
    const std::vector<int> cols = loop_columns(loops, domain.nx);
    out.observations.clear();
    out.targets.clear();
    out.observation_idx.clear();
    out.observations.reserve(static_cast<std::size_t>(loops) * domain.nt);
    for (int i = 0; i < domain.nt; ++i) {
        for (int j : cols) {
            if (valid && !(*valid)[field.idx(i, j)]) continue;
            out.observations.push_back({domain.t(i), domain.x(j)});
            StateSample s;
            s.rho = field.rho_at(i, j);
            if (field.has_u()) {
                s.u = field.u_at(i, j);
                s.has_u = true;
            }
            out.targets.push_back(s);
            out.observation_idx.emplace_back(i, j);
        }
    }
}

std::vector<Point> sample_auxiliary(const Domain& domain, std::int64_t n_aux, std::uint64_t seed) {
    domain.validate();
    if (n_aux < 0 || n_aux > domain.n_grid()) {
        std::ostringstream msg;
        msg << "n_aux=" << n_aux << " exceeds grid size " << domain.n_grid();
        throw ConfigError(msg.str());
    }
    Rng rng(seed);
    const std::vector<std::int64_t> flat = sample_without_replacement(domain.n_grid(), n_aux, rng);
    std::vector<Point> pts(flat.size());
    for (std::size_t k = 0; k < flat.size(); ++k) {
        const int i = static_cast<int>(flat[k] / domain.nx);
        const int j = static_cast<int>(flat[k] % domain.nx);
        pts[k] = {domain.t(i), domain.x(j)};
    }
    return pts;
}

std::vector<double> sample_boundary(const Domain& domain, int n_boundary, std::uint64_t seed) {
    domain.validate();
    if (n_boundary < 0 || n_boundary > domain.nt) {
        std::ostringstream msg;
        msg << "n_boundary=" << n_boundary << " exceeds grid time count " << domain.nt;
        throw ConfigError(msg.str());
    }
    Rng rng(seed);
    const std::vector<std::int64_t> rows = sample_without_replacement(domain.nt, n_boundary, rng);
    std::vector<double> times(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) times[k] = domain.t(static_cast<int>(rows[k]));
    return times;
}

} // namespace tse
