#include "feop/datasets.hpp"

#include <cmath>

#include "feop/errors.hpp"

namespace feop::data {

namespace {

Tensor linspace_col(double lo, double hi, std::size_t n) {
    Tensor t({n, 1});
    if (n == 1) {
        t.at(0, 0) = lo;
        return t;
    }
    for (std::size_t i = 0; i < n; ++i)
        t.at(i, 0) = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    return t;
}

Tensor uniform_col(Rng& rng, double lo, double hi, std::size_t n) {
    Tensor t({n, 1});
    for (std::size_t i = 0; i < n; ++i) t.at(i, 0) = rng.uniform(lo, hi);
    return t;
}

}  // namespace

std::vector<SampleSet> gen_polynomial_batch(PolyTask task, std::size_t batch,
                                            const PolyBatchOptions& opts,
                                            std::uint64_t seed) {
    if (opts.scale <= 0.0) throw ConfigError("gen_polynomial_batch: scale must be > 0");
    const double lo = -10.0, hi = 10.0;
    std::vector<SampleSet> out;
    out.reserve(batch);
    for (std::size_t fn = 0; fn < batch; ++fn) {
        Rng rng(seed + fn);
        double c[4] = {0.0, 0.0, 0.0, 0.0};
        const std::size_t n_coeff = task == PolyTask::Derivative ? 4 : 3;
        for (std::size_t i = 0; i < n_coeff; ++i)
            c[i] = rng.uniform(-opts.scale, opts.scale);

        SampleSet s;
        s.xs = opts.fixed_grid ? linspace_col(lo, hi, opts.m)
                               : uniform_col(rng, lo, hi, opts.m);
        s.ys = opts.fixed_grid ? linspace_col(lo, hi, opts.p)
                               : uniform_col(rng, lo, hi, opts.p);
        s.fs = Tensor({opts.m, 1});
        s.tfs = Tensor({opts.p, 1});
        if (task == PolyTask::Derivative) {
            for (std::size_t i = 0; i < opts.m; ++i) {
                const double x = s.xs.at(i, 0);
                s.fs.at(i, 0) = c[0] + x * (c[1] + x * (c[2] + x * c[3]));
            }
            for (std::size_t i = 0; i < opts.p; ++i) {
                const double y = s.ys.at(i, 0);
                s.tfs.at(i, 0) = c[1] + y * (2.0 * c[2] + y * 3.0 * c[3]);
            }
        } else {
            for (std::size_t i = 0; i < opts.m; ++i) {
                const double x = s.xs.at(i, 0);
                s.fs.at(i, 0) = c[0] + x * (c[1] + x * c[2]);
            }
            // T u (y) = s(0) + int_0^y u = c0 y + c1 y^2/2 + c2 y^3/3.
            for (std::size_t i = 0; i < opts.p; ++i) {
                const double y = s.ys.at(i, 0);
                s.tfs.at(i, 0) = y * (c[0] + y * (c[1] / 2.0 + y * c[2] / 3.0));
            }
        }
        out.push_back(std::move(s));
    }
    return out;
}

Dataset build_polynomial(PolyTask task, std::size_t n_train, std::size_t n_test,
                         const PolyBatchOptions& opts, std::uint64_t seed) {
    Dataset ds;
    ds.train = gen_polynomial_batch(task, n_train, opts, seed);
    // Disjoint seed stream for the held-out functions.
    ds.test = gen_polynomial_batch(task, n_test, opts, seed + 0x80000000ull);
    ds.manifest.name = task == PolyTask::Derivative ? "derivative" : "antiderivative";
    ds.manifest.n_train = n_train;
    ds.manifest.n_test = n_test;
    ds.manifest.m = opts.m;
    ds.manifest.p = opts.p;
    ds.manifest.seed = seed;
    ds.manifest.params = {{"scale", opts.scale},
                          {"fixed_grid", opts.fixed_grid},
                          {"domain", {-10.0, 10.0}}};
    return ds;
}

Dataset build_darcy1d(std::size_t n_train, std::size_t n_test, std::size_t n_grid,
                      std::uint64_t seed) {
    if (n_grid < 3) throw ConfigError("build_darcy1d: grid too small");
    GrfSpec spec;
    spec.grid = linspace_col(0.0, 1.0, n_grid).reshaped({n_grid});
    spec.length_scale = 0.04;
    spec.variance = 1.0;
    spec.kind = CovarianceKind::SquaredExponential;
    GrfSampler sampler(spec);
    const Tensor grid_col = spec.grid.reshaped({n_grid, 1});

    auto make = [&](std::size_t count, std::uint64_t base) {
        std::vector<SampleSet> sets;
        sets.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            Rng rng(base + i);
            Tensor u = sampler.sample(rng);
            Tensor s = solve_darcy_1d(u, spec.grid);
            SampleSet set;
            set.xs = grid_col;
            set.fs = u.reshaped({n_grid, 1});
            set.ys = grid_col;
            set.tfs = s.reshaped({n_grid, 1});
            sets.push_back(std::move(set));
        }
        return sets;
    };

    Dataset ds;
    ds.train = make(n_train, seed);
    ds.test = make(n_test, seed + 0x80000000ull);
    ds.manifest.name = "darcy1d";
    ds.manifest.n_train = n_train;
    ds.manifest.n_test = n_test;
    ds.manifest.m = n_grid;
    ds.manifest.p = n_grid;
    ds.manifest.seed = seed;
    ds.manifest.params = {{"length_scale", 0.04}, {"variance", 1.0},
                          {"kappa", "0.2 + s^2"}, {"domain", {0.0, 1.0}}};
    return ds;
}

Dataset build_heat(std::size_t n_train, std::size_t n_test, std::size_t nx,
                   std::size_t ny, std::size_t nt, std::uint64_t seed) {
    const std::size_t p = nx * ny * nt;
    Tensor xg = linspace_col(0.0, 1.0, nx);
    Tensor yg = linspace_col(0.0, 1.0, ny);
    Tensor tg = linspace_col(0.0, 1.0, nt);

    Tensor ys({p, 3});
    std::size_t row = 0;
    for (std::size_t ix = 0; ix < nx; ++ix)
        for (std::size_t iy = 0; iy < ny; ++iy)
            for (std::size_t it = 0; it < nt; ++it, ++row) {
                ys.at(row, 0) = xg.at(ix, 0);
                ys.at(row, 1) = yg.at(iy, 0);
                ys.at(row, 2) = tg.at(it, 0);
            }

    auto make = [&](std::size_t count, std::uint64_t base) {
        std::vector<SampleSet> sets;
        sets.reserve(count);
        std::vector<double> sx(nx * nt), sy(ny * nt);
        for (std::size_t i = 0; i < count; ++i) {
            Rng rng(base + i);
            const double t0 = rng.uniform(0.0, 1.0);
            const double diffusivity = std::pow(10.0, rng.uniform(-2.0, 0.0));
            SampleSet set;
            set.xs = Tensor({1, 1});
            set.fs = Tensor({1, 2}, {t0, diffusivity});
            set.ys = ys;
            set.tfs = Tensor({p, 1});
            // The series is separable; tabulate the 1D factors per (z, t).
            for (std::size_t ix = 0; ix < nx; ++ix)
                for (std::size_t it = 0; it < nt; ++it)
                    sx[ix * nt + it] =
                        heat_series_factor(xg.at(ix, 0), tg.at(it, 0), diffusivity);
            for (std::size_t iy = 0; iy < ny; ++iy)
                for (std::size_t it = 0; it < nt; ++it)
                    sy[iy * nt + it] =
                        heat_series_factor(yg.at(iy, 0), tg.at(it, 0), diffusivity);
            std::size_t r = 0;
            for (std::size_t ix = 0; ix < nx; ++ix)
                for (std::size_t iy = 0; iy < ny; ++iy)
                    for (std::size_t it = 0; it < nt; ++it, ++r)
                        set.tfs.at(r, 0) = t0 * sx[ix * nt + it] * sy[iy * nt + it];
            sets.push_back(std::move(set));
        }
        return sets;
    };

    Dataset ds;
    ds.train = make(n_train, seed);
    ds.test = make(n_test, seed + 0x80000000ull);
    ds.manifest.name = "heat";
    ds.manifest.n_train = n_train;
    ds.manifest.n_test = n_test;
    ds.manifest.m = 1;
    ds.manifest.p = p;
    ds.manifest.x_dim = 1;
    ds.manifest.y_dim = 3;
    ds.manifest.d_in = 2;
    ds.manifest.d_out = 1;
    ds.manifest.seed = seed;
    ds.manifest.params = {{"grid", {nx, ny, nt}},
                          {"t0_range", {0.0, 1.0}},
                          {"diffusivity_range", {1e-2, 1.0}}};
    return ds;
}

Dataset build_burgers(std::size_t n_train, std::size_t n_test, std::size_t n_xo,
                      std::size_t n_to, double nu, std::uint64_t seed) {
    const std::size_t n_solver = 128;
    Tensor xo = linspace_col(0.0, 1.0, n_xo);
    Tensor to = linspace_col(0.0, 1.0, n_to);
    const Tensor tg = to.reshaped({n_to});
    const std::size_t p = n_xo * n_to;

    Tensor ys({p, 2});
    {
        std::size_t row = 0;
        for (std::size_t ix = 0; ix < n_xo; ++ix)
            for (std::size_t it = 0; it < n_to; ++it, ++row) {
                ys.at(row, 0) = xo.at(ix, 0);
                ys.at(row, 1) = to.at(it, 0);
            }
    }

    auto make = [&](std::size_t count, std::uint64_t base) {
        std::vector<SampleSet> sets;
        sets.reserve(count);
        for (std::size_t i = 0; i < count; ++i) {
            Rng rng(base + i);
            PeriodicField field = sample_periodic_field(n_solver / 2, rng);
            Tensor f0({n_solver});
            for (std::size_t j = 0; j < n_solver; ++j)
                f0[j] = field(static_cast<double>(j) / static_cast<double>(n_solver));
            Tensor sol = solve_burgers(f0, nu, tg);            // [n_solver, n_to]
            Tensor grid_sol = trig_interp_columns(sol, xo.reshaped({n_xo}));  // [n_xo, n_to]

            SampleSet set;
            set.xs = xo;
            set.fs = Tensor({n_xo, 1});
            for (std::size_t j = 0; j < n_xo; ++j)
                set.fs.at(j, 0) = field(xo.at(j, 0));
            set.ys = ys;
            set.tfs = Tensor({p, 1});
            std::size_t row = 0;
            for (std::size_t ix = 0; ix < n_xo; ++ix)
                for (std::size_t it = 0; it < n_to; ++it, ++row)
                    set.tfs.at(row, 0) = grid_sol.at(ix, it);
            sets.push_back(std::move(set));
        }
        return sets;
    };

    Dataset ds;
    ds.train = make(n_train, seed);
    ds.test = make(n_test, seed + 0x80000000ull);
    ds.manifest.name = "burgers";
    ds.manifest.n_train = n_train;
    ds.manifest.n_test = n_test;
    ds.manifest.m = n_xo;
    ds.manifest.p = p;
    ds.manifest.x_dim = 1;
    ds.manifest.y_dim = 2;
    ds.manifest.seed = seed;
    ds.manifest.params = {{"nu", nu},
                          {"solver_grid", n_solver},
                          {"output_grid", {n_xo, n_to}}};
    return ds;
}

Dataset build_dataset(const std::string& name, const nlohmann::json& overrides,
                      std::uint64_t seed) {
    auto geti = [&](const char* key, std::size_t fallback) -> std::size_t {
        return overrides.contains(key) ? overrides.at(key).get<std::size_t>() : fallback;
    };
    auto getd = [&](const char* key, double fallback) -> double {
        return overrides.contains(key) ? overrides.at(key).get<double>() : fallback;
    };
    auto getb = [&](const char* key, bool fallback) -> bool {
        return overrides.contains(key) ? overrides.at(key).get<bool>() : fallback;
    };

    if (name == "derivative" || name == "antiderivative") {
        PolyBatchOptions opts;
        opts.m = geti("m", 100);
        opts.p = geti("p", 100);
        opts.scale = getd("scale", 3.0);
        opts.fixed_grid = getb("fixed_grid", true);
        const PolyTask task =
            name == "derivative" ? PolyTask::Derivative : PolyTask::AntiDerivative;
        return build_polynomial(task, geti("n_train", 1000), geti("n_test", 200), opts,
                                seed);
    }
    if (name == "darcy1d")
        return build_darcy1d(geti("n_train", 800), geti("n_test", 200), geti("m", 40),
                             seed);
    if (name == "heat")
        return build_heat(geti("n_train", 250), geti("n_test", 30), geti("nx", 32),
                          geti("ny", 32), geti("nt", 16), seed);
    if (name == "burgers")
        return build_burgers(geti("n_train", 200), geti("n_test", 50), geti("n_xo", 101),
                             geti("n_to", 101), getd("nu", 0.1), seed);
    throw ConfigError("build_dataset: unknown dataset '" + name + "'");
}

}  // namespace feop::data
