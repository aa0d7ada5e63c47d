#include "feop/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "feop/errors.hpp"
#include "feop/linalg.hpp"

namespace feop {

namespace {

double function_mse(const Tensor& pred, const Tensor& truth) {
    double s = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - truth[i];
        s += d * d;
    }
    return s / static_cast<double>(pred.size());
}

std::string fmt_double(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

MetricsRecord evaluate(const Predictor& model, const std::vector<SampleSet>& test_sets,
                       const std::string& model_id, const std::string& dataset_id,
                       std::uint64_t seed, std::size_t step) {
    if (test_sets.empty()) throw ConfigError("evaluate: empty test set");
    MetricsRecord rec;
    rec.model_id = model_id;
    rec.dataset_id = dataset_id;
    rec.seed = seed;
    rec.step = step;
    double total = 0.0;
    for (std::size_t n = 0; n < test_sets.size(); ++n) {
        const SampleSet& s = test_sets[n];
        Tensor pred = model(s.xs, s.fs, s.ys);
        const double mse = function_mse(pred, s.tfs);
        total += mse;
        if (n == 0 || mse > rec.worst_mse) {
            rec.worst_mse = mse;
            rec.worst_index = n;
        }
    }
    rec.mse = total / static_cast<double>(test_sets.size());
    return rec;
}

RobustnessReport robustness_suite(const Predictor& model, data::PolyTask task,
                                  std::uint64_t seed, std::size_t n_trials,
                                  const data::PolyBatchOptions& opts) {
    RobustnessReport rep;

    // OOD: same polynomial family, coefficients 10x larger.
    data::PolyBatchOptions ood = opts;
    ood.scale = opts.scale * 10.0;
    const std::vector<SampleSet> ood_sets =
        data::gen_polynomial_batch(task, n_trials, ood, seed + 0x0dd);
    double ood_total = 0.0;
    for (const SampleSet& s : ood_sets)
        ood_total += function_mse(model(s.xs, s.fs, s.ys), s.tfs);
    rep.ood_mse = ood_total / static_cast<double>(n_trials);

    // Linearity / homogeneity on shared grids.
    data::PolyBatchOptions shared = opts;
    shared.fixed_grid = true;
    Rng coef(seed + 0xab);
    double lin_num = 0.0, lin_den = 0.0, hom_num = 0.0, hom_den = 0.0;
    for (std::size_t trial = 0; trial < n_trials; ++trial) {
        const std::vector<SampleSet> pair =
            data::gen_polynomial_batch(task, 2, shared, seed + 1000 * (trial + 1));
        const SampleSet& f = pair[0];
        const SampleSet& g = pair[1];
        const double a = coef.uniform(-2.0, 2.0);
        const double b = coef.uniform(-2.0, 2.0);

        Tensor pf = model(f.xs, f.fs, f.ys);
        Tensor pg = model(g.xs, g.fs, f.ys);

        Tensor combo = f.fs;
        for (std::size_t i = 0; i < combo.size(); ++i)
            combo[i] = a * f.fs[i] + b * g.fs[i];
        Tensor lhs = model(f.xs, combo, f.ys);
        for (std::size_t i = 0; i < lhs.size(); ++i) {
            const double ref = a * pf[i] + b * pg[i];
            const double d = lhs[i] - ref;
            lin_num += d * d;
            lin_den += ref * ref;
        }

        Tensor scaled = f.fs;
        for (std::size_t i = 0; i < scaled.size(); ++i) scaled[i] = a * f.fs[i];
        Tensor hom = model(f.xs, scaled, f.ys);
        for (std::size_t i = 0; i < hom.size(); ++i) {
            const double ref = a * pf[i];
            const double d = hom[i] - ref;
            hom_num += d * d;
            hom_den += ref * ref;
        }
    }
    const double pn = static_cast<double>(n_trials * opts.p);
    rep.linearity_mse = lin_num / pn;
    rep.homogeneity_mse = hom_num / pn;
    rep.linearity_rel = lin_den > 0.0 ? lin_num / lin_den : 0.0;
    rep.homogeneity_rel = hom_den > 0.0 ? hom_num / hom_den : 0.0;
    return rep;
}

namespace {

DecayReport decay_of(std::vector<double> mags, std::string source) {
    std::sort(mags.begin(), mags.end(), std::greater<double>());
    DecayReport rep;
    rep.source = std::move(source);
    rep.magnitudes = std::move(mags);

    // Least-squares fit of log-magnitude vs index over the resolvable part.
    const double floor_mag =
        rep.magnitudes.empty() ? 0.0 : rep.magnitudes[0] * 1e-15;
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < rep.magnitudes.size(); ++i) {
        if (rep.magnitudes[i] <= floor_mag || rep.magnitudes[i] <= 0.0) break;
        const double x = static_cast<double>(i);
        const double y = std::log(rep.magnitudes[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
        ++n;
    }
    if (n >= 2) {
        const double denom = static_cast<double>(n) * sxx - sx * sx;
        rep.rate = denom != 0.0 ? (static_cast<double>(n) * sxy - sx * sy) / denom : 0.0;
    }
    return rep;
}

}  // namespace

DecayReport decay_from_matrix(const Tensor& a) {
    linalg::Svd svd = linalg::svd_dense(a);
    return decay_of(svd.s.vec(), "matrix_svd");
}

DecayReport decay_from_values(const Tensor& values, std::string source) {
    std::vector<double> mags(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) mags[i] = std::abs(values[i]);
    return decay_of(std::move(mags), std::move(source));
}

LandscapeResult loss_landscape(
    const ParameterStore& theta_star,
    const std::function<std::vector<Tensor>(std::size_t probe)>& probe_grad,
    const std::function<double(const ParameterStore&)>& loss_eval,
    std::size_t n_probes, double range, std::size_t grid_n) {
    if (n_probes < 2) throw ConfigError("loss_landscape: need at least 2 probes");
    if (grid_n < 2) throw ConfigError("loss_landscape: grid must be at least 2x2");
    const std::size_t P = theta_star.scalar_count();

    Tensor g({n_probes, P});
    for (std::size_t probe = 0; probe < n_probes; ++probe) {
        const std::vector<Tensor> grads = probe_grad(probe);
        if (grads.size() != theta_star.size())
            throw DimensionError("loss_landscape: probe gradient count mismatch");
        std::size_t off = 0;
        for (const Tensor& t : grads) {
            for (std::size_t i = 0; i < t.size(); ++i) g.at(probe, off + i) = t[i];
            off += t.size();
        }
    }

    linalg::Pca pca = linalg::pca(g, 2);

    // Filter normalization: each parameter block of a direction is rescaled to
    // that block's parameter norm.
    auto normalize = [&](std::size_t comp) {
        Tensor dir({P});
        for (std::size_t i = 0; i < P; ++i) dir[i] = pca.components.at(comp, i);
        std::size_t off = 0;
        for (const auto& [name, t] : theta_star) {
            double pn = 0.0, dn = 0.0;
            for (std::size_t i = 0; i < t.size(); ++i) {
                pn += t[i] * t[i];
                dn += dir[off + i] * dir[off + i];
            }
            if (dn > 0.0) {
                const double s = std::sqrt(pn / dn);
                for (std::size_t i = 0; i < t.size(); ++i) dir[off + i] *= s;
            }
            off += t.size();
        }
        return dir;
    };
    const Tensor p1 = normalize(0);
    const Tensor p2 = normalize(1);

    LandscapeResult res;
    res.grid = grid_n;
    res.range = range;
    ParameterStore probe = theta_star;
    for (std::size_t ia = 0; ia < grid_n; ++ia) {
        const double alpha =
            -range + 2.0 * range * static_cast<double>(ia) / static_cast<double>(grid_n - 1);
        for (std::size_t ib = 0; ib < grid_n; ++ib) {
            const double beta = -range + 2.0 * range * static_cast<double>(ib) /
                                             static_cast<double>(grid_n - 1);
            std::size_t off = 0;
            for (std::size_t pi = 0; pi < probe.size(); ++pi) {
                const Tensor& base = theta_star.item(pi).second;
                Tensor& t = probe.item(pi).second;
                for (std::size_t i = 0; i < t.size(); ++i)
                    t[i] = base[i] + alpha * p1[off + i] + beta * p2[off + i];
                off += t.size();
            }
            res.alpha.push_back(alpha);
            res.beta.push_back(beta);
            res.loss.push_back(loss_eval(probe));
        }
    }
    return res;
}

void write_metrics_csv(const std::string& path, const std::vector<MetricsRecord>& rows) {
    std::ofstream out(path);
    if (!out) throw DataError("write_metrics_csv: cannot open " + path);
    out << "model,dataset,seed,step,mse,worst_mse\n";
    for (const MetricsRecord& r : rows)
        out << r.model_id << "," << r.dataset_id << "," << r.seed << "," << r.step << ","
            << fmt_double(r.mse) << "," << fmt_double(r.worst_mse) << "\n";
}

void write_decay_csv(const std::string& path, const DecayReport& report) {
    std::ofstream out(path);
    if (!out) throw DataError("write_decay_csv: cannot open " + path);
    out << "index,magnitude,source\n";
    for (std::size_t i = 0; i < report.magnitudes.size(); ++i)
        out << i << "," << fmt_double(report.magnitudes[i]) << "," << report.source
            << "\n";
}

void write_landscape_csv(const std::string& path, const LandscapeResult& r) {
    std::ofstream out(path);
    if (!out) throw DataError("write_landscape_csv: cannot open " + path);
    out << "alpha,beta,loss\n";
    for (std::size_t i = 0; i < r.loss.size(); ++i)
        out << fmt_double(r.alpha[i]) << "," << fmt_double(r.beta[i]) << ","
            << fmt_double(r.loss[i]) << "\n";
}

}  // namespace feop
