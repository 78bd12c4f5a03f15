#include "wbsde/estimates.hpp"

#include "wbsde/errors.hpp"
#include "wbsde/exec.hpp"

#include <cmath>

namespace wbsde {

namespace {

double norm_sq(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

// Per-path building blocks of the weighted functionals.
struct PathFunctionals {
    std::vector<double> xi_term;    // e^{2 cum(tau)} |xi|^2
    std::vector<double> y_sup;      // sup_i e^{2 cum} |y|^2
    std::vector<double> z_int;      // int e^{2 cum} |z|^2 dt
    std::vector<double> mid_int;    // int e^{2 cum} ((2b-2)mu + (rho-rbar)nu^2)|y|^2 dt
    std::vector<double> f_lin;      // (int e^{cum} f dt)^2
    std::vector<double> yf_int;     // int e^{2 cum} |y| f dt
};

PathFunctionals path_functionals(const SolutionEstimate& est, const CoefficientTrace& trace,
                                 std::span<const double> xi, const TerminalTime& tau,
                                 const TimeGrid& grid, const WeightParams* params,
                                 const GeneratorSpec* g, const PathEnsemble* ens) {
    const int n = est.n_paths;
    const int k = est.k;
    const double dt = grid.dt;
    PathFunctionals f;
    f.xi_term.assign(static_cast<std::size_t>(n), 0.0);
    f.y_sup.assign(static_cast<std::size_t>(n), 0.0);
    f.z_int.assign(static_cast<std::size_t>(n), 0.0);
    const bool with_mid = params != nullptr;
    const bool with_f = g != nullptr && static_cast<bool>(g->f_bound) && ens != nullptr;
    if (with_mid) f.mid_int.assign(static_cast<std::size_t>(n), 0.0);
    if (with_f) {
        f.f_lin.assign(static_cast<std::size_t>(n), 0.0);
        f.yf_int.assign(static_cast<std::size_t>(n), 0.0);
    }
    exec::for_each_index(static_cast<std::size_t>(n), [&](std::size_t p) {
        const int e = tau.index[p];
        double sup = 0.0, zint = 0.0, mid = 0.0, flin = 0.0, yf = 0.0;
        for (int i = 0; i <= e; ++i) {
            const double w = std::exp(2.0 * trace.cum_at(static_cast<int>(p), i));
            const double y_sq = norm_sq(est.y_at(static_cast<int>(p), i));
            sup = std::max(sup, w * y_sq);
            if (i < e) {
                zint += w * norm_sq(est.z_at(static_cast<int>(p), i)) * dt;
                if (with_mid) {
                    const double mu = trace.mu[trace.idx(static_cast<int>(p), i)];
                    const double nu = trace.nu[trace.idx(static_cast<int>(p), i)];
                    mid += w *
                           ((2.0 * params->beta - 2.0) * mu +
                            (params->rho - params->rho_bar) * nu * nu) *
                           y_sq * dt;
                }
                if (with_f) {
                    const double fv =
                        g->f_bound(ens->t_offset + grid.node(i), ens->state(static_cast<int>(p), i));
                    flin += std::exp(trace.cum_at(static_cast<int>(p), i)) * fv * dt;
                    yf += w * std::sqrt(y_sq) * fv * dt;
                }
            }
        }
        const double w_tau = std::exp(2.0 * trace.cum_at(static_cast<int>(p), e));
        f.xi_term[p] = w_tau * norm_sq(xi.subspan(p * k, static_cast<std::size_t>(k)));
        f.y_sup[p] = sup;
        f.z_int[p] = zint;
        if (with_mid) f.mid_int[p] = mid;
        if (with_f) {
            f.f_lin[p] = flin * flin;
            f.yf_int[p] = yf;
        }
    });
    return f;
}

InequalityRow make_row(std::string id, double constant, std::span<const double> lhs,
                       std::span<const double> rhs) {
    InequalityRow row;
    row.id = std::move(id);
    row.constant = constant;
    const auto lm = exec::mean_se(lhs);
    const auto rm = exec::mean_se(rhs);
    row.lhs = lm.mean;
    row.rhs = rm.mean;
    row.lhs_se = lm.se;
    row.rhs_se = rm.se;
    std::vector<double> diff(lhs.size());
    for (std::size_t i = 0; i < lhs.size(); ++i) diff[i] = rhs[i] - lhs[i];
    const auto dm = exec::mean_se(diff);
    row.diff_se = dm.se;
    row.pass = dm.mean >= -4.0 * dm.se;
    return row;
}

}  // namespace

WeightedNorms weighted_norms(const SolutionEstimate& est, const CoefficientTrace& trace,
                             std::span<const double> xi, const TerminalTime& tau,
                             const TimeGrid& grid) {
    if (!est.full_history) throw ConfigError("weighted_norms: full history required");
    const PathFunctionals f =
        path_functionals(est, trace, xi, tau, grid, nullptr, nullptr, nullptr);
    WeightedNorms out;
    out.n_paths = static_cast<std::size_t>(est.n_paths);
    const auto xs = exec::mean_se(f.xi_term);
    const auto ys = exec::mean_se(f.y_sup);
    const auto zs = exec::mean_se(f.z_int);
    out.xi_norm_sq = xs.mean;
    out.xi_se = xs.se;
    out.y_norm_sq = ys.mean;
    out.y_se = ys.se;
    out.z_norm_sq = zs.mean;
    out.z_se = zs.se;
    return out;
}

AprioriReport apriori_check(const SolutionEstimate& est, const GeneratorSpec& g,
                            std::span<const double> xi, const CoefficientTrace& trace,
                            const WeightParams& params, const TerminalTime& tau,
                            const PathEnsemble& ens) {
    if (!g.f_bound)
        throw ConfigError("apriori_check: generator must declare the driver bound f");
    params.validate();
    const TimeGrid& grid = ens.grid;
    const int n = est.n_paths;
    const PathFunctionals f =
        path_functionals(est, trace, xi, tau, grid, &params, &g, &ens);

    AprioriReport report;
    const double rb = params.rho_bar;
    const double c202 = 2.0 * rb / (rb - 1.0);
    const double c_star = 4.0 * std::pow(2.0 + 33.0 * rb / (rb - 1.0), 2.0);

    std::vector<double> lhs(static_cast<std::size_t>(n)), rhs(static_cast<std::size_t>(n));
    // (2.02): weighted z energy vs sup-of-y plus the squared f integral.
    for (int p = 0; p < n; ++p) {
        const std::size_t sp = static_cast<std::size_t>(p);
        lhs[sp] = f.z_int[sp];
        rhs[sp] = c202 * (f.y_sup[sp] + f.f_lin[sp]);
    }
    report.rows.push_back(make_row("2.02", c202, lhs, rhs));
    // (2.03*): explicit constant, with the middle coefficient term kept.
    for (int p = 0; p < n; ++p) {
        const std::size_t sp = static_cast<std::size_t>(p);
        lhs[sp] = f.y_sup[sp] + f.z_int[sp] + f.mid_int[sp];
        rhs[sp] = c_star * (f.xi_term[sp] + f.f_lin[sp]);
    }
    report.rows.push_back(make_row("2.03*", c_star, lhs, rhs));
    // (2.03): uniform-constant form, checked with the explicit constant.
    for (int p = 0; p < n; ++p) {
        const std::size_t sp = static_cast<std::size_t>(p);
        lhs[sp] = f.y_sup[sp] + f.z_int[sp];
        rhs[sp] = c_star * (f.xi_term[sp] + f.f_lin[sp]);
    }
    report.rows.push_back(make_row("2.03", c_star, lhs, rhs));
    // (2.04): |Y| f driver form; same constant, plus the smallest empirical one.
    double driver_mean = 0.0;
    for (int p = 0; p < n; ++p) {
        const std::size_t sp = static_cast<std::size_t>(p);
        lhs[sp] = f.y_sup[sp] + f.z_int[sp];
        rhs[sp] = c_star * (f.xi_term[sp] + f.yf_int[sp]);
        driver_mean += f.xi_term[sp] + f.yf_int[sp];
    }
    report.rows.push_back(make_row("2.04", c_star, lhs, rhs));
    driver_mean /= static_cast<double>(n);
    const auto lhs_mean = exec::mean_se(lhs);
    report.empirical_c_204 = driver_mean > 0.0 ? lhs_mean.mean / driver_mean : 0.0;

    report.weighted_rate_y_integral =
        exec::deterministic_sum(static_cast<std::size_t>(n), [&](std::size_t p) {
            const int e = tau.index[p];
            double acc = 0.0;
            for (int i = 0; i < e; ++i)
                acc += std::exp(2.0 * trace.cum_at(static_cast<int>(p), i)) *
                       trace.rate[trace.idx(static_cast<int>(p), i)] *
                       norm_sq(est.y_at(static_cast<int>(p), i)) * grid.dt;
            return acc;
        }) / static_cast<double>(n);

    report.all_pass = true;
    for (const auto& row : report.rows) report.all_pass = report.all_pass && row.pass;
    return report;
}

DependenceReport continuous_dependence(const SolutionEstimate& first,
                                       const SolutionEstimate& second,
                                       const GeneratorSpec& g_first,
                                       const GeneratorSpec& g_second,
                                       std::span<const double> xi_first,
                                       std::span<const double> xi_second,
                                       const CoefficientTrace& trace, const TerminalTime& tau,
                                       const PathEnsemble& ens) {
    if (first.n_paths != second.n_paths || first.n_nodes != second.n_nodes)
        throw ConfigError("continuous_dependence: mismatched grids");
    if (!first.full_history || !second.full_history)
        throw ConfigError("continuous_dependence: full histories required");
    const int n = first.n_paths;
    const int k = first.k;
    const int kd = first.k * first.d;
    const double dt = ens.grid.dt;

    std::vector<double> lhs(static_cast<std::size_t>(n)), rhs(static_cast<std::size_t>(n));
    exec::for_each_index(static_cast<std::size_t>(n), [&](std::size_t p) {
        const int e = tau.index[p];
        double sup = 0.0, zint = 0.0, dterm = 0.0, gint = 0.0;
        double gv1[8], gv2[8];
        for (int i = 0; i <= e; ++i) {
            const double w = std::exp(2.0 * trace.cum_at(static_cast<int>(p), i));
            double dy = 0.0;
            for (int r = 0; r < k; ++r) {
                const double v = first.y_at(static_cast<int>(p), i)[r] -
                                 second.y_at(static_cast<int>(p), i)[r];
                dy += v * v;
            }
            sup = std::max(sup, w * dy);
            if (i < e) {
                double dz = 0.0;
                for (int j = 0; j < kd; ++j) {
                    const double v = first.z_at(static_cast<int>(p), i)[j] -
                                     second.z_at(static_cast<int>(p), i)[j];
                    dz += v * v;
                }
                zint += w * dz * dt;
                const double t_phys = ens.t_offset + ens.grid.node(i);
                const auto x = ens.state(static_cast<int>(p), i);
                const auto y2 = second.y_at(static_cast<int>(p), i);
                const auto z2 = second.z_at(static_cast<int>(p), i);
                g_first.eval(t_phys, x, y2, z2, {gv1, static_cast<std::size_t>(k)});
                g_second.eval(t_phys, x, y2, z2, {gv2, static_cast<std::size_t>(k)});
                double dg = 0.0;
                for (int r = 0; r < k; ++r) dg += (gv1[r] - gv2[r]) * (gv1[r] - gv2[r]);
                gint += std::exp(trace.cum_at(static_cast<int>(p), i)) * std::sqrt(dg) * dt;
            }
        }
        double dxi = 0.0;
        for (int r = 0; r < k; ++r) {
            const double v = xi_first[p * k + r] - xi_second[p * k + r];
            dxi += v * v;
        }
        dterm = std::exp(2.0 * trace.cum_at(static_cast<int>(p), e)) * dxi;
        lhs[p] = sup + zint;
        rhs[p] = dterm + gint * gint;
    });
    DependenceReport report;
    const auto lm = exec::mean_se(lhs);
    const auto rm = exec::mean_se(rhs);
    report.lhs = lm.mean;
    report.rhs_driver = rm.mean;
    report.lhs_se = lm.se;
    report.rhs_se = rm.se;
    report.ratio = rm.mean > 0.0 ? lm.mean / rm.mean : 0.0;
    return report;
}

StabilityTable stability_sequence(const SolutionEstimate& limit, const GeneratorSpec& g_limit,
                                  std::span<const double> xi_limit,
                                  const std::vector<const SolutionEstimate*>& sequence,
                                  const std::vector<const GeneratorSpec*>& g_sequence,
                                  const std::vector<std::span<const double>>& xi_sequence,
                                  const CoefficientTrace& trace, const TerminalTime& tau,
                                  const PathEnsemble& ens) {
    StabilityTable table;
    for (std::size_t idx = 0; idx < sequence.size(); ++idx) {
        // Premise evaluated along the limit solution (Y, Z); distance via the
        // dependence lhs with the roles swapped to the n-th problem.
        const DependenceReport premise = continuous_dependence(
            *sequence[idx], limit, *g_sequence[idx], g_limit, xi_sequence[idx], xi_limit,
            trace, tau, ens);
        StabilityRow row;
        row.premise = premise.rhs_driver;
        row.premise_se = premise.rhs_se;
        row.distance = premise.lhs;
        row.distance_se = premise.lhs_se;
        table.rows.push_back(row);
    }
    table.monotone_within_slack = true;
    for (std::size_t i = 1; i < table.rows.size(); ++i) {
        const auto& prev = table.rows[i - 1];
        const auto& cur = table.rows[i];
        if (cur.premise > prev.premise + prev.premise_se + cur.premise_se)
            table.monotone_within_slack = false;
        if (cur.distance > prev.distance + prev.distance_se + cur.distance_se)
            table.monotone_within_slack = false;
    }
    return table;
}

}  // namespace wbsde
