#include "wbsde/fd.hpp"

#include "wbsde/errors.hpp"
#include "wbsde/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

namespace wbsde {

namespace {

double max_sigma_sq(const ParabolicProblem& problem, double x_min, double x_max, int nx) {
    double worst = 0.0;
    for (int i = 0; i <= nx; ++i) {
        const double x = x_min + (x_max - x_min) * i / nx;
        for (double frac : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            const double s = problem.sigma(frac * problem.t_end, x);
            worst = std::max(worst, s * s);
        }
    }
    return worst;
}

void thomas_solve(std::vector<double>& lower, std::vector<double>& diag,
                  std::vector<double>& upper, std::vector<double>& rhs,
                  std::vector<double>& out) {
    const std::size_t n = diag.size();
    for (std::size_t i = 1; i < n; ++i) {
        const double w = lower[i - 1] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    out[n - 1] = rhs[n - 1] / diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) out[i] = (rhs[i] - upper[i] * out[i + 1]) / diag[i];
}

}  // namespace

double SpaceTimeMesh::value(double t_probe, double x_probe) const {
    const auto locate = [](const std::vector<double>& grid, double v) {
        const auto it = std::upper_bound(grid.begin(), grid.end(), v);
        std::size_t j = it == grid.begin() ? 1 : static_cast<std::size_t>(it - grid.begin());
        j = std::min(j, grid.size() - 1);
        return j;
    };
    const std::size_t jt = locate(t, t_probe);
    const std::size_t jx = locate(x, x_probe);
    const double wt = (t_probe - t[jt - 1]) / (t[jt] - t[jt - 1]);
    const double wx = (x_probe - x[jx - 1]) / (x[jx] - x[jx - 1]);
    const std::size_t nx = x.size();
    const auto at = [&](std::size_t lt, std::size_t lx) { return u[lt * nx + lx]; };
    return (1 - wt) * ((1 - wx) * at(jt - 1, jx - 1) + wx * at(jt - 1, jx)) +
           wt * ((1 - wx) * at(jt, jx - 1) + wx * at(jt, jx));
}

int fd_parabolic_required_nt(const ParabolicProblem& problem, double x_min, double x_max,
                             int nx) {
    const double dx = (x_max - x_min) / (nx - 1);
    const double s2 = max_sigma_sq(problem, x_min, x_max, nx - 1);
    // Explicit-step bound dt <= 0.9 dx^2 / sigma^2.
    return std::max(1, static_cast<int>(std::ceil(problem.t_end * s2 / (0.9 * dx * dx))));
}

SpaceTimeMesh fd_parabolic(const ParabolicProblem& problem, double x_min, double x_max,
                           int nx, int nt) {
    if (nx < 3) throw ConfigError("fd_parabolic: nx must be >= 3");
    const int required = fd_parabolic_required_nt(problem, x_min, x_max, nx);
    if (nt < required)
        throw ConfigError("fd_parabolic: explicit step unstable; need nt >= " +
                          std::to_string(required));
    SpaceTimeMesh mesh;
    mesh.x.resize(static_cast<std::size_t>(nx));
    const double dx = (x_max - x_min) / (nx - 1);
    for (int i = 0; i < nx; ++i) mesh.x[static_cast<std::size_t>(i)] = x_min + i * dx;
    mesh.t.resize(static_cast<std::size_t>(nt) + 1);
    const double dt = problem.t_end / nt;
    for (int l = 0; l <= nt; ++l) mesh.t[static_cast<std::size_t>(l)] = l * dt;
    mesh.u.assign((static_cast<std::size_t>(nt) + 1) * nx, 0.0);

    std::vector<double> cur(static_cast<std::size_t>(nx)), next(static_cast<std::size_t>(nx));
    for (int i = 0; i < nx; ++i) cur[static_cast<std::size_t>(i)] = problem.h(mesh.x[static_cast<std::size_t>(i)]);
    std::copy(cur.begin(), cur.end(), mesh.u.begin() + static_cast<std::size_t>(nt) * nx);

    for (int l = nt - 1; l >= 0; --l) {
        const double t_next = mesh.t[static_cast<std::size_t>(l) + 1];
        next[0] = problem.h(mesh.x[0]);
        next[static_cast<std::size_t>(nx - 1)] = problem.h(mesh.x[static_cast<std::size_t>(nx - 1)]);
        for (int i = 1; i + 1 < nx; ++i) {
            const double x = mesh.x[static_cast<std::size_t>(i)];
            const double um = cur[static_cast<std::size_t>(i - 1)];
            const double u0 = cur[static_cast<std::size_t>(i)];
            const double up = cur[static_cast<std::size_t>(i + 1)];
            const double uxx = (up - 2.0 * u0 + um) / (dx * dx);
            const double ux = (up - um) / (2.0 * dx);
            const double sig = problem.sigma(t_next, x);
            double rate = 0.5 * sig * sig * uxx + problem.drift(t_next, x) * ux;
            if (problem.g) rate += problem.g(t_next, x, u0, ux * sig);
            next[static_cast<std::size_t>(i)] = u0 + dt * rate;
        }
        std::copy(next.begin(), next.end(), mesh.u.begin() + static_cast<std::size_t>(l) * nx);
        std::swap(cur, next);
    }
    return mesh;
}

double EllipticSolution::value(double x_probe) const {
    const auto it = std::upper_bound(x.begin(), x.end(), x_probe);
    std::size_t j = it == x.begin() ? 1 : static_cast<std::size_t>(it - x.begin());
    j = std::min(j, x.size() - 1);
    const double w = (x_probe - x[j - 1]) / (x[j] - x[j - 1]);
    return (1 - w) * u[j - 1] + w * u[j];
}

EllipticSolution fd_elliptic(const EllipticProblem& problem, int nx,
                             const EllipticControls& controls) {
    if (nx < 3) throw ConfigError("fd_elliptic: nx must be >= 3");
    if (!(problem.hi > problem.lo)) throw ConfigError("fd_elliptic: empty interval");
    EllipticSolution sol;
    sol.x.resize(static_cast<std::size_t>(nx));
    const double dx = (problem.hi - problem.lo) / (nx - 1);
    for (int i = 0; i < nx; ++i) sol.x[static_cast<std::size_t>(i)] = problem.lo + i * dx;
    sol.u.assign(static_cast<std::size_t>(nx), 0.0);
    sol.u.front() = problem.h(problem.lo);
    sol.u.back() = problem.h(problem.hi);

    const int m = nx - 2;  // interior unknowns
    std::vector<double> lower(static_cast<std::size_t>(m) - 1), diag(static_cast<std::size_t>(m)),
        upper(static_cast<std::size_t>(m) - 1), rhs(static_cast<std::size_t>(m)),
        interior(static_cast<std::size_t>(m));
    std::vector<double> prev = sol.u;

    const auto residual_of = [&](const std::vector<double>& u) {
        double worst = 0.0;
        for (int i = 1; i + 1 < nx; ++i) {
            const double x = sol.x[static_cast<std::size_t>(i)];
            const double sig = problem.sigma(x);
            const double uxx = (u[static_cast<std::size_t>(i + 1)] - 2.0 * u[static_cast<std::size_t>(i)] +
                                u[static_cast<std::size_t>(i - 1)]) /
                               (dx * dx);
            const double ux =
                (u[static_cast<std::size_t>(i + 1)] - u[static_cast<std::size_t>(i - 1)]) / (2.0 * dx);
            double r = 0.5 * sig * sig * uxx + problem.drift(x) * ux;
            if (problem.g) r += problem.g(x, u[static_cast<std::size_t>(i)], ux * sig);
            worst = std::max(worst, std::abs(r));
        }
        return worst;
    };

    for (int it = 0; it < controls.max_iterations; ++it) {
        // Assemble 1/2 sigma^2 u'' + b u' = -g(x, u_prev, sigma u'_prev).
        for (int i = 1; i + 1 < nx; ++i) {
            const double x = sol.x[static_cast<std::size_t>(i)];
            const double sig = problem.sigma(x);
            const double a = 0.5 * sig * sig / (dx * dx);
            const double b = problem.drift(x) / (2.0 * dx);
            const std::size_t row = static_cast<std::size_t>(i - 1);
            diag[row] = -2.0 * a;
            if (i > 1) lower[row - 1] = a - b;
            if (i + 2 < nx) upper[row] = a + b;
            double forcing = 0.0;
            if (problem.g) {
                const double ux = (prev[static_cast<std::size_t>(i + 1)] -
                                   prev[static_cast<std::size_t>(i - 1)]) /
                                  (2.0 * dx);
                forcing = problem.g(x, prev[static_cast<std::size_t>(i)], ux * sig);
            }
            rhs[row] = -forcing;
            if (i == 1) rhs[row] -= (a - b) * sol.u.front();
            if (i + 2 == nx) rhs[row] -= (a + b) * sol.u.back();
        }
        auto dl = lower;
        auto dd = diag;
        auto du = upper;
        auto dr = rhs;
        thomas_solve(dl, dd, du, dr, interior);
        for (int i = 1; i + 1 < nx; ++i) {
            const std::size_t s = static_cast<std::size_t>(i);
            sol.u[s] = (1.0 - controls.damping) * prev[s] +
                       controls.damping * interior[static_cast<std::size_t>(i - 1)];
        }
        sol.iterations = it + 1;
        const double res = residual_of(sol.u);
        sol.residual_history.push_back(res);
        if (res < controls.residual_tol) return sol;
        prev = sol.u;
        if (!problem.g) return sol;  // linear problem: the direct solve is the answer
    }
    if (sol.residual_history.empty() || sol.residual_history.back() >= controls.residual_tol) {
        std::string hist;
        for (double r : sol.residual_history) hist += " " + std::to_string(r);
        throw SolverError("fd_elliptic: fixed point not converged; residuals:" + hist);
    }
    return sol;
}

void write_mesh_csv(const SpaceTimeMesh& mesh, const std::string& path) {
    CsvWriter csv(path, {"t", "x", "u"});
    for (std::size_t l = 0; l < mesh.t.size(); ++l)
        for (std::size_t i = 0; i < mesh.x.size(); ++i)
            csv.row({format_double(mesh.t[l]), format_double(mesh.x[i]),
                     format_double(mesh.u[l * mesh.x.size() + i])});
    csv.close();
}

void write_mesh_csv(const EllipticSolution& solution, const std::string& path) {
    CsvWriter csv(path, {"x", "u"});
    for (std::size_t i = 0; i < solution.x.size(); ++i)
        csv.row({format_double(solution.x[i]), format_double(solution.u[i])});
    csv.close();
}

}  // namespace wbsde
