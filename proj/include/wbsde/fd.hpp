#pragma once

#include <functional>
#include <string>
#include <vector>

namespace wbsde {

/// 1-d parabolic terminal-value problem
///   u_t + 1/2 sigma^2 u_xx + b u_x + g(t, x, u, u_x sigma) = 0,  u(T,.) = h.
struct ParabolicProblem {
    std::function<double(double t, double x)> drift;  // b
    std::function<double(double t, double x)> sigma;
    std::function<double(double t, double x, double u, double ux_sigma)> g;  // nullable
    std::function<double(double x)> h;
    double t_end = 1.0;
};

struct SpaceTimeMesh {
    std::vector<double> x;  // nx nodes
    std::vector<double> t;  // nt+1 levels, t[0] = 0
    std::vector<double> u;  // (level, x)
    double value(double t_probe, double x_probe) const;  // bilinear
};

/// Explicit scheme marching backward from t_end; Dirichlet closure u = h at
/// the window edges. Throws ConfigError with the required nt when the step
/// violates the stability bound.
SpaceTimeMesh fd_parabolic(const ParabolicProblem& problem, double x_min, double x_max,
                           int nx, int nt);

int fd_parabolic_required_nt(const ParabolicProblem& problem, double x_min, double x_max,
                             int nx);

/// 1-d elliptic Dirichlet problem on (a, b):
///   1/2 sigma^2 u'' + b u' + g(x, u, u' sigma) = 0, u = h on the endpoints.
struct EllipticProblem {
    double lo = -1.0;
    double hi = 1.0;
    std::function<double(double x)> drift;
    std::function<double(double x)> sigma;
    std::function<double(double x, double u, double ux_sigma)> g;
    std::function<double(double x)> h;
};

struct EllipticSolution {
    std::vector<double> x;
    std::vector<double> u;
    int iterations = 0;
    std::vector<double> residual_history;
    double value(double x_probe) const;  // linear interpolation
};

struct EllipticControls {
    int max_iterations = 200;
    double damping = 1.0;
    double residual_tol = 1e-10;
};

/// Tridiagonal solve wrapped in a damped fixed-point loop when g depends on
/// the solution. Throws SolverError with the residual history on divergence.
EllipticSolution fd_elliptic(const EllipticProblem& problem, int nx,
                             const EllipticControls& controls = {});

// Plot-ready mesh dumps, columns (t, x, u) / (x, u).
void write_mesh_csv(const SpaceTimeMesh& mesh, const std::string& path);
void write_mesh_csv(const EllipticSolution& solution, const std::string& path);

}  // namespace wbsde
