#pragma once

#include "nht/geometry.hpp"

#include <functional>
#include <limits>

namespace nht {

struct NewtonResult {
    Vec z;
    bool converged = false;
    bool singular = false;  // Jacobian lost rank on the free coordinates
    int iterations = 0;
    double residual = std::numeric_limits<double>::infinity();
};

using Residuals = std::function<Vec(const Vec&)>;

// Damped Gauss-Newton with least-norm steps, so underdetermined systems land on the
// nearest point of the solution set. Frozen coordinates are never moved. The Jacobian
// is taken by central differences; evaluation errors count as a failed trial step.
NewtonResult newton_solve(const Residuals& F, Vec z, const std::vector<bool>& frozen,
                          double tol = 1e-10, int max_iter = 60, double max_step = 0.5);

// Central-difference Jacobian of F at z (rows: residuals, cols: coordinates).
Mat fd_jacobian(const Residuals& F, const Vec& z, const Vec& Fz);

// Orthonormal basis (columns) of the null space of the rows of G.
Mat null_space(const Mat& G, double rel_cut = 1e-9);

}  // namespace nht
