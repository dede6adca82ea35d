#pragma once

#include <functional>
#include <vector>

#include "nlbs/types.hpp"

namespace nlbs {

/// Square dense matrix, row-major.
struct DenseMatrix {
    std::size_t n = 0;
    std::vector<double> a;

    explicit DenseMatrix(std::size_t size) : n(size), a(size * size, 0.0) {}
    double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }
};

/// Tridiagonal matrix; sub[0] and sup[n-1] are ignored.
struct TriDiagonal {
    std::vector<double> sub, diag, sup;

    explicit TriDiagonal(std::size_t n) : sub(n, 0.0), diag(n, 0.0), sup(n, 0.0) {}
    std::size_t size() const { return diag.size(); }
};

/// Solves A x = b with partial pivoting, in place. Throws SingularJacobian.
std::vector<double> solve_dense(DenseMatrix A, std::vector<double> b);

/// Solves a tridiagonal system with partial pivoting (one fill-in diagonal).
/// Throws SingularJacobian.
std::vector<double> solve_tridiagonal(const TriDiagonal& A, std::vector<double> b);

using ResidualFn = std::function<std::vector<double>(const std::vector<double>&)>;
using DenseJacobianFn = std::function<DenseMatrix(const std::vector<double>&)>;
using TriJacobianFn = std::function<TriDiagonal(const std::vector<double>&)>;

struct NewtonOptions {
    double tol = 1e-12;      ///< residual max-norm tolerance
    int max_iter = 100;
    int max_halvings = 40;   ///< step-halving budget per iteration
};

struct NewtonResult {
    std::vector<double> x;
    int iterations = 0;
    double residual_norm = 0.0;
    bool converged = false;
};

/// Damped Newton with step halving. When a Newton direction produces no
/// decrease of the residual max-norm, the Jacobian diagonal is boosted
/// (pseudo-transient ladder) until a descent direction appears; pure Newton
/// resumes afterwards. Returns without throwing; see newton_solve for the
/// throwing contract.
NewtonResult newton_iterate(const ResidualFn& residual, const DenseJacobianFn& jacobian,
                            std::vector<double> guess, const NewtonOptions& opts);
NewtonResult newton_iterate(const ResidualFn& residual, const TriJacobianFn& jacobian,
                            std::vector<double> guess, const NewtonOptions& opts);

/// Tridiagonal iteration with a custom convergence certificate: the stop
/// tests evaluate certificate(x, residual_norm) against the tolerance instead
/// of the iterated residual's own norm (the steps still follow the residual).
NewtonResult newton_iterate_certified(
    const ResidualFn& residual, const TriJacobianFn& jacobian, std::vector<double> guess,
    const NewtonOptions& opts,
    const std::function<double(const std::vector<double>&, double)>& certificate);

/// Same iteration, but throws NoConvergence (carrying the last residual norm)
/// when the tolerance is not certified.
std::vector<double> newton_solve(const ResidualFn& residual, const DenseJacobianFn& jacobian,
                                 const std::vector<double>& guess, const NewtonOptions& opts = {});
std::vector<double> newton_solve(const ResidualFn& residual, const TriJacobianFn& jacobian,
                                 const std::vector<double>& guess, const NewtonOptions& opts = {});

/// Forward-difference dense Jacobian of a residual function, for cross-checks
/// and for systems without an analytic Jacobian.
DenseMatrix fd_jacobian(const ResidualFn& residual, const std::vector<double>& x,
                        double eps = 1e-7);

}  // namespace nlbs
