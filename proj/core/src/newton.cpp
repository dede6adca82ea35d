#include "nlbs/newton.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nlbs {
namespace {

constexpr double k_mu_start = 1.0 / 16.0;
constexpr double k_mu_growth = 32.0;
constexpr double k_mu_cap = 1e10;

double inf_norm(const std::vector<double>& v) {
    double n = 0.0;
    for (double x : v) {
        if (!std::isfinite(x)) return std::numeric_limits<double>::infinity();
        n = std::max(n, std::abs(x));
    }
    return n;
}

// Solves J(x) dx = -r with the diagonal boosted by mu (relative to the row
// scale, following the diagonal's sign). Returns empty on a singular solve.
using StepFn = std::function<std::vector<double>(const std::vector<double>& x,
                                                 const std::vector<double>& r, double mu)>;

// Optional override for the convergence certificate (max-norm); defaults to
// the iterated residual itself.
using CertFn = std::function<double(const std::vector<double>& x, double residual_norm)>;

NewtonResult engine(const ResidualFn& residual, const StepFn& step, std::vector<double> x,
                    const NewtonOptions& opts, const CertFn& certificate) {
    auto cert = [&](const std::vector<double>& xx, double rn) {
        return certificate ? certificate(xx, rn) : rn;
    };

    std::vector<double> r = residual(x);
    double rn = inf_norm(r);
    if (cert(x, rn) <= opts.tol) return {std::move(x), 0, rn, true};

    double mu = 0.0;
    for (int it = 1; it <= opts.max_iter; ++it) {
        std::vector<double> dx;
        try {
            dx = step(x, r, mu);
        } catch (const SingularJacobian&) {
            dx.clear();
        }

        bool accepted = false;
        double lambda = 1.0;
        std::vector<double> x_new, r_new;
        double rn_new = 0.0;
        if (!dx.empty() && std::isfinite(inf_norm(dx))) {
            for (int halving = 0; halving <= opts.max_halvings; ++halving) {
                x_new = x;
                for (std::size_t i = 0; i < x.size(); ++i) x_new[i] += lambda * dx[i];
                r_new = residual(x_new);
                rn_new = inf_norm(r_new);
                if (rn_new < rn) {
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
        }

        if (!accepted) {
            // no descent along this direction: boost the diagonal and retry,
            // give up once the ladder is exhausted
            if (mu == 0.0) {
                mu = k_mu_start;
                continue;
            }
            if (mu < k_mu_cap) {
                mu *= k_mu_growth;
                continue;
            }
            return {std::move(x), it, rn, cert(x, rn) <= opts.tol};
        }

        const double step_size = lambda * inf_norm(dx);
        const double prev_rn = rn;
        x = std::move(x_new);
        r = std::move(r_new);
        rn = rn_new;
        mu = lambda == 1.0 ? 0.0 : mu * 0.5;

        const bool step_small = step_size <= opts.tol * std::max(1.0, inf_norm(x));
        const bool stagnant = rn >= 0.5 * prev_rn;   // at the attainable floor
        const bool collapsed = rn <= 1e-6 * prev_rn; // quadratic tail / linear solve
        if (cert(x, rn) <= opts.tol && (step_small || stagnant || collapsed))
            return {std::move(x), it, rn, true};
    }
    return {std::move(x), opts.max_iter, rn, cert(x, rn) <= opts.tol};
}

void boost_diagonal(double& diag, double row_scale, double mu) {
    if (mu == 0.0) return;
    const double base = row_scale > 0.0 ? row_scale : 1.0;
    diag += (diag >= 0.0 ? 1.0 : -1.0) * mu * base;
}

}  // namespace

std::vector<double> solve_dense(DenseMatrix A, std::vector<double> b) {
    const std::size_t n = A.n;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t row = col + 1; row < n; ++row)
            if (std::abs(A(row, col)) > std::abs(A(pivot, col))) pivot = row;
        if (A(pivot, col) == 0.0 || !std::isfinite(A(pivot, col))) throw SingularJacobian();
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(A(pivot, j), A(col, j));
            std::swap(b[pivot], b[col]);
        }
        for (std::size_t row = col + 1; row < n; ++row) {
            const double f = A(row, col) / A(col, col);
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) A(row, j) -= f * A(col, j);
            b[row] -= f * b[col];
        }
    }
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= A(i, j) * x[j];
        if (A(i, i) == 0.0) throw SingularJacobian();
        x[i] = s / A(i, i);
    }
    return x;
}

std::vector<double> solve_tridiagonal(const TriDiagonal& A, std::vector<double> b) {
    // band LU with partial pivoting; pivoting introduces one fill-in diagonal
    const std::size_t n = A.size();
    std::vector<double> d = A.diag, u1 = A.sup, u2(n, 0.0), l = A.sub;
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double sub = l[i + 1];
        if (std::abs(sub) > std::abs(d[i])) {
            std::swap(d[i], sub);
            const double tmp_u1 = u1[i];
            u1[i] = d[i + 1];
            d[i + 1] = tmp_u1;
            if (i + 2 < n) {
                u2[i] = u1[i + 1];
                u1[i + 1] = 0.0;
            }
            std::swap(b[i], b[i + 1]);
        }
        if (d[i] == 0.0 || !std::isfinite(d[i])) throw SingularJacobian();
        const double f = sub / d[i];
        d[i + 1] -= f * u1[i];
        if (i + 2 < n) u1[i + 1] -= f * u2[i];
        b[i + 1] -= f * b[i];
    }
    if (d[n - 1] == 0.0 || !std::isfinite(d[n - 1])) throw SingularJacobian();
    std::vector<double> x(n);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        if (i + 1 < n) s -= u1[i] * x[i + 1];
        if (i + 2 < n) s -= u2[i] * x[i + 2];
        x[i] = s / d[i];
    }
    return x;
}

NewtonResult newton_iterate(const ResidualFn& residual, const DenseJacobianFn& jacobian,
                            std::vector<double> guess, const NewtonOptions& opts) {
    StepFn step = [&](const std::vector<double>& x, const std::vector<double>& r, double mu) {
        DenseMatrix J = jacobian(x);
        if (mu != 0.0) {
            for (std::size_t i = 0; i < J.n; ++i) {
                double row = 0.0;
                for (std::size_t j = 0; j < J.n; ++j) row = std::max(row, std::abs(J(i, j)));
                boost_diagonal(J(i, i), row, mu);
            }
        }
        std::vector<double> rhs(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) rhs[i] = -r[i];
        return solve_dense(std::move(J), std::move(rhs));
    };
    return engine(residual, step, std::move(guess), opts, nullptr);
}

NewtonResult newton_iterate(const ResidualFn& residual, const TriJacobianFn& jacobian,
                            std::vector<double> guess, const NewtonOptions& opts) {
    StepFn step = [&](const std::vector<double>& x, const std::vector<double>& r, double mu) {
        TriDiagonal J = jacobian(x);
        if (mu != 0.0) {
            for (std::size_t i = 0; i < J.size(); ++i) {
                const double row = std::abs(J.sub[i]) + std::abs(J.diag[i]) + std::abs(J.sup[i]);
                boost_diagonal(J.diag[i], row, mu);
            }
        }
        std::vector<double> rhs(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) rhs[i] = -r[i];
        return solve_tridiagonal(J, std::move(rhs));
    };
    return engine(residual, step, std::move(guess), opts, nullptr);
}

NewtonResult newton_iterate_certified(const ResidualFn& residual, const TriJacobianFn& jacobian,
                                      std::vector<double> guess, const NewtonOptions& opts,
                                      const std::function<double(const std::vector<double>&,
                                                                 double)>& certificate) {
    StepFn step = [&](const std::vector<double>& x, const std::vector<double>& r, double mu) {
        TriDiagonal J = jacobian(x);
        if (mu != 0.0) {
            for (std::size_t i = 0; i < J.size(); ++i) {
                const double row = std::abs(J.sub[i]) + std::abs(J.diag[i]) + std::abs(J.sup[i]);
                boost_diagonal(J.diag[i], row, mu);
            }
        }
        std::vector<double> rhs(r.size());
        for (std::size_t i = 0; i < r.size(); ++i) rhs[i] = -r[i];
        return solve_tridiagonal(J, std::move(rhs));
    };
    return engine(residual, step, std::move(guess), opts, certificate);
}

std::vector<double> newton_solve(const ResidualFn& residual, const DenseJacobianFn& jacobian,
                                 const std::vector<double>& guess, const NewtonOptions& opts) {
    NewtonResult res = newton_iterate(residual, jacobian, guess, opts);
    if (!res.converged) throw NoConvergence(res.iterations, res.residual_norm);
    return std::move(res.x);
}

std::vector<double> newton_solve(const ResidualFn& residual, const TriJacobianFn& jacobian,
                                 const std::vector<double>& guess, const NewtonOptions& opts) {
    NewtonResult res = newton_iterate(residual, jacobian, guess, opts);
    if (!res.converged) throw NoConvergence(res.iterations, res.residual_norm);
    return std::move(res.x);
}

DenseMatrix fd_jacobian(const ResidualFn& residual, const std::vector<double>& x, double eps) {
    const std::size_t n = x.size();
    DenseMatrix J(n);
    const std::vector<double> r0 = residual(x);
    std::vector<double> xb = x;
    for (std::size_t j = 0; j < n; ++j) {
        const double h = eps * std::max(1.0, std::abs(x[j]));
        xb[j] = x[j] + h;
        const std::vector<double> r1 = residual(xb);
        xb[j] = x[j];
        for (std::size_t i = 0; i < n; ++i) J(i, j) = (r1[i] - r0[i]) / h;
    }
    return J;
}

}  // namespace nlbs
