#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace fiberopt {

/// Square matrix in compressed sparse row form. Column indices within a row
/// are sorted.
struct CsrMatrix {
    std::size_t rows = 0;
    std::vector<std::size_t> row_ptr;
    std::vector<int> col;
    std::vector<double> val;

    std::size_t nnz() const { return val.size(); }

    /// Index into col/val of entry (i, j), or -1 if outside the pattern.
    std::ptrdiff_t find(std::size_t i, int j) const;

    double coeff(std::size_t i, int j) const;

    void multiply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const;
    Eigen::VectorXd operator*(const Eigen::VectorXd& x) const;

    Eigen::VectorXd diagonal() const;

    /// Dense copy, for tests and small diagnostics.
    Eigen::MatrixXd to_dense() const;
};

struct SolverSettings {
    double tolerance = 1e-8;
    /// 0 selects 10 x (number of unknowns).
    int max_iterations = 0;
};

struct CgReport {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Jacobi-preconditioned conjugate gradients for an SPD matrix. Stops once
/// the true residual satisfies |b - A x| <= tol |b|. On entry x holds the
/// initial guess. Throws SolverError on breakdown (a floating structure shows
/// up as a vanishing curvature p'Ap), NaN or iteration exhaustion.
CgReport pcg(const CsrMatrix& a, const Eigen::VectorXd& b, Eigen::VectorXd& x, const SolverSettings& settings);

}  // namespace fiberopt
