#include "fiberopt/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "fiberopt/error.hpp"

namespace fiberopt {

std::ptrdiff_t CsrMatrix::find(std::size_t i, int j) const {
    const auto first = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i]);
    const auto last = col.begin() + static_cast<std::ptrdiff_t>(row_ptr[i + 1]);
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return -1;
    return it - col.begin();
}

double CsrMatrix::coeff(std::size_t i, int j) const {
    const auto k = find(i, j);
    return k < 0 ? 0.0 : val[k];
}

void CsrMatrix::multiply(const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    y.resize(static_cast<Eigen::Index>(rows));
    for (std::size_t i = 0; i < rows; ++i) {
        double s = 0.0;
        for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) s += val[k] * x[col[k]];
        y[static_cast<Eigen::Index>(i)] = s;
    }
}

Eigen::VectorXd CsrMatrix::operator*(const Eigen::VectorXd& x) const {
    Eigen::VectorXd y;
    multiply(x, y);
    return y;
}

Eigen::VectorXd CsrMatrix::diagonal() const {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rows));
    for (std::size_t i = 0; i < rows; ++i) d[static_cast<Eigen::Index>(i)] = coeff(i, static_cast<int>(i));
    return d;
}

Eigen::MatrixXd CsrMatrix::to_dense() const {
    const auto n = static_cast<Eigen::Index>(rows);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) m(static_cast<Eigen::Index>(i), col[k]) = val[k];
    return m;
}

CgReport pcg(const CsrMatrix& a, const Eigen::VectorXd& b, Eigen::VectorXd& x, const SolverSettings& settings) {
    const auto n = static_cast<Eigen::Index>(a.rows);
    if (b.size() != n) throw std::invalid_argument("pcg: right-hand side length mismatch");
    if (x.size() != n) x = Eigen::VectorXd::Zero(n);

    const int max_iter = settings.max_iterations > 0 ? settings.max_iterations : static_cast<int>(10 * n);
    const double bnorm = b.norm();
    if (!std::isfinite(bnorm)) throw SolverError(SolverError::Kind::NotANumber, "right-hand side is not finite", 0, 0);
    if (bnorm == 0.0) {
        x.setZero();
        return {0, 0.0};
    }

    const Eigen::VectorXd diag = a.diagonal();
    if ((diag.array() <= 0.0).any()) {
        throw SolverError(SolverError::Kind::InsufficientConstraints, "non-positive diagonal entry in stiffness", 0, 1);
    }
    const Eigen::ArrayXd inv_diag = diag.array().inverse();
    const double threshold = settings.tolerance * bnorm;

    Eigen::VectorXd r = b - a * x;
    Eigen::VectorXd z = (r.array() * inv_diag).matrix();
    Eigen::VectorXd p = z;
    Eigen::VectorXd q(n);
    double rz = r.dot(z);
    int it = 0;

    while (true) {
        if (r.norm() <= threshold) {
            // Confirm against the true residual; restart from it if the
            // recurrence has drifted.
            r = b - a * x;
            if (r.norm() <= threshold) break;
            z = (r.array() * inv_diag).matrix();
            p = z;
            rz = r.dot(z);
        }
        if (it >= max_iter) {
            const double res = (b - a * x).norm() / bnorm;
            throw SolverError(SolverError::Kind::MaxIterations,
                              fmt::format("CG did not converge in {} iterations (relative residual {:.3e})", it, res),
                              it, res);
        }
        a.multiply(p, q);
        const double curvature = p.dot(q);
        const double scale = p.dot((p.array() * diag.array()).matrix());
        if (!std::isfinite(curvature) || !std::isfinite(rz)) {
            throw SolverError(SolverError::Kind::NotANumber, fmt::format("NaN encountered in CG at iteration {}", it),
                              it, std::numeric_limits<double>::quiet_NaN());
        }
        if (curvature <= 1e-13 * scale) {
            const double res = (b - a * x).norm() / bnorm;
            throw SolverError(SolverError::Kind::InsufficientConstraints,
                              fmt::format("insufficient constraints: CG breakdown at iteration {} (relative "
                                          "residual {:.3e})",
                                          it, res),
                              it, res);
        }
        const double alpha = rz / curvature;
        x.noalias() += alpha * p;
        r.noalias() -= alpha * q;
        z = (r.array() * inv_diag).matrix();
        const double rz_next = r.dot(z);
        p = z + (rz_next / rz) * p;
        rz = rz_next;
        ++it;
    }
    return {it, r.norm() / bnorm};
}

}  // namespace fiberopt
