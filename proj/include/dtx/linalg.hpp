#pragma once

#include <cmath>
#include <sstream>
#include <string>

#include <Eigen/Dense>

#include "dtx/errors.hpp"

namespace dtx {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Largest condition number (1-norm estimate) accepted before a solve is refused.
inline constexpr double kMaxConditionNumber = 1e12;

/// LU factorization (partial pivoting) of I - scale * M, reused across solves.
///
/// Every resolvent application in the library goes through this class: the
/// matrix is factorized once and each (I - scale M)^{-1} y or
/// (I - scale M)^{-T} y is a pair of triangular solves. Nothing is inverted
/// explicitly.
class ResolventSolver {
  public:
    ResolventSolver(const Matrix &m, double scale) : size_(m.rows()) {
        detail::require<parameter_error>(m.rows() == m.cols(), "resolvent needs a square matrix");
        if (size_ == 0) {
            return;
        }
        Matrix a = Matrix::Identity(size_, size_) - scale * m;
        lu_.compute(a);
        const double rc = lu_.rcond();
        if (!(rc > 0.0) || !std::isfinite(rc) || 1.0 / rc > kMaxConditionNumber) {
            std::ostringstream os;
            os << "I - " << scale << " M is ill-conditioned (rcond = " << rc << ")";
            throw numeric_error(os.str());
        }
        condition_ = 1.0 / rc;
    }

    Eigen::Index size() const noexcept { return size_; }

    /// 1-norm condition number estimate of I - scale M.
    double condition() const noexcept { return condition_; }

    /// (I - scale M)^{-1} y
    Vector solve(const Vector &y) const {
        check(y);
        if (size_ == 0) {
            return Vector(0);
        }
        return lu_.solve(y);
    }

    /// (I - scale M)^{-T} y, i.e. the dual system (I - scale M^T) x = y.
    Vector solve_transposed(const Vector &y) const {
        check(y);
        if (size_ == 0) {
            return Vector(0);
        }
        return lu_.transpose().solve(y);
    }

    /// (I - scale M)^{-1} Y, column by column.
    Matrix solve_columns(const Matrix &y) const {
        detail::require<parameter_error>(y.rows() == size_, "right-hand side has wrong row count");
        if (size_ == 0) {
            return Matrix(0, y.cols());
        }
        return lu_.solve(y);
    }

  private:
    void check(const Vector &y) const {
        detail::require<parameter_error>(y.size() == size_, "right-hand side has wrong length");
    }

    Eigen::Index size_;
    Eigen::PartialPivLU<Matrix> lu_;
    double condition_ = 1.0;
};

inline double max_abs(const Vector &v) { return v.size() == 0 ? 0.0 : v.cwiseAbs().maxCoeff(); }

}  // namespace dtx
