#pragma once

#include <span>
#include <vector>

namespace rkl {

/// Symmetric tridiagonal matrix: main diagonal plus first off-diagonal.
struct SymTridiag {
    std::vector<double> diag;
    std::vector<double> off; // size diag.size() - 1 (empty for 1x1)

    std::size_t size() const noexcept { return diag.size(); }
    std::vector<double> multiply(std::span<const double> x) const;
};

/// Precision matrix of the AR(1) correlation C_ij = rho^|i-j|.
SymTridiag ar1_precision(std::size_t n, double rho);

/// log det of the AR(1) correlation matrix, (n-1) log(1 - rho^2).
double ar1_log_det(std::size_t n, double rho);

/// LDL^T factorisation of a symmetric positive definite tridiagonal matrix.
class TridiagLdl {
public:
    /// Throws InvalidArgument if a pivot is not positive.
    explicit TridiagLdl(const SymTridiag& a);

    std::vector<double> solve(std::span<const double> b) const;
    double log_det() const;
    /// diag(A^{-1}) in O(n).
    std::vector<double> inverse_diagonal() const;
    /// Maps iid standard normals z to a draw from Normal(0, A^{-1}).
    std::vector<double> sample_inverse(std::span<const double> z) const;

private:
    SymTridiag a_;
    std::vector<double> d_; // pivots
    std::vector<double> l_; // unit lower bidiagonal entries
};

} // namespace rkl
