#include "rkl/tridiag.hpp"

#include "rkl/compensated_sum.hpp"
#include "rkl/error.hpp"

#include <cmath>

namespace rkl {

std::vector<double> SymTridiag::multiply(std::span<const double> x) const
{
    const std::size_t n = diag.size();
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = diag[i] * x[i];
        if (i > 0) {
            v += off[i - 1] * x[i - 1];
        }
        if (i + 1 < n) {
            v += off[i] * x[i + 1];
        }
        y[i] = v;
    }
    return y;
}

SymTridiag ar1_precision(std::size_t n, double rho)
{
    SymTridiag q;
    if (n == 1) {
        q.diag = {1.0};
        return q;
    }
    const double scale = 1.0 / (1.0 - rho * rho);
    q.diag.assign(n, (1.0 + rho * rho) * scale);
    q.diag.front() = scale;
    q.diag.back() = scale;
    q.off.assign(n - 1, -rho * scale);
    return q;
}

double ar1_log_det(std::size_t n, double rho)
{
    return static_cast<double>(n - 1) * std::log1p(-rho * rho);
}

TridiagLdl::TridiagLdl(const SymTridiag& a) : a_(a), d_(a.size()), l_(a.size() > 0 ? a.size() - 1 : 0)
{
    const std::size_t n = a.size();
    for (std::size_t i = 0; i < n; ++i) {
        double pivot = a.diag[i];
        if (i > 0) {
            pivot -= l_[i - 1] * l_[i - 1] * d_[i - 1];
        }
        if (!(pivot > 0.0)) {
            throw InvalidArgument("tridiagonal matrix is not positive definite");
        }
        d_[i] = pivot;
        if (i + 1 < n) {
            l_[i] = a.off[i] / pivot;
        }
    }
}

std::vector<double> TridiagLdl::solve(std::span<const double> b) const
{
    const std::size_t n = d_.size();
    std::vector<double> x(b.begin(), b.end());
    for (std::size_t i = 1; i < n; ++i) {
        x[i] -= l_[i - 1] * x[i - 1];
    }
    for (std::size_t i = 0; i < n; ++i) {
        x[i] /= d_[i];
    }
    for (std::size_t i = n; i-- > 1;) {
        x[i - 1] -= l_[i - 1] * x[i];
    }
    return x;
}

double TridiagLdl::log_det() const
{
    CompensatedSum s;
    for (double d : d_) {
        s += std::log(d);
    }
    return s.value();
}

std::vector<double> TridiagLdl::inverse_diagonal() const
{
    // Forward pivots d_ and backward pivots e; (A^{-1})_ii = 1 / (d_i + e_i - a_ii).
    const std::size_t n = d_.size();
    std::vector<double> e(n);
    e[n - 1] = a_.diag[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) {
        e[i] = a_.diag[i] - a_.off[i] * a_.off[i] / e[i + 1];
    }
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) {
        out[i] = 1.0 / (d_[i] + e[i] - a_.diag[i]);
    }
    return out;
}

std::vector<double> TridiagLdl::sample_inverse(std::span<const double> z) const
{
    // x = L^{-T} D^{-1/2} z has covariance L^{-T} D^{-1} L^{-1} = A^{-1}.
    const std::size_t n = d_.size();
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = z[i] / std::sqrt(d_[i]);
    }
    for (std::size_t i = n; i-- > 1;) {
        x[i - 1] -= l_[i - 1] * x[i];
    }
    return x;
}

} // namespace rkl
