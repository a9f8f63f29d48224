#ifndef FSDE_TRIDIAGONAL_HPP
#define FSDE_TRIDIAGONAL_HPP

#include <Eigen/Dense>
#include <cmath>

#include "fsde/errors.hpp"

namespace fsde {

/// Symmetric tridiagonal N x N matrix, stored as main diagonal and
/// subdiagonal. The Gram matrix of the chain constraint has this form.
struct SymTridiagonal {
    Eigen::VectorXd diag;  // size N
    Eigen::VectorXd lower; // size N-1

    int size() const { return static_cast<int>(diag.size()); }

    Eigen::MatrixXd dense() const {
        const int n = size();
        Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
        M.diagonal() = diag;
        if (n > 1) {
            M.diagonal(1) = lower;
            M.diagonal(-1) = lower;
        }
        return M;
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const {
        const int n = size();
        Eigen::VectorXd y = diag.cwiseProduct(x);
        for (int i = 0; i + 1 < n; ++i) {
            y[i] += lower[i] * x[i + 1];
            y[i + 1] += lower[i] * x[i];
        }
        return y;
    }
};

/// Thomas solve without pivoting; valid because the Gram matrix is SPD near
/// the manifold. A pivot below 1e-14 * max|G| raises SingularGramError with
/// the offending index.
inline Eigen::VectorXd tridiag_solve(const SymTridiagonal& G, const Eigen::VectorXd& b) {
    const int n = G.size();
    if (b.size() != n) throw std::invalid_argument("tridiag_solve: size mismatch");
    const double scale = std::max(G.diag.cwiseAbs().maxCoeff(),
                                  n > 1 ? G.lower.cwiseAbs().maxCoeff() : 0.0);
    const double pivot_tol = 1e-14 * scale;

    Eigen::VectorXd c(n), z(n); // c: modified superdiagonal factors, z: rhs sweep
    double piv = G.diag[0];
    if (std::abs(piv) <= pivot_tol) throw SingularGramError(0, piv);
    z[0] = b[0] / piv;
    for (int i = 1; i < n; ++i) {
        c[i - 1] = G.lower[i - 1] / piv;
        piv = G.diag[i] - G.lower[i - 1] * c[i - 1];
        if (std::abs(piv) <= pivot_tol) throw SingularGramError(i, piv);
        z[i] = (b[i] - G.lower[i - 1] * z[i - 1]) / piv;
    }
    for (int i = n - 2; i >= 0; --i) z[i] -= c[i] * z[i + 1];
    return z;
}

/// log(det G) via the three-term recursion on the symmetrically normalized
/// matrix (unit/2 diagonal), avoiding under/overflow of the ds^(-2N) scaling.
inline double tridiag_log_determinant(const SymTridiagonal& G) {
    const int n = G.size();
    // Normalization: s_1 = sqrt(G_11), s_i = sqrt(G_ii / 2) for i >= 2, so
    // Gt = S^-1 G S^-1 has diag(1, 2, ..., 2) and off-diagonals in [-1, 1]
    // near the manifold. det G = det Gt * prod s_i^2.
    Eigen::VectorXd s(n);
    double log_scale = 0.0;
    for (int i = 0; i < n; ++i) {
        const double sii = (i == 0) ? G.diag[0] : G.diag[i] / 2.0;
        if (sii <= 0.0) throw SingularGramError(i, sii);
        s[i] = std::sqrt(sii);
        log_scale += std::log(sii);
    }
    double d_prev2 = 1.0; // det of empty block
    double d_prev1 = 1.0; // Gt_11
    double log_shift = 0.0;
    for (int k = 1; k < n; ++k) {
        const double off = G.lower[k - 1] / (s[k - 1] * s[k]);
        double dk = 2.0 * d_prev1 - off * off * d_prev2;
        if (dk <= 0.0) throw SingularGramError(k, dk);
        d_prev2 = d_prev1;
        d_prev1 = dk;
        if (d_prev1 > 1e150) { // rescale to stay in range for large N
            log_shift += std::log(d_prev1);
            d_prev2 /= d_prev1;
            d_prev1 = 1.0;
        }
    }
    return std::log(d_prev1) + log_shift + log_scale;
}

inline double tridiag_determinant(const SymTridiagonal& G) {
    return std::exp(tridiag_log_determinant(G));
}

} // namespace fsde

#endif
