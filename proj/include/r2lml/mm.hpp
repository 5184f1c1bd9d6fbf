#pragma once

#include "r2lml/common.hpp"
#include "r2lml/dataset.hpp"

#include <span>
#include <vector>

namespace r2lml {

/// q(g) = g^T S~ g for the block-diagonal S~ = diag(Sbar^1 .. Sbar^K).
/// Coefficients are stored as K x Q matrices: row k is g^k, column n holds
/// the K coefficients of sample n.
struct QuadraticForm {
    std::vector<Matrix> sbar_blocks; // K symmetric, hollow, nonnegative Q x Q
    double lambda_max = 0.0;         // largest eigenvalue of S~
    double mu = 0.0;                 // -lambda_max

    int num_metrics() const { return static_cast<int>(sbar_blocks.size()); }
    Index size() const { return sbar_blocks.empty() ? 0 : sbar_blocks.front().rows(); }

    double value(const Matrix& g) const;
    /// Row k of the result is Sbar^k g^k.
    Matrix apply(const Matrix& g) const;
    /// Majorizer q(g | g') = -g'^T H g' + 2 g'^T H g - mu ||g||^2, H = S~ + mu I.
    double majorizer(const Matrix& g, const Matrix& g_ref) const;
};

/// Entry (m, n) = s_mn ||L (x_m - x_n)||^2.
Matrix build_sbar(const Matrix& transform, const Matrix& features, const SimilarityMatrix& s);

/// Largest eigenvalue of the block-diagonal matrix, computed block by block.
double largest_eigenvalue(std::span<const Matrix> blocks);

QuadraticForm make_quadratic_form(std::vector<Matrix> blocks);
QuadraticForm build_quadratic_form(std::span<const Matrix> transforms, const Matrix& features,
                                   const SimilarityMatrix& s);

struct SimplexQpSolution {
    Matrix g;     // K x Q
    Vector alpha; // per-sample multiplier of the sum-to-one constraint
};

/// Minimizes (c/2)||g||^2 + d^T g subject to every column of g lying on the
/// probability simplex. The solution is g_i = [alpha_n - d_i]_+ / c where
/// alpha_n solves sum_k [alpha_n - d_kn]_+ = c; alpha_n is located by
/// bisection on [min_k d_kn, min_k d_kn + c] and then refined from the
/// resulting active set.
SimplexQpSolution solve_simplex_qp(double c, const Matrix& d, double tol = 1e-10);

enum class MmStop {
    converged, // |q(g) - q(g')| < tol
    max_iters,
    stalled,   // the next iterate would have raised q by round-off; not taken
};

const char* mm_stop_name(MmStop stop);

struct MmResult {
    Matrix g;
    std::vector<double> q_trace; // q(g_0), q(g_1), ...
    MmStop stop = MmStop::max_iters;
    int iterations = 0;
};

/// Majorization-minimization over the coefficient simplices.
/// Throws InvariantError if g_init is off the simplex by more than 1e-6.
MmResult mm_block(const Matrix& g_init, const QuadraticForm& qf, int max_iters, double tol,
                  double bisection_tol = 1e-10);

/// max over samples of |sum_k g_kn - 1| and of negative parts.
double simplex_violation(const Matrix& g);

} // namespace r2lml
