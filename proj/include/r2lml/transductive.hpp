#pragma once

#include "r2lml/common.hpp"
#include "r2lml/dataset.hpp"

#include <span>

namespace r2lml {

/// psi(m, n) for test row m (sample N + m) against every sample n in
/// 0..N+M-1. The self column (N + m) holds +infinity.
struct PsiMatrix {
    Matrix entries; // M x (N + M)
    Index num_train = 0;

    Index num_test() const { return entries.rows(); }
    Index num_samples() const { return entries.cols(); }
};

/// psi_mn = sum_k ( d^k_mn g^k_m g^k_n - C [1 - d^k_mn]_+ ).
PsiMatrix compute_psi(std::span<const Matrix> transforms, const Matrix& coefficients,
                      const Matrix& features, Index num_train, double c);

/// Row-wise optimal assignment, before symmetrization: a row with negative
/// entries selects exactly those; otherwise it selects its smallest entry
/// (ties: smallest column). Returns an M x (N + M) 0/1 matrix whose self
/// column is 1.
BinaryMatrix assign_similarity_rows(const PsiMatrix& psi);

/// Replaces the test-involving entries of `current` with the row assignment,
/// symmetrized by OR. Train-train entries are left untouched.
SimilarityMatrix solve_similarity(const PsiMatrix& psi, const SimilarityMatrix& current);

/// Sum over test rows m and all columns n != self of s(N+m, n) psi(m, n).
double assignment_cost(const PsiMatrix& psi, const SimilarityMatrix& s);

/// Label similarities for the N training samples, seeded Bernoulli(0.5)
/// symmetric entries for every test-involving pair, then a repair pass that
/// gives each test row at least one off-diagonal 1.
SimilarityMatrix init_transductive_similarity(std::span<const int> train_labels, Index num_test,
                                              std::uint64_t seed);

} // namespace r2lml
