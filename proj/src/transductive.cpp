#include "r2lml/transductive.hpp"

#include "r2lml/metric_model.hpp"

#include <limits>
#include <random>

namespace r2lml {

PsiMatrix compute_psi(std::span<const Matrix> transforms, const Matrix& coefficients, const Matrix& features,
                      Index num_train, double c) {
    const Index q = features.rows();
    if (num_train < 0 || num_train > q) throw DimensionError("num_train exceeds the sample count");
    if (coefficients.rows() != static_cast<Index>(transforms.size()) || coefficients.cols() != q)
        throw DimensionError("transductive coefficients must be K x (N + M)");
    const Index m_count = q - num_train;
    PsiMatrix psi{Matrix::Zero(m_count, q), num_train};
    for (std::size_t k = 0; k < transforms.size(); ++k) {
        const Matrix d = pairwise_sq_distances(features, transforms[k]);
        const auto g = coefficients.row(static_cast<Index>(k));
        for (Index n = 0; n < q; ++n)
            for (Index m = 0; m < m_count; ++m) {
                const Index row = num_train + m;
                const double dist = d(row, n);
                psi.entries(m, n) += dist * g(row) * g(n) - c * std::max(1.0 - dist, 0.0);
            }
    }
    for (Index m = 0; m < m_count; ++m) psi.entries(m, num_train + m) = std::numeric_limits<double>::infinity();
    return psi;
}

BinaryMatrix assign_similarity_rows(const PsiMatrix& psi) {
    const Index m_count = psi.num_test(), q = psi.num_samples();
    BinaryMatrix rows = BinaryMatrix::Zero(m_count, q);
    for (Index m = 0; m < m_count; ++m) {
        const Index self = psi.num_train + m;
        rows(m, self) = 1;
        bool any_negative = false;
        Index argmin = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Index n = 0; n < q; ++n) {
            if (n == self) continue;
            const double v = psi.entries(m, n);
            if (v < 0.0) {
                rows(m, n) = 1;
                any_negative = true;
            }
            if (argmin < 0 || v < best) {
                best = v;
                argmin = n;
            }
        }
        if (!any_negative && argmin >= 0) rows(m, argmin) = 1;
    }
    return rows;
}

SimilarityMatrix solve_similarity(const PsiMatrix& psi, const SimilarityMatrix& current) {
    const Index n_train = psi.num_train, q = psi.num_samples();
    if (current.size() != q) throw DimensionError("similarity size must equal N + M");
    const BinaryMatrix rows = assign_similarity_rows(psi);
    SimilarityMatrix s = current;
    s.entries.bottomRows(q - n_train).setZero();
    s.entries.rightCols(q - n_train).setZero();
    for (Index m = 0; m < rows.rows(); ++m)
        for (Index n = 0; n < q; ++n)
            if (rows(m, n)) {
                s.entries(n_train + m, n) = 1;
                s.entries(n, n_train + m) = 1;
            }
    return s;
}

double assignment_cost(const PsiMatrix& psi, const SimilarityMatrix& s) {
    double cost = 0.0;
    for (Index m = 0; m < psi.num_test(); ++m) {
        const Index row = psi.num_train + m;
        for (Index n = 0; n < psi.num_samples(); ++n)
            if (n != row && s.entries(row, n)) cost += psi.entries(m, n);
    }
    return cost;
}

SimilarityMatrix init_transductive_similarity(std::span<const int> train_labels, Index num_test, std::uint64_t seed) {
    const auto n_train = static_cast<Index>(train_labels.size());
    const Index q = n_train + num_test;
    SimilarityMatrix s{BinaryMatrix::Zero(q, q)};
    s.entries.topLeftCorner(n_train, n_train) = similarity_from_labels(train_labels).entries;
    if (num_test == 0) return s;

    std::mt19937_64 rng(derive_seed(seed, "similarity"));
    std::bernoulli_distribution coin(0.5);
    for (Index j = n_train; j < q; ++j) {
        s.entries(j, j) = 1;
        for (Index i = 0; i < j; ++i) {
            const std::uint8_t v = coin(rng) ? 1 : 0;
            s.entries(i, j) = v;
            s.entries(j, i) = v;
        }
    }
    std::uniform_int_distribution<Index> pick(0, q - 2);
    for (Index j = n_train; j < q; ++j) {
        if (s.entries.row(j).cast<int>().sum() >= 2) continue;
        Index other = pick(rng);
        if (other >= j) ++other; // skip the diagonal
        s.entries(j, other) = 1;
        s.entries(other, j) = 1;
    }
    return s;
}

} // namespace r2lml
