#include "r2lml/mm.hpp"

#include "r2lml/metric_model.hpp"

#include <cmath>

namespace r2lml {

double QuadraticForm::value(const Matrix& g) const {
    double q = 0.0;
    for (int k = 0; k < num_metrics(); ++k) {
        const auto row = g.row(k);
        q += row.dot(row * sbar_blocks[static_cast<std::size_t>(k)]);
    }
    return q;
}

Matrix QuadraticForm::apply(const Matrix& g) const {
    Matrix out(g.rows(), g.cols());
    for (int k = 0; k < num_metrics(); ++k)
        out.row(k).noalias() = (sbar_blocks[static_cast<std::size_t>(k)] * g.row(k).transpose()).transpose();
    return out;
}

double QuadraticForm::majorizer(const Matrix& g, const Matrix& g_ref) const {
    // x^T H y with H = S~ + mu I
    auto h_form = [this](const Matrix& x, const Matrix& y) {
        double v = 0.0;
        for (int k = 0; k < num_metrics(); ++k)
            v += x.row(k).dot(y.row(k) * sbar_blocks[static_cast<std::size_t>(k)]);
        return v + mu * x.cwiseProduct(y).sum();
    };
    return -h_form(g_ref, g_ref) + 2.0 * h_form(g_ref, g) - mu * g.squaredNorm();
}

Matrix build_sbar(const Matrix& transform, const Matrix& features, const SimilarityMatrix& s) {
    if (s.size() != features.rows()) throw DimensionError("similarity size must match the sample count");
    Matrix d = pairwise_sq_distances(features, transform);
    for (Index n = 0; n < d.cols(); ++n)
        for (Index m = 0; m < d.rows(); ++m)
            if (!s.entries(m, n)) d(m, n) = 0.0;
    return d;
}

double largest_eigenvalue(std::span<const Matrix> blocks) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& b : blocks) {
        if (b.rows() != b.cols()) throw DimensionError("quadratic-form blocks must be square");
        if (b.size() == 0) continue;
        const double scale = std::max(1.0, b.cwiseAbs().maxCoeff());
        if ((b - b.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
            throw InvariantError("quadratic-form block is not symmetric");
        Eigen::SelfAdjointEigenSolver<Matrix> eig(b, Eigen::EigenvaluesOnly);
        if (eig.info() != Eigen::Success) throw Error("symmetric eigensolve failed");
        best = std::max(best, eig.eigenvalues().maxCoeff());
    }
    return best;
}

QuadraticForm make_quadratic_form(std::vector<Matrix> blocks) {
    QuadraticForm qf;
    qf.sbar_blocks = std::move(blocks);
    qf.lambda_max = qf.sbar_blocks.empty() ? 0.0 : largest_eigenvalue(qf.sbar_blocks);
    qf.mu = -qf.lambda_max;
    return qf;
}

QuadraticForm build_quadratic_form(std::span<const Matrix> transforms, const Matrix& features,
                                   const SimilarityMatrix& s) {
    std::vector<Matrix> blocks;
    blocks.reserve(transforms.size());
    for (const auto& l : transforms) blocks.push_back(build_sbar(l, features, s));
    return make_quadratic_form(std::move(blocks));
}

SimplexQpSolution solve_simplex_qp(double c, const Matrix& d, double tol) {
    if (!(c > 0.0)) throw ConfigError("simplex QP needs c > 0");
    const Index k = d.rows(), q = d.cols();
    SimplexQpSolution sol{Matrix(k, q), Vector(q)};
    if (k == 1) {
        sol.g.setOnes();
        sol.alpha = (d.row(0).array() + c).matrix().transpose();
        return sol;
    }
    for (Index n = 0; n < q; ++n) {
        const auto col = d.col(n);
        auto excess = [&](double alpha) { return (alpha - col.array()).cwiseMax(0.0).sum() - c; };
        double lo = col.minCoeff();
        double hi = lo + c;
        double alpha = hi;
        for (int it = 0; it < 200; ++it) {
            alpha = 0.5 * (lo + hi);
            const double r = excess(alpha);
            if (std::abs(r) <= tol) break;
            (r < 0.0 ? lo : hi) = alpha;
        }
        // The active set {d_k < alpha} pins alpha in closed form; use it when
        // it is self-consistent.
        double active_sum = 0.0;
        int active = 0;
        for (Index i = 0; i < k; ++i)
            if (col(i) < alpha) {
                active_sum += col(i);
                ++active;
            }
        if (active > 0) {
            const double exact = (c + active_sum) / active;
            bool consistent = true;
            for (Index i = 0; i < k && consistent; ++i)
                consistent = (col(i) < alpha) == (col(i) < exact);
            if (consistent) alpha = exact;
        }
        sol.alpha(n) = alpha;
        sol.g.col(n) = ((alpha - col.array()).cwiseMax(0.0) / c).matrix();
    }
    return sol;
}

const char* mm_stop_name(MmStop stop) {
    switch (stop) {
    case MmStop::converged: return "converged";
    case MmStop::max_iters: return "max_iters";
    case MmStop::stalled: return "stalled";
    }
    return "unknown";
}

double simplex_violation(const Matrix& g) {
    double worst = 0.0;
    for (Index n = 0; n < g.cols(); ++n) {
        worst = std::max(worst, std::abs(g.col(n).sum() - 1.0));
        worst = std::max(worst, -g.col(n).minCoeff());
    }
    return worst;
}

MmResult mm_block(const Matrix& g_init, const QuadraticForm& qf, int max_iters, double tol, double bisection_tol) {
    if (g_init.rows() != qf.num_metrics() || g_init.cols() != qf.size())
        throw DimensionError("initial coefficients must be K x Q");
    if (simplex_violation(g_init) > 1e-6) throw InvariantError("initial coefficients are off the simplex");
    if (max_iters < 1) throw ConfigError("MM iteration cap must be positive");

    MmResult result;
    result.g = g_init;
    double q_prev = qf.value(result.g);
    result.q_trace.push_back(q_prev);

    // A zero form has lambda_max = 0 and every feasible point is optimal; the
    // step then reduces to the minimum-norm point (uniform coefficients).
    const bool zero_form = !(qf.lambda_max > 0.0);
    const double c = zero_form ? 1.0 : -2.0 * qf.mu;

    for (int it = 1; it <= max_iters; ++it) {
        Matrix d = zero_form ? Matrix::Zero(result.g.rows(), result.g.cols())
                             : Matrix(2.0 * (qf.apply(result.g) + qf.mu * result.g));
        Matrix next = solve_simplex_qp(c, d, bisection_tol).g;
        const double q_next = qf.value(next);
        if (q_next > q_prev) {
            result.stop = MmStop::stalled;
            return result;
        }
        result.g = std::move(next);
        result.q_trace.push_back(q_next);
        result.iterations = it;
        const double change = q_prev - q_next;
        q_prev = q_next;
        if (change < tol) {
            result.stop = MmStop::converged;
            return result;
        }
    }
    result.stop = MmStop::max_iters;
    return result;
}

} // namespace r2lml
