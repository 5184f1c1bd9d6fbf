#include "r2lml/psd.hpp"

#include "r2lml/metric_model.hpp"
#include "r2lml/svd.hpp"

#include <cmath>
#include <exception>
#include <thread>

namespace r2lml {

void PsdConfig::validate() const {
    if (!(step_length >= 0.0) || !std::isfinite(step_length)) throw ConfigError("PSD step length must be finite and >= 0");
    if (iterations < 1) throw ConfigError("PSD iterations must be positive");
    if (threads < 1) throw ConfigError("thread count must be positive");
}

namespace {

struct LossEval {
    double loss = 0.0;
    Matrix subgradient;
};

// Loss of one metric and (optionally) a subgradient, sharing the pairwise
// distance computation.
LossEval evaluate_metric(const Matrix& transform, const Matrix& features, const SimilarityMatrix& s,
                         const Eigen::Ref<const Vector>& g, double c, bool want_subgradient) {
    const Index q = features.rows();
    const Matrix d = pairwise_sq_distances(features, transform);
    Matrix w(q, q);
    double similar = 0.0, hinge = 0.0;
    for (Index n = 0; n < q; ++n)
        for (Index m = 0; m < q; ++m) {
            if (s.entries(m, n)) {
                const double gg = g(m) * g(n);
                similar += d(m, n) * gg;
                w(m, n) = gg;
            } else if (d(m, n) < 1.0) {
                hinge += 1.0 - d(m, n);
                w(m, n) = -c;
            } else {
                w(m, n) = 0.0;
            }
        }
    LossEval out;
    out.loss = similar + c * hinge;
    if (want_subgradient) {
        // sum_{m,n} w_mn dx dx^T = X^T (diag(W1 + W^T 1) - W - W^T) X
        Matrix lap = -(w + w.transpose());
        lap.diagonal() += w.rowwise().sum() + w.colwise().sum().transpose();
        const Matrix y = features * transform.transpose();
        out.subgradient = 2.0 * y.transpose() * (lap * features);
    }
    return out;
}

struct MetricRun {
    Matrix best;
    double entry = 0.0;
    double best_objective = 0.0;
    int best_iteration = 0;
    std::vector<PsdTraceRow> trace;
};

MetricRun run_metric(int k, Matrix transform, const Matrix& features, const SimilarityMatrix& s,
                     const Eigen::Ref<const Vector>& g, double c, double lambda, const PsdConfig& cfg) {
    MetricRun run;
    const double threshold = cfg.step_length * lambda;
    double nn = (lambda != 0.0 || cfg.record_trace) ? nuclear_norm(transform) : 0.0;
    LossEval eval = evaluate_metric(transform, features, s, g, c, true);
    run.entry = eval.loss + lambda * nn;
    if (!std::isfinite(run.entry))
        throw DivergenceError("metric " + std::to_string(k) + ": non-finite objective at PSD entry");
    run.best = transform;
    run.best_objective = run.entry;
    if (cfg.record_trace) run.trace.push_back({0, k, run.entry, nn});

    Vector shrunk;
    for (int t = 1; t <= cfg.iterations; ++t) {
        Matrix half = transform - cfg.step_length * eval.subgradient;
        if (threshold > 0.0) {
            transform = svt(half, threshold, &shrunk);
            nn = shrunk.sum();
        } else {
            transform = std::move(half);
            if (!transform.allFinite())
                throw DivergenceError("metric " + std::to_string(k) + ": non-finite transform at PSD iteration " +
                                      std::to_string(t) + " (step length too large?)");
            nn = (lambda != 0.0 || cfg.record_trace) ? nuclear_norm(transform) : 0.0;
        }
        eval = evaluate_metric(transform, features, s, g, c, t < cfg.iterations);
        const double value = eval.loss + lambda * nn;
        if (!std::isfinite(value))
            throw DivergenceError("metric " + std::to_string(k) + ": non-finite objective at PSD iteration " +
                                  std::to_string(t) + " (step length too large?)");
        if (cfg.record_trace) run.trace.push_back({t, k, value, nn});
        if (value < run.best_objective) {
            run.best_objective = value;
            run.best = transform;
            run.best_iteration = t;
        }
    }
    return run;
}

} // namespace

Matrix loss_subgradient(const Matrix& transform, const Matrix& features, const SimilarityMatrix& s,
                        const Eigen::Ref<const Vector>& g_k, double c) {
    if (transform.cols() != features.cols()) throw DimensionError("transform and feature dimensions disagree");
    if (s.size() != features.rows() || g_k.size() != features.rows())
        throw DimensionError("similarity / coefficient length must match the sample count");
    return evaluate_metric(transform, features, s, g_k, c, true).subgradient;
}

Matrix svt(const Matrix& m, double threshold, Vector* shrunk_values) {
    if (!(threshold >= 0.0)) throw ConfigError("SVT threshold must be nonnegative");
    if (threshold == 0.0) {
        const Vector values = singular_values(m);
        if (shrunk_values) *shrunk_values = values;
        return m;
    }
    const ThinSvd svd = thin_svd(m);
    const Vector shrunk = (svd.singular.array() - threshold).cwiseMax(0.0).matrix();
    if (shrunk_values) *shrunk_values = shrunk;
    Index rank = 0;
    while (rank < shrunk.size() && shrunk(rank) > 0.0) ++rank;
    if (rank == 0) return Matrix::Zero(m.rows(), m.cols());
    return svd.u.leftCols(rank) * shrunk.head(rank).asDiagonal() * svd.v.leftCols(rank).transpose();
}

PsdResult psd_block(std::vector<Matrix> transforms, const Matrix& coefficients, const Matrix& features,
                    const SimilarityMatrix& s, double c, double lambda, const PsdConfig& cfg) {
    cfg.validate();
    const auto k_count = static_cast<int>(transforms.size());
    if (coefficients.rows() != k_count || coefficients.cols() != features.rows())
        throw DimensionError("coefficients must be K x Q");
    if (s.size() != features.rows()) throw DimensionError("similarity size must match the sample count");

    std::vector<MetricRun> runs(static_cast<std::size_t>(k_count));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(k_count));
    auto work = [&](int k) {
        try {
            const Vector g = coefficients.row(k).transpose();
            runs[static_cast<std::size_t>(k)] =
                run_metric(k, transforms[static_cast<std::size_t>(k)], features, s, g, c, lambda, cfg);
        } catch (...) {
            errors[static_cast<std::size_t>(k)] = std::current_exception();
        }
    };
    const int threads = std::min(cfg.threads, k_count);
    if (threads <= 1) {
        for (int k = 0; k < k_count; ++k) work(k);
    } else {
        std::vector<std::jthread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                for (int k = t; k < k_count; k += threads) work(k);
            });
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);

    PsdResult result;
    for (int k = 0; k < k_count; ++k) {
        auto& run = runs[static_cast<std::size_t>(k)];
        result.entry_objective += run.entry;
        result.best_objective += run.best_objective;
        result.best_iteration.push_back(run.best_iteration);
        result.transforms.push_back(std::move(run.best));
        result.trace.insert(result.trace.end(), run.trace.begin(), run.trace.end());
    }
    return result;
}

} // namespace r2lml
