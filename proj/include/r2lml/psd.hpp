#pragma once

#include "r2lml/common.hpp"
#include "r2lml/dataset.hpp"

#include <vector>

namespace r2lml {

// Proximal subgradient descent over the transforms: a subgradient step on
// the similarity/hinge loss followed by singular value soft-thresholding.

enum class HingeBoundaryRule {
    inactive_at_kink, // indicator is 0 when ||L dx||^2 == 1 exactly
};

struct PsdConfig {
    double step_length = 1e-6;
    int iterations = 500;
    HingeBoundaryRule hinge_rule = HingeBoundaryRule::inactive_at_kink;
    int threads = 1;           // metrics are updated independently
    bool record_trace = false; // per-iterate (k, objective, nuclear norm)

    void validate() const;
};

/// 2 L sum_{m,n} w_mn dx dx^T with
/// w_mn = s_mn g_m g_n - C (1 - s_mn) 1[||L dx||^2 < 1].
Matrix loss_subgradient(const Matrix& transform, const Matrix& features, const SimilarityMatrix& s,
                        const Eigen::Ref<const Vector>& g_k, double c);

/// U diag([sigma - threshold]_+) V^T. Optionally reports the thresholded
/// singular values (descending).
Matrix svt(const Matrix& m, double threshold, Vector* shrunk_values = nullptr);

struct PsdTraceRow {
    int iteration = 0; // 0 is the entry point
    int metric = 0;
    double objective = 0.0; // loss_k + lambda * ||L^k||_*
    double nuclear_norm = 0.0;
};

struct PsdResult {
    std::vector<Matrix> transforms;
    double entry_objective = 0.0;
    double best_objective = 0.0;
    std::vector<int> best_iteration; // per metric
    std::vector<PsdTraceRow> trace;
};

/// Runs cfg.iterations proximal steps per metric and keeps, for each metric,
/// the iterate with the lowest objective (the entry point included), so the
/// returned objective never exceeds the entry objective.
PsdResult psd_block(std::vector<Matrix> transforms, const Matrix& coefficients,
                    const Matrix& features, const SimilarityMatrix& s, double c, double lambda,
                    const PsdConfig& cfg);

} // namespace r2lml
