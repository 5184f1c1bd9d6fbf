#pragma once

#include "r2lml/common.hpp"
#include "r2lml/dataset.hpp"
#include "r2lml/metric_model.hpp"
#include "r2lml/mm.hpp"
#include "r2lml/psd.hpp"

#include <limits>
#include <string>
#include <vector>

namespace r2lml {

enum class Termination {
    epochs_exhausted,
    objective_converged,
    max_outer_blocks,
};

const char* termination_name(Termination t);

struct OuterRecord {
    int iteration = 0;
    double after_block1 = 0.0;
    double after_block2 = 0.0;
    double after_block3 = std::numeric_limits<double>::quiet_NaN(); // transductive only
    std::vector<double> nuclear_norms;
    std::vector<int> zero_columns;
    int mm_iterations = 0;
    MmStop mm_stop = MmStop::max_iters;
    bool similarity_accepted = false;
    double wall_seconds = 0.0;
};

struct TrainingTrace {
    double initial_objective = 0.0;
    std::vector<OuterRecord> records;
    Termination termination = Termination::epochs_exhausted;
    std::vector<PsdTraceRow> psd_rows; // filled when TrainOptions::record_psd_trace

    /// Initial objective followed by the value after every block, in order.
    std::vector<double> objective_sequence() const;
    double final_objective() const;
    /// True when no block raised the objective by more than `slack`.
    bool is_monotone(double slack = 1e-9) const;
};

struct TrainOptions {
    int restarts = 1;
    int threads = 1;
    bool record_psd_trace = false;
};

struct TrainResult {
    LocalMetricModel model;
    TrainingTrace trace;
    int best_restart = 0;
    std::vector<double> restart_objectives;
};

struct TransductiveResult {
    LocalMetricModel model; // test_coefficients holds the learned test columns
    SimilarityMatrix similarity;
    TrainingTrace trace;
    int best_restart = 0;
    std::vector<double> restart_objectives;
};

/// Two-block descent: PSD over the transforms, then MM over the
/// coefficients, until hyper.epochs outer iterations have run or the
/// objective changes by less than hyper.outer_tol.
TrainResult train_e_r2lml(const Dataset& train, const Hyperparams& hyper,
                          const TrainOptions& options = {});

/// Three-block descent over training + test samples; the third block
/// re-assigns the test-involving similarities.
TransductiveResult train_t_r2lml(const Dataset& train, const Matrix& test_features,
                                 const Hyperparams& hyper, const TrainOptions& options = {});

/// Initial transforms: leading-diagonal ones scaled by 1/sqrt(D), plus
/// uniform noise in [-0.01, 0.01] from the given seed.
std::vector<Matrix> initial_transforms(int k_metrics, int p_dim, Index d_dim, std::uint64_t seed);

/// Columns of `m` whose Euclidean norm is below `tol`.
std::vector<Index> zero_columns(const Matrix& m, double tol = 1e-8);

struct HyperGrid {
    std::vector<int> k_metrics;
    std::vector<double> lambdas;
    std::vector<double> step_lengths; // empty: use the base step length
};

struct ScoreRow {
    int k_metrics = 0;
    double lambda = 0.0;
    double step_length = 0.0;
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double objective = std::numeric_limits<double>::quiet_NaN();
    std::string error; // non-empty when training failed for this point
};

struct CrossValidation {
    Hyperparams best;
    std::vector<ScoreRow> table;
};

/// Trains every grid point on `train`, scores validation accuracy with the
/// k-NN rule and returns the argmax (ties: smaller K, then smaller lambda,
/// then smaller step). Per-point seeds derive from (base.seed, grid index).
CrossValidation cross_validate(const Dataset& train, const Dataset& val, const HyperGrid& grid,
                               const Hyperparams& base, Method method, int knn_k = 5,
                               const TrainOptions& options = {});

} // namespace r2lml
