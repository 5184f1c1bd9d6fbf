#include "r2lml/trainer.hpp"

#include "r2lml/evaluation.hpp"
#include "r2lml/transductive.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <tuple>

namespace r2lml {

const char* termination_name(Termination t) {
    switch (t) {
    case Termination::epochs_exhausted: return "epochs_exhausted";
    case Termination::objective_converged: return "objective_converged";
    case Termination::max_outer_blocks: return "max_outer_blocks";
    }
    return "unknown";
}

std::vector<double> TrainingTrace::objective_sequence() const {
    std::vector<double> seq{initial_objective};
    for (const auto& r : records) {
        seq.push_back(r.after_block1);
        seq.push_back(r.after_block2);
        if (!std::isnan(r.after_block3)) seq.push_back(r.after_block3);
    }
    return seq;
}

double TrainingTrace::final_objective() const { return objective_sequence().back(); }

bool TrainingTrace::is_monotone(double slack) const {
    const auto seq = objective_sequence();
    for (std::size_t i = 1; i < seq.size(); ++i)
        if (seq[i] > seq[i - 1] + slack) return false;
    return true;
}

std::vector<Matrix> initial_transforms(int k_metrics, int p_dim, Index d_dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> noise(-0.01, 0.01);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_dim));
    std::vector<Matrix> out;
    for (int k = 0; k < k_metrics; ++k) {
        Matrix l(p_dim, d_dim);
        for (Index i = 0; i < l.rows(); ++i)
            for (Index j = 0; j < l.cols(); ++j) l(i, j) = (i == j ? scale : 0.0) + noise(rng);
        out.push_back(std::move(l));
    }
    return out;
}

std::vector<Index> zero_columns(const Matrix& m, double tol) {
    std::vector<Index> cols;
    for (Index j = 0; j < m.cols(); ++j)
        if (m.col(j).norm() < tol) cols.push_back(j);
    return cols;
}

namespace {

struct RunOutput {
    std::vector<Matrix> transforms;
    Matrix coefficients; // K x Q
    SimilarityMatrix similarity;
    TrainingTrace trace;
};

void require_finite(double value, const char* block, int iteration) {
    if (!std::isfinite(value))
        throw DivergenceError(std::string("non-finite objective after ") + block + " in outer iteration " +
                              std::to_string(iteration));
}

// One seeded run of the block-coordinate descent. `features` stacks the N
// training rows followed by the M test rows (M = 0 for the inductive case).
RunOutput run_descent(const Matrix& features, const std::vector<int>& train_labels, Index num_test,
                      const Hyperparams& hyper, std::uint64_t seed, const TrainOptions& options,
                      bool transductive) {
    const Index q = features.rows();
    const Index d = features.cols();
    const int k = hyper.k_metrics;
    const double c = hyper.c, lambda = hyper.lambda;
    // With no test samples the third block is empty and the run is the
    // inductive two-block descent.
    transductive = transductive && num_test > 0;

    RunOutput out;
    out.transforms = initial_transforms(k, hyper.output_dim(d), d, derive_seed(seed, "init"));
    out.coefficients = Matrix::Constant(k, q, 1.0 / k);
    out.similarity = init_transductive_similarity(train_labels, num_test, derive_seed(seed, "similarity"));

    PsdConfig psd_cfg;
    psd_cfg.step_length = hyper.step_length;
    psd_cfg.iterations = hyper.psd_iters_per_epoch;
    psd_cfg.threads = options.threads;
    psd_cfg.record_trace = options.record_psd_trace;

    auto current_objective = [&] {
        return objective(out.transforms, out.coefficients, features, out.similarity, c, lambda);
    };

    auto& trace = out.trace;
    trace.initial_objective = current_objective();
    require_finite(trace.initial_objective, "initialization", 0);
    double previous = trace.initial_objective;
    const int limit = transductive ? hyper.max_outer_blocks : hyper.epochs;
    trace.termination = transductive ? Termination::max_outer_blocks : Termination::epochs_exhausted;

    for (int it = 1; it <= limit; ++it) {
        const auto start = std::chrono::steady_clock::now();
        OuterRecord rec;
        rec.iteration = it;

        PsdResult psd = psd_block(out.transforms, out.coefficients, features, out.similarity, c, lambda, psd_cfg);
        out.transforms = std::move(psd.transforms);
        for (auto& row : psd.trace) {
            row.iteration += (it - 1) * hyper.psd_iters_per_epoch;
            trace.psd_rows.push_back(row);
        }
        rec.after_block1 = current_objective();
        require_finite(rec.after_block1, "block 1", it);

        const QuadraticForm qf = build_quadratic_form(out.transforms, features, out.similarity);
        MmResult mm = mm_block(out.coefficients, qf, hyper.mm_max_iters, hyper.mm_tol, hyper.bisection_tol);
        out.coefficients = std::move(mm.g);
        rec.mm_iterations = mm.iterations;
        rec.mm_stop = mm.stop;
        rec.after_block2 = current_objective();
        require_finite(rec.after_block2, "block 2", it);
        double latest = rec.after_block2;

        if (transductive) {
            const PsiMatrix psi = compute_psi(out.transforms, out.coefficients, features, q - num_test, c);
            SimilarityMatrix candidate = solve_similarity(psi, out.similarity);
            const double value = objective(out.transforms, out.coefficients, features, candidate, c, lambda);
            // The OR-symmetrized assignment is row-optimal but can lose to the
            // incumbent when test rows share test-test entries; keep the
            // better of the two.
            if (value <= rec.after_block2) {
                out.similarity = std::move(candidate);
                rec.similarity_accepted = true;
                rec.after_block3 = value;
            } else {
                rec.after_block3 = rec.after_block2;
            }
            require_finite(rec.after_block3, "block 3", it);
            latest = rec.after_block3;
        }

        for (const auto& l : out.transforms) {
            rec.nuclear_norms.push_back(nuclear_norm(l));
            rec.zero_columns.push_back(static_cast<int>(zero_columns(l).size()));
        }
        rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        trace.records.push_back(std::move(rec));

        if (std::abs(previous - latest) < hyper.outer_tol) {
            trace.termination = Termination::objective_converged;
            break;
        }
        previous = latest;
    }
    return out;
}

std::uint64_t restart_seed(std::uint64_t seed, int restart) {
    return restart == 0 ? seed : derive_seed(seed, "restart-" + std::to_string(restart));
}

template <class Run>
auto best_of_restarts(int restarts, std::uint64_t seed, Run&& run) {
    if (restarts < 1) throw ConfigError("restarts must be positive");
    std::vector<double> finals;
    RunOutput best;
    int best_index = 0;
    for (int r = 0; r < restarts; ++r) {
        RunOutput out = run(restart_seed(seed, r));
        const double f = out.trace.final_objective();
        finals.push_back(f);
        if (r == 0 || f < finals[static_cast<std::size_t>(best_index)]) {
            best = std::move(out);
            best_index = r;
        }
    }
    return std::tuple{std::move(best), best_index, std::move(finals)};
}

LocalMetricModel base_model(const Dataset& train, const Hyperparams& hyper, Method method) {
    LocalMetricModel model;
    model.method = method;
    model.hyper = hyper;
    model.train_features = train.features;
    model.train_labels = train.labels;
    model.class_names = train.class_names;
    return model;
}

} // namespace

TrainResult train_e_r2lml(const Dataset& train, const Hyperparams& hyper, const TrainOptions& options) {
    train.validate();
    if (train.size() < 2) throw ConfigError("training needs at least two samples");
    hyper.validate(train.dim());

    auto [out, best_index, finals] = best_of_restarts(options.restarts, hyper.seed, [&](std::uint64_t seed) {
        return run_descent(train.features, train.labels, 0, hyper, seed, options, false);
    });
    TrainResult result;
    result.model = base_model(train, hyper, Method::e_r2lml);
    result.model.transforms = std::move(out.transforms);
    result.model.coefficients = std::move(out.coefficients);
    result.trace = std::move(out.trace);
    result.best_restart = best_index;
    result.restart_objectives = std::move(finals);
    return result;
}

TransductiveResult train_t_r2lml(const Dataset& train, const Matrix& test_features, const Hyperparams& hyper,
                                 const TrainOptions& options) {
    train.validate();
    if (train.size() < 2) throw ConfigError("training needs at least two samples");
    if (test_features.rows() > 0 && test_features.cols() != train.dim())
        throw DimensionError("test features have " + std::to_string(test_features.cols()) +
                             " columns, training features have " + std::to_string(train.dim()));
    if (!test_features.allFinite()) throw InvariantError("test features contain non-finite values");
    hyper.validate(train.dim());

    const Index n = train.size(), m = test_features.rows();
    Matrix stacked(n + m, train.dim());
    stacked.topRows(n) = train.features;
    if (m > 0) stacked.bottomRows(m) = test_features;

    auto [out, best_index, finals] = best_of_restarts(options.restarts, hyper.seed, [&](std::uint64_t seed) {
        return run_descent(stacked, train.labels, m, hyper, seed, options, true);
    });
    TransductiveResult result;
    result.model = base_model(train, hyper, Method::t_r2lml);
    result.model.transforms = std::move(out.transforms);
    result.model.coefficients = out.coefficients.leftCols(n);
    result.model.test_features = test_features;
    result.model.test_coefficients = out.coefficients.rightCols(m);
    result.similarity = std::move(out.similarity);
    result.trace = std::move(out.trace);
    result.best_restart = best_index;
    result.restart_objectives = std::move(finals);
    return result;
}

CrossValidation cross_validate(const Dataset& train, const Dataset& val, const HyperGrid& grid,
                               const Hyperparams& base, Method method, int knn_k, const TrainOptions& options) {
    if (grid.k_metrics.empty() || grid.lambdas.empty()) throw ConfigError("hyperparameter grids must be nonempty");
    if (val.size() < 1) throw ConfigError("validation set is empty");
    const std::vector<double> steps = grid.step_lengths.empty() ? std::vector<double>{base.step_length} : grid.step_lengths;
    const int k_eff = std::max(1, std::min<int>(knn_k, static_cast<int>(train.size())));

    CrossValidation cv;
    int best_row = -1;
    std::vector<Hyperparams> tried;
    std::size_t index = 0;
    for (int k : grid.k_metrics)
        for (double lambda : grid.lambdas)
            for (double step : steps) {
                Hyperparams h = base;
                h.k_metrics = k;
                h.lambda = lambda;
                h.step_length = step;
                h.seed = derive_seed(base.seed, "grid-" + std::to_string(index++));
                ScoreRow row;
                row.k_metrics = k;
                row.lambda = lambda;
                row.step_length = step;
                try {
                    if (method == Method::e_r2lml) {
                        TrainResult r = train_e_r2lml(train, h, options);
                        row.objective = r.trace.final_objective();
                        row.accuracy = evaluate(r.model, val, Method::e_r2lml, nullptr, k_eff).accuracy;
                    } else {
                        TransductiveResult r = train_t_r2lml(train, val.features, h, options);
                        row.objective = r.trace.final_objective();
                        row.accuracy =
                            evaluate(r.model, val, Method::t_r2lml, &r.model.test_coefficients, k_eff).accuracy;
                    }
                } catch (const Error& e) {
                    row.error = e.what();
                }
                cv.table.push_back(row);
                tried.push_back(h);
                if (!row.error.empty()) continue;
                const auto i = static_cast<int>(cv.table.size()) - 1;
                if (best_row < 0) {
                    best_row = i;
                    continue;
                }
                const auto& b = cv.table[static_cast<std::size_t>(best_row)];
                const auto key = std::tuple(-row.accuracy, row.k_metrics, row.lambda, row.step_length);
                const auto best_key = std::tuple(-b.accuracy, b.k_metrics, b.lambda, b.step_length);
                if (key < best_key) best_row = i;
            }
    if (best_row < 0) throw Error("cross-validation failed: every grid point raised an error");
    cv.best = tried[static_cast<std::size_t>(best_row)];
    return cv;
}

} // namespace r2lml
