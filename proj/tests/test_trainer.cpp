#include "r2lml/evaluation.hpp"
#include "r2lml/mm.hpp"
#include "r2lml/trainer.hpp"
#include "r2lml/transductive.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <chrono>

using namespace r2lml;

namespace {

Hyperparams small_hyper(int k, double lambda, std::uint64_t seed) {
    Hyperparams h;
    h.k_metrics = k;
    h.lambda = lambda;
    h.step_length = 1e-3;
    h.epochs = 3;
    h.psd_iters_per_epoch = 40;
    h.mm_max_iters = 200;
    h.max_outer_blocks = 3;
    h.seed = seed;
    return h;
}

Dataset small_synth(std::uint64_t seed, int n_train = 20, int dim = 4) {
    SynthConfig cfg;
    cfg.dim = dim;
    cfg.n_train = n_train;
    cfg.n_test = 8;
    cfg.bayes_accuracy = 0.8;
    cfg.seed = seed;
    return synth_gaussian_mixture(cfg).train;
}

} // namespace

TEST(InitialTransforms, ScaledDiagonalPlusSmallNoise) {
    const auto ls = initial_transforms(3, 2, 4, 7);
    ASSERT_EQ(ls.size(), 3u);
    for (const auto& l : ls) {
        ASSERT_EQ(l.rows(), 2);
        ASSERT_EQ(l.cols(), 4);
        Matrix base = Matrix::Zero(2, 4);
        base(0, 0) = base(1, 1) = 0.5;
        EXPECT_LE((l - base).cwiseAbs().maxCoeff(), 0.01);
    }
    EXPECT_NE(ls[0], ls[1]);
    EXPECT_EQ(initial_transforms(3, 2, 4, 7)[2], ls[2]);
}

TEST(ZeroColumns, Threshold) {
    Matrix m = Matrix::Ones(2, 3);
    m.col(1).setZero();
    m(0, 2) = 1e-9;
    m(1, 2) = 0.0;
    EXPECT_EQ(zero_columns(m), (std::vector<Index>{1, 2}));
}

TEST(TrainE, SingleMetricHasUnitCoefficients) {
    const TrainResult r = train_e_r2lml(small_synth(1), small_hyper(1, 0.1, 1));
    EXPECT_TRUE((r.model.coefficients.array() == 1.0).all());
    r.model.validate();
}

TEST(TrainE, ToyObjectiveDropsAndLooAccuracyDominates) {
    const Dataset toy = make_toy_dataset(1, 0.0, 0);
    Hyperparams h = small_hyper(2, 0.0, 3);
    h.step_length = 1e-2;
    h.psd_iters_per_epoch = 200;
    const TrainResult r = train_e_r2lml(toy, h);
    EXPECT_LT(r.trace.final_objective(), r.trace.initial_objective);
    EXPECT_GE(loo_accuracy(r.model), euclidean_loo_accuracy(toy));
}

TEST(TrainE, DeterministicForSeed) {
    const Dataset d = small_synth(2);
    const TrainResult a = train_e_r2lml(d, small_hyper(2, 0.5, 9));
    const TrainResult b = train_e_r2lml(d, small_hyper(2, 0.5, 9));
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(a.model.transforms[k], b.model.transforms[k]);
    EXPECT_EQ(a.model.coefficients, b.model.coefficients);
    EXPECT_EQ(a.trace.objective_sequence(), b.trace.objective_sequence());
}

TEST(TrainE, MonotoneAndOnSimplex) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const TrainResult r = train_e_r2lml(small_synth(seed), small_hyper(3, 0.3, seed));
        EXPECT_TRUE(r.trace.is_monotone(1e-9));
        EXPECT_LE(simplex_violation(r.model.coefficients), 1e-8);
        EXPECT_FALSE(r.trace.records.empty());
        for (const auto& rec : r.trace.records) EXPECT_EQ(rec.nuclear_norms.size(), 3u);
    }
}

TEST(TrainE, RejectsBadInput) {
    Dataset one;
    one.features = Matrix::Zero(1, 2);
    one.labels = {0};
    EXPECT_THROW((void)train_e_r2lml(one, small_hyper(1, 0.0, 0)), ConfigError);
    Hyperparams bad = small_hyper(1, 0.0, 0);
    bad.c = -1.0;
    EXPECT_THROW((void)train_e_r2lml(small_synth(0), bad), ConfigError);
    TrainOptions opts;
    opts.restarts = 0;
    EXPECT_THROW((void)train_e_r2lml(small_synth(0), small_hyper(1, 0.0, 0), opts), ConfigError);
}

TEST(TrainE, DivergenceSurfaces) {
    Hyperparams h = small_hyper(1, 0.0, 0);
    h.step_length = 1e3;
    EXPECT_THROW((void)train_e_r2lml(small_synth(4), h), DivergenceError);
}

TEST(TrainE, RestartsReturnArgmin) {
    TrainOptions opts;
    opts.restarts = 3;
    const TrainResult r = train_e_r2lml(small_synth(5), small_hyper(2, 0.2, 4), opts);
    ASSERT_EQ(r.restart_objectives.size(), 3u);
    const auto best = std::min_element(r.restart_objectives.begin(), r.restart_objectives.end());
    EXPECT_EQ(r.best_restart, best - r.restart_objectives.begin());
    EXPECT_EQ(r.trace.final_objective(), *best);
}

TEST(TrainT, MonotoneAcrossThreeBlocks) {
    SynthConfig cfg;
    cfg.dim = 4;
    cfg.n_train = 16;
    cfg.n_test = 6;
    cfg.seed = 6;
    const SynthResult data = synth_gaussian_mixture(cfg);
    const TransductiveResult r = train_t_r2lml(data.train, data.test.features, small_hyper(2, 0.2, 6));
    EXPECT_TRUE(r.trace.is_monotone(1e-9));
    EXPECT_EQ(r.model.test_coefficients.cols(), 6);
    EXPECT_LE(simplex_violation(r.model.test_coefficients), 1e-8);
    EXPECT_TRUE(r.similarity.is_symmetric());
    EXPECT_EQ(r.similarity.entries.topLeftCorner(16, 16), similarity_from_labels(data.train.labels).entries);
    for (const auto& rec : r.trace.records) EXPECT_FALSE(std::isnan(rec.after_block3));
}

TEST(TrainT, NoTestSamplesMatchesInductive) {
    const Dataset d = small_synth(7);
    const Hyperparams h = small_hyper(2, 0.4, 11);
    const TrainResult e = train_e_r2lml(d, h);
    const TransductiveResult t = train_t_r2lml(d, Matrix(0, d.dim()), h);
    for (std::size_t k = 0; k < 2; ++k) EXPECT_EQ(e.model.transforms[k], t.model.transforms[k]);
    EXPECT_EQ(e.model.coefficients, t.model.coefficients);
    EXPECT_EQ(e.trace.objective_sequence(), t.trace.objective_sequence());
}

TEST(TrainT, TestDimensionMismatch) {
    EXPECT_THROW((void)train_t_r2lml(small_synth(8), Matrix::Zero(3, 7), small_hyper(1, 0.0, 0)), DimensionError);
}

TEST(CrossValidate, SinglePointAndRowCount) {
    const Dataset train = small_synth(9), val = small_synth(10);
    HyperGrid one{{2}, {0.5}, {}};
    const CrossValidation a = cross_validate(train, val, one, small_hyper(1, 0.0, 1), Method::e_r2lml, 3);
    EXPECT_EQ(a.table.size(), 1u);
    EXPECT_EQ(a.best.k_metrics, 2);
    EXPECT_EQ(a.best.lambda, 0.5);

    HyperGrid grid{{1, 2}, {0.0, 1.0, 10.0}, {1e-3, 1e-4}};
    const CrossValidation b = cross_validate(train, val, grid, small_hyper(1, 0.0, 1), Method::e_r2lml, 3);
    EXPECT_EQ(b.table.size(), 12u);
}

TEST(CrossValidate, TiesPreferSmallerK) {
    // Separable data: every grid point reaches accuracy 1.
    Dataset train;
    train.features.resize(8, 1);
    train.features << 0, 0.1, 0.2, 0.3, 10, 10.1, 10.2, 10.3;
    train.labels = {0, 0, 0, 0, 1, 1, 1, 1};
    Dataset val = train;
    HyperGrid grid{{2, 1}, {1.0, 0.0}, {}};
    const CrossValidation cv = cross_validate(train, val, grid, small_hyper(1, 0.0, 1), Method::e_r2lml, 1);
    for (const auto& row : cv.table) ASSERT_EQ(row.accuracy, 1.0);
    EXPECT_EQ(cv.best.k_metrics, 1);
    EXPECT_EQ(cv.best.lambda, 0.0);
}

TEST(CrossValidate, FailingPointsRecordedNotFatal) {
    const Dataset train = small_synth(11), val = small_synth(12);
    HyperGrid grid{{1}, {0.0}, {1e3, 1e-4}};
    const CrossValidation cv = cross_validate(train, val, grid, small_hyper(1, 0.0, 1), Method::e_r2lml, 3);
    ASSERT_EQ(cv.table.size(), 2u);
    EXPECT_FALSE(cv.table[0].error.empty());
    EXPECT_TRUE(cv.table[1].error.empty());
    EXPECT_EQ(cv.best.step_length, 1e-4);
}

TEST(CrossValidate, TransductiveMethod) {
    const Dataset train = small_synth(13), val = small_synth(14);
    HyperGrid grid{{1, 2}, {0.1}, {}};
    const CrossValidation cv = cross_validate(train, val, grid, small_hyper(1, 0.0, 1), Method::t_r2lml, 3);
    EXPECT_EQ(cv.table.size(), 2u);
    for (const auto& row : cv.table) EXPECT_TRUE(row.error.empty()) << row.error;
}

TEST(CrossValidate, EmptyGridRejected) {
    const Dataset d = small_synth(15);
    EXPECT_THROW((void)cross_validate(d, d, HyperGrid{{}, {0.0}, {}}, small_hyper(1, 0.0, 1), Method::e_r2lml), ConfigError);
}

TEST(Termination, Names) {
    EXPECT_STREQ(termination_name(Termination::epochs_exhausted), "epochs_exhausted");
    EXPECT_STREQ(termination_name(Termination::objective_converged), "objective_converged");
    EXPECT_STREQ(termination_name(Termination::max_outer_blocks), "max_outer_blocks");
}

TEST(TrainT, BlockOneCostScalesQuadratically) {
    auto block_seconds = [](Index q) {
        std::mt19937_64 rng(20);
        const Matrix x = testutil::random_matrix(q, 5, rng);
        std::vector<int> labels(static_cast<std::size_t>(q) - 10);
        for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 2);
        const SimilarityMatrix s = init_transductive_similarity(labels, 10, 1);
        const std::vector<Matrix> ls = initial_transforms(1, 5, 5, 2);
        PsdConfig cfg;
        cfg.step_length = 1e-6;
        cfg.iterations = 20;
        double best = std::numeric_limits<double>::infinity();
        for (int rep = 0; rep < 5; ++rep) {
            const auto start = std::chrono::steady_clock::now();
            (void)psd_block(ls, Matrix::Ones(1, q), x, s, 1.0, 0.1, cfg);
            best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
        }
        return best;
    };
    const double ratio = block_seconds(400) / block_seconds(200);
    EXPECT_GE(ratio, 2.0);
    EXPECT_LE(ratio, 8.0);
}
