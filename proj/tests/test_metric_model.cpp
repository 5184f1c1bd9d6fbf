#include "r2lml/metric_model.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace r2lml;
using testutil::TempDir;

namespace {

LocalMetricModel make_model(std::vector<Matrix> transforms, Matrix coefficients, Matrix train_features,
                            std::vector<int> labels) {
    LocalMetricModel m;
    m.transforms = std::move(transforms);
    m.coefficients = std::move(coefficients);
    m.train_features = std::move(train_features);
    m.train_labels = std::move(labels);
    return m;
}

LocalMetricModel random_model(std::mt19937_64& rng, int k, Index d, Index n) {
    std::vector<Matrix> ls;
    for (int i = 0; i < k; ++i) ls.push_back(testutil::random_matrix(d, d, rng));
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % 2);
    return make_model(std::move(ls), testutil::random_simplex(k, n, rng), testutil::random_matrix(n, d, rng),
                      std::move(labels));
}

} // namespace

TEST(LocalDistance, EuclideanReduction) {
    const LocalMetricModel m = make_model({Matrix::Identity(3, 3)}, Matrix::Ones(1, 2), Matrix::Zero(2, 3), {0, 1});
    const Vector g = Vector::Ones(1);
    const Vector a = Vector::LinSpaced(3, 1.0, 3.0), b = Vector::LinSpaced(3, -1.0, 0.5);
    EXPECT_NEAR(local_distance_sq(m, g, g, a, b), (a - b).squaredNorm(), 1e-14);
}

TEST(LocalDistance, DisjointSupportIsZero) {
    const LocalMetricModel m =
        make_model({Matrix::Identity(2, 2), Matrix::Identity(2, 2)}, Matrix::Constant(2, 2, 0.5), Matrix::Zero(2, 2), {0, 1});
    Vector gm(2), gn(2), x(2), y(2);
    gm << 1, 0;
    gn << 0, 1;
    x << 5, -3;
    y << -7, 2;
    EXPECT_EQ(local_distance_sq(m, gm, gn, x, y), 0.0);
}

TEST(LocalDistance, HandEvaluatedTwoMetrics) {
    const LocalMetricModel m = make_model({Matrix::Identity(2, 2), 2.0 * Matrix::Identity(2, 2)},
                                          Matrix::Constant(2, 2, 0.5), Matrix::Zero(2, 2), {0, 1});
    const Vector g = Vector::Constant(2, 0.5);
    Vector x(2), y(2);
    x << 1, 0;
    y << 0, 0;
    EXPECT_NEAR(local_distance_sq(m, g, g, x, y), 1.25, 1e-15);
}

TEST(LocalDistance, DimensionMismatchThrows) {
    const LocalMetricModel m = make_model({Matrix::Identity(2, 2)}, Matrix::Ones(1, 2), Matrix::Zero(2, 2), {0, 1});
    EXPECT_THROW((void)local_distance_sq(m, Vector::Ones(2), Vector::Ones(1), Vector::Zero(2), Vector::Zero(2)),
                 DimensionError);
    EXPECT_THROW((void)local_distance_sq(m, Vector::Ones(1), Vector::Ones(1), Vector::Zero(3), Vector::Zero(2)),
                 DimensionError);
}

TEST(LocalDistanceProperty, SymmetricNonnegativeZeroOnSelf) {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const LocalMetricModel m = random_model(rng, 1 + static_cast<int>(trial % 3), 4, 3);
        const Matrix g = testutil::random_simplex(m.num_metrics(), 2, rng);
        const Matrix x = testutil::random_matrix(4, 2, rng);
        const double ab = local_distance_sq(m, g.col(0), g.col(1), x.col(0), x.col(1));
        const double ba = local_distance_sq(m, g.col(1), g.col(0), x.col(1), x.col(0));
        EXPECT_NEAR(ab, ba, 1e-12 * std::max(1.0, ab));
        EXPECT_GE(ab, 0.0);
        EXPECT_EQ(local_distance_sq(m, g.col(0), g.col(1), x.col(0), x.col(0)), 0.0);
    }
}

TEST(AssignTestG, NearestColumnAndTieRule) {
    Matrix train(5, 1);
    train << 0, 1, 5, 9, 3;
    Matrix coeff(2, 5);
    coeff << 0.0, 0.1, 0.2, 0.3, 0.4, 1.0, 0.9, 0.8, 0.7, 0.6;
    const LocalMetricModel m =
        make_model({Matrix::Identity(1, 1), Matrix::Identity(1, 1)}, coeff, train, {0, 1, 0, 1, 0});
    EXPECT_EQ(assign_test_g(m, Vector::Constant(1, 9.0)), coeff.col(3));
    // 2 is equidistant from samples 1 and 4.
    EXPECT_EQ(assign_test_g(m, Vector::Constant(1, 2.0)), coeff.col(1));
}

TEST(AssignTestG, MatchesBruteForceScan) {
    std::mt19937_64 rng(2);
    const LocalMetricModel m = random_model(rng, 2, 3, 25);
    for (int t = 0; t < 100; ++t) {
        const Vector x = testutil::random_matrix(3, 1, rng);
        Index best = 0;
        for (Index n = 1; n < 25; ++n)
            if ((m.train_features.row(n).transpose() - x).squaredNorm() <
                (m.train_features.row(best).transpose() - x).squaredNorm())
                best = n;
        EXPECT_EQ(assign_test_g(m, x), m.coefficients.col(best));
    }
}

TEST(AssignTestG, EmptyTrainingSetThrows) {
    LocalMetricModel m;
    m.transforms = {Matrix::Identity(1, 1)};
    m.coefficients = Matrix(1, 0);
    m.train_features = Matrix(0, 1);
    EXPECT_THROW((void)assign_test_g(m, Vector::Zero(1)), InvariantError);
}

TEST(Objective, TwoSimilarSamples) {
    Matrix x(2, 2);
    x << 0, 0, 1, 0;
    const std::vector<int> labels{0, 0};
    const SimilarityMatrix s = similarity_from_labels(labels);
    const std::vector<Matrix> l{Matrix::Identity(2, 2)};
    EXPECT_NEAR(objective(l, Matrix::Ones(1, 2), x, s, 1.0, 0.0), 2.0, 1e-14);
    EXPECT_NEAR(objective(l, Matrix::Ones(1, 2), x, s, 1.0, 1.0), 4.0, 1e-12);
}

TEST(Objective, ZeroTransformDissimilarPair) {
    Matrix x(2, 2);
    x << 0, 0, 1, 0;
    const std::vector<int> labels{0, 1};
    const SimilarityMatrix s = similarity_from_labels(labels);
    const std::vector<Matrix> l{Matrix::Zero(2, 2)};
    EXPECT_DOUBLE_EQ(objective(l, Matrix::Ones(1, 2), x, s, 2.5, 0.0), 2.0 * 2.5);
}

TEST(Objective, MatchesDoubleLoopOracle) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 30; ++trial) {
        const int k = 1 + trial % 3;
        const Index n = 6, d = 3;
        std::vector<Matrix> ls;
        for (int i = 0; i < k; ++i) ls.push_back(testutil::random_matrix(2, d, rng, 0.5));
        const Matrix g = testutil::random_simplex(k, n, rng);
        const Matrix x = testutil::random_matrix(n, d, rng);
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (auto& v : labels) v = static_cast<int>(rng() % 2);
        const SimilarityMatrix s = similarity_from_labels(canonicalize_labels(labels));
        const double lib = objective(ls, g, x, s, 1.3, 0.7);
        const double ref = oracle::objective(ls, g, x, testutil::to_nested(s), 1.3, 0.7);
        EXPECT_NEAR(lib, ref, 1e-10 * std::max(1.0, ref));
    }
}

TEST(ObjectiveProperty, PermutationInvariant) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 7, d = 3;
        const std::vector<Matrix> ls{testutil::random_matrix(d, d, rng, 0.5), testutil::random_matrix(d, d, rng, 0.5)};
        const Matrix g = testutil::random_simplex(2, n, rng);
        const Matrix x = testutil::random_matrix(n, d, rng);
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (auto& v : labels) v = static_cast<int>(rng() % 3);
        labels = canonicalize_labels(labels);
        std::vector<Index> perm(static_cast<std::size_t>(n));
        std::iota(perm.begin(), perm.end(), Index{0});
        std::shuffle(perm.begin(), perm.end(), rng);
        Matrix xp(n, d), gp(2, n);
        std::vector<int> lp(static_cast<std::size_t>(n));
        for (Index i = 0; i < n; ++i) {
            const Index src = perm[static_cast<std::size_t>(i)];
            xp.row(i) = x.row(src);
            gp.col(i) = g.col(src);
            lp[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(src)];
        }
        const double a = objective(ls, g, x, similarity_from_labels(labels), 1.0, 0.3);
        const double b = objective(ls, gp, xp, similarity_from_labels(lp), 1.0, 0.3);
        EXPECT_NEAR(a, b, 1e-10 * std::max(1.0, a));
    }
}

TEST(ObjectiveProperty, SingleMetricEqualsGlobalLoss) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const Index n = 8, d = 2;
        const Matrix l = testutil::random_matrix(d, d, rng, 0.6);
        const Matrix x = testutil::random_matrix(n, d, rng);
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (auto& v : labels) v = static_cast<int>(rng() % 2);
        const SimilarityMatrix s = similarity_from_labels(canonicalize_labels(labels));
        // Global-metric loss by an independent loop.
        double ref = 0.0;
        for (Index i = 0; i < n; ++i)
            for (Index j = 0; j < n; ++j) {
                const double dist = (l * (x.row(i) - x.row(j)).transpose()).squaredNorm();
                ref += s.similar(i, j) ? dist : 0.8 * std::max(0.0, 1.0 - dist);
            }
        const std::vector<Matrix> ls{l};
        EXPECT_NEAR(objective(ls, Matrix::Ones(1, n), x, s, 0.8, 0.0), ref, 1e-10 * std::max(1.0, ref));
    }
}

TEST(Objective, RejectsBadInput) {
    Matrix x = Matrix::Zero(2, 2);
    const std::vector<int> labels{0, 1};
    const SimilarityMatrix s = similarity_from_labels(labels);
    const std::vector<Matrix> l{Matrix::Identity(2, 3)};
    EXPECT_THROW((void)objective(l, Matrix::Ones(1, 2), x, s, 1.0, 0.0), DimensionError);
    x(0, 0) = std::numeric_limits<double>::quiet_NaN();
    const std::vector<Matrix> ok{Matrix::Identity(2, 2)};
    EXPECT_ANY_THROW((void)objective(ok, Matrix::Ones(1, 2), x, s, 1.0, 0.0));
}

TEST(NuclearNorm, Examples) {
    EXPECT_NEAR(nuclear_norm(Matrix::Identity(3, 3)), 3.0, 1e-14);
    Vector u(3), v(2);
    u << 1, 2, 2;
    v << 3, 4;
    EXPECT_NEAR(nuclear_norm((u / 3.0) * (v / 5.0).transpose()), 1.0, 1e-14);
    EXPECT_EQ(nuclear_norm(Matrix(0, 0)), 0.0);
}

TEST(NuclearNorm, MatchesEigenOracle) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 50; ++t) {
        const Matrix m = testutil::random_matrix(4, 3, rng);
        EXPECT_NEAR(nuclear_norm(m), oracle::nuclear_by_eig(m), 1e-10);
    }
}

TEST(Triangle, DiagnosticCountsChecks) {
    std::mt19937_64 rng(7);
    const LocalMetricModel m = random_model(rng, 2, 2, 10);
    const TriangleReport r = count_triangle_violations(m, 500, 1);
    EXPECT_GT(r.checked, 0);
    EXPECT_LE(r.violations, r.checked);
    const TriangleReport again = count_triangle_violations(m, 500, 1);
    EXPECT_EQ(r.violations, again.violations);
}

TEST(ModelIo, RoundTripExact) {
    std::mt19937_64 rng(8);
    LocalMetricModel m = random_model(rng, 2, 3, 6);
    m.class_names = {"no", "yes"};
    m.hyper.lambda = 0.1;
    m.hyper.seed = 0xFFFFFFFFFFFFFFFFULL;
    m.standardization = StandardizationParams{Vector::Constant(3, 0.3), Vector::Constant(3, 1.0 / 3.0)};
    TempDir dir;
    save_model(m, dir.file("m.json"));
    const LocalMetricModel back = load_model(dir.file("m.json"));
    ASSERT_EQ(back.num_metrics(), 2);
    for (int k = 0; k < 2; ++k) EXPECT_EQ(back.transforms[static_cast<std::size_t>(k)], m.transforms[static_cast<std::size_t>(k)]);
    EXPECT_EQ(back.coefficients, m.coefficients);
    EXPECT_EQ(back.train_features, m.train_features);
    EXPECT_EQ(back.train_labels, m.train_labels);
    EXPECT_EQ(back.class_names, m.class_names);
    EXPECT_EQ(back.hyper.lambda, 0.1);
    EXPECT_EQ(back.hyper.seed, m.hyper.seed);
    ASSERT_TRUE(back.standardization);
    EXPECT_EQ(back.standardization->scale, m.standardization->scale);
}

TEST(ModelIo, OffSimplexColumnRejected) {
    std::mt19937_64 rng(9);
    LocalMetricModel m = random_model(rng, 2, 2, 4);
    TempDir dir;
    save_model(m, dir.file("m.json"));
    std::string text = testutil::read_text(dir.file("m.json"));
    // Scale the first coefficient column so it sums to 1.5.
    m.coefficients.col(0) *= 1.5;
    EXPECT_THROW(save_model(m, dir.file("bad.json")), InvariantError);
    const std::string a = format_double(m.coefficients(0, 0) / 1.5), b = format_double(m.coefficients(0, 0));
    const auto field = text.find("\"coefficients\"");
    ASSERT_NE(field, std::string::npos);
    const auto pos = text.find(a, field);
    ASSERT_NE(pos, std::string::npos);
    text.replace(pos, a.size(), b);
    const auto pos2 = text.find(format_double(m.coefficients(1, 0) / 1.5), field);
    ASSERT_NE(pos2, std::string::npos);
    text.replace(pos2, format_double(m.coefficients(1, 0) / 1.5).size(), format_double(m.coefficients(1, 0)));
    testutil::write_text(dir.file("edited.json"), text);
    EXPECT_THROW((void)load_model(dir.file("edited.json")), InvariantError);
}

TEST(ModelIo, VersionAndTruncation) {
    std::mt19937_64 rng(10);
    const LocalMetricModel m = random_model(rng, 1, 2, 3);
    TempDir dir;
    save_model(m, dir.file("m.json"));
    std::string text = testutil::read_text(dir.file("m.json"));
    std::string v2 = text;
    v2.replace(v2.find("\"schema_version\": \"1\""), 21, "\"schema_version\": \"2\"");
    testutil::write_text(dir.file("v2.json"), v2);
    EXPECT_THROW((void)load_model(dir.file("v2.json")), VersionError);
    testutil::write_text(dir.file("cut.json"), text.substr(0, text.size() / 2));
    EXPECT_THROW((void)load_model(dir.file("cut.json")), ParseError);
    EXPECT_THROW((void)load_model(dir.file("none.json")), IoError);
}

TEST(Hyperparams, ValidateRejectsOutOfRange) {
    Hyperparams h;
    EXPECT_NO_THROW(h.validate(4));
    Hyperparams bad = h;
    bad.c = 0.0;
    EXPECT_THROW(bad.validate(4), ConfigError);
    bad = h;
    bad.lambda = -1.0;
    EXPECT_THROW(bad.validate(4), ConfigError);
    bad = h;
    bad.k_metrics = 0;
    EXPECT_THROW(bad.validate(4), ConfigError);
    bad = h;
    bad.p_dim = 5;
    EXPECT_THROW(bad.validate(4), ConfigError);
}
