#include "r2lml/metric_model.hpp"

#include "r2lml/svd.hpp"

#include <cmath>
#include <random>

namespace r2lml {

const char* method_name(Method method) {
    return method == Method::e_r2lml ? "e-r2lml" : "t-r2lml";
}

Method parse_method(std::string_view text) {
    if (text == "e-r2lml" || text == "e_r2lml") return Method::e_r2lml;
    if (text == "t-r2lml" || text == "t_r2lml") return Method::t_r2lml;
    throw ConfigError("unknown method '" + std::string(text) + "' (expected e-r2lml or t-r2lml)");
}

void Hyperparams::validate(Index input_dim) const {
    auto require = [](bool ok, const char* what) {
        if (!ok) throw ConfigError(what);
    };
    require(c > 0.0 && std::isfinite(c), "C must be positive");
    require(lambda >= 0.0 && std::isfinite(lambda), "lambda must be nonnegative");
    require(k_metrics >= 1, "the number of metrics must be positive");
    require(step_length > 0.0 && std::isfinite(step_length), "step length must be positive");
    require(epochs >= 1, "epochs must be positive");
    require(psd_iters_per_epoch >= 1, "PSD iterations per epoch must be positive");
    require(mm_max_iters >= 1, "MM iteration cap must be positive");
    require(mm_tol > 0.0, "MM tolerance must be positive");
    require(outer_tol > 0.0, "outer tolerance must be positive");
    require(max_outer_blocks >= 1, "max outer blocks must be positive");
    require(bisection_tol > 0.0, "bisection tolerance must be positive");
    require(p_dim >= 0 && p_dim <= input_dim, "output dimension P must satisfy 1 <= P <= D");
}

void LocalMetricModel::validate(double simplex_tol) const {
    if (transforms.empty()) throw InvariantError("model has no transforms");
    const Index p = transforms.front().rows();
    const Index d = transforms.front().cols();
    if (p < 1 || p > d) throw DimensionError("transform output dimension must satisfy 1 <= P <= D");
    for (const auto& l : transforms) {
        if (l.rows() != p || l.cols() != d) throw DimensionError("transforms disagree in shape");
        if (!l.allFinite()) throw InvariantError("transform contains non-finite entries");
    }
    if (train_features.cols() != d)
        throw DimensionError("training features have " + std::to_string(train_features.cols()) +
                             " columns, transforms expect " + std::to_string(d));
    if (static_cast<Index>(train_labels.size()) != train_features.rows())
        throw DimensionError("training labels and features disagree in length");
    auto check_columns = [&](const Matrix& g, Index expected, const char* what) {
        if (g.rows() != num_metrics() || g.cols() != expected)
            throw DimensionError(std::string(what) + " coefficients have the wrong shape");
        if (!g.allFinite()) throw InvariantError(std::string(what) + " coefficients are not finite");
        for (Index n = 0; n < g.cols(); ++n) {
            const double sum = g.col(n).sum();
            if (std::abs(sum - 1.0) > simplex_tol || g.col(n).minCoeff() < -simplex_tol ||
                g.col(n).maxCoeff() > 1.0 + simplex_tol)
                throw InvariantError(std::string(what) + " coefficient column " + std::to_string(n) +
                                     " is off the simplex (sum " + std::to_string(sum) + ")");
        }
    };
    check_columns(coefficients, train_features.rows(), "training");
    if (method == Method::t_r2lml) {
        if (test_features.cols() != d && test_features.size() != 0)
            throw DimensionError("test features have the wrong dimension");
        check_columns(test_coefficients, test_features.rows(), "test");
    }
}

double local_distance_sq(const LocalMetricModel& model, const Eigen::Ref<const Vector>& g_m,
                         const Eigen::Ref<const Vector>& g_n, const Eigen::Ref<const Vector>& x_m,
                         const Eigen::Ref<const Vector>& x_n) {
    const int k = model.num_metrics();
    if (g_m.size() != k || g_n.size() != k)
        throw DimensionError("coefficient vectors must have length K = " + std::to_string(k));
    if (x_m.size() != model.input_dim() || x_n.size() != model.input_dim())
        throw DimensionError("points must have dimension D = " + std::to_string(model.input_dim()));
    const Vector dx = x_m - x_n;
    double total = 0.0;
    for (int i = 0; i < k; ++i) {
        const double w = g_m(i) * g_n(i);
        if (w == 0.0) continue;
        total += w * (model.transforms[static_cast<std::size_t>(i)] * dx).squaredNorm();
    }
    return total;
}

Index nearest_training_index(const Matrix& train_features, const Eigen::Ref<const Vector>& x) {
    if (train_features.rows() == 0) throw InvariantError("empty training set");
    if (x.size() != train_features.cols()) throw DimensionError("query dimension mismatch");
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index n = 0; n < train_features.rows(); ++n) {
        const double d = (train_features.row(n).transpose() - x).squaredNorm();
        if (d < best_d) {
            best_d = d;
            best = n;
        }
    }
    return best;
}

Vector assign_test_g(const LocalMetricModel& model, const Eigen::Ref<const Vector>& x) {
    return model.coefficients.col(nearest_training_index(model.train_features, x));
}

Matrix pairwise_sq_distances(const Matrix& features, const Matrix& transform) {
    if (transform.cols() != features.cols())
        throw DimensionError("transform has " + std::to_string(transform.cols()) + " columns, features have " +
                             std::to_string(features.cols()));
    const Matrix y = features * transform.transpose();
    const Vector r = y.rowwise().squaredNorm();
    Matrix d = -2.0 * (y * y.transpose());
    d.colwise() += r;
    d.rowwise() += r.transpose();
    d = d.cwiseMax(0.0);
    d.diagonal().setZero();
    d.triangularView<Eigen::StrictlyLower>() = d.transpose();
    return d;
}

namespace {

void check_shapes(std::span<const Matrix> transforms, const Matrix& coefficients, const Matrix& features,
                  const SimilarityMatrix& s) {
    const Index q = features.rows();
    if (s.size() != q || s.entries.cols() != q)
        throw DimensionError("similarity matrix is " + std::to_string(s.size()) + "x" +
                             std::to_string(s.entries.cols()) + " but there are " + std::to_string(q) + " samples");
    if (coefficients.rows() != static_cast<Index>(transforms.size()) || coefficients.cols() != q)
        throw DimensionError("coefficients must be K x Q");
    for (const auto& l : transforms)
        if (l.cols() != features.cols()) throw DimensionError("transform and feature dimensions disagree");
}

} // namespace

double metric_loss(const Matrix& transform, const Matrix& features, const SimilarityMatrix& s,
                   const Eigen::Ref<const Vector>& g_k, double c) {
    const Matrix d = pairwise_sq_distances(features, transform);
    const Index q = features.rows();
    double similar = 0.0, hinge = 0.0;
    for (Index n = 0; n < q; ++n)
        for (Index m = 0; m < q; ++m) {
            if (s.entries(m, n))
                similar += d(m, n) * g_k(m) * g_k(n);
            else if (d(m, n) < 1.0)
                hinge += 1.0 - d(m, n);
        }
    return similar + c * hinge;
}

ObjectiveTerms objective_terms(std::span<const Matrix> transforms, const Matrix& coefficients,
                               const Matrix& features, const SimilarityMatrix& s, double c, double lambda) {
    check_shapes(transforms, coefficients, features, s);
    if (!features.allFinite() || !coefficients.allFinite())
        throw InvariantError("objective called with non-finite features or coefficients");
    ObjectiveTerms terms;
    const Index q = features.rows();
    for (std::size_t k = 0; k < transforms.size(); ++k) {
        if (!transforms[k].allFinite()) throw InvariantError("objective called with a non-finite transform");
        const Matrix d = pairwise_sq_distances(features, transforms[k]);
        const auto g = coefficients.row(static_cast<Index>(k));
        double hinge = 0.0;
        for (Index n = 0; n < q; ++n)
            for (Index m = 0; m < q; ++m) {
                if (s.entries(m, n))
                    terms.similar += d(m, n) * g(m) * g(n);
                else if (d(m, n) < 1.0)
                    hinge += 1.0 - d(m, n);
            }
        terms.hinge += c * hinge;
        if (lambda != 0.0) terms.nuclear += lambda * nuclear_norm(transforms[k]);
    }
    return terms;
}

double objective(std::span<const Matrix> transforms, const Matrix& coefficients, const Matrix& features,
                 const SimilarityMatrix& s, double c, double lambda) {
    return objective_terms(transforms, coefficients, features, s, c, lambda).total();
}

double nuclear_norm(const Matrix& m) {
    if (m.size() == 0) return 0.0;
    return singular_values(m).sum();
}

TriangleReport count_triangle_violations(const LocalMetricModel& model, long triplets, std::uint64_t seed,
                                         double slack) {
    TriangleReport report;
    const Index n = model.num_train();
    if (n < 3) return report;
    std::mt19937_64 rng(derive_seed(seed, "triangle"));
    std::uniform_int_distribution<Index> pick(0, n - 1);
    auto dist = [&](Index a, Index b) {
        return std::sqrt(local_distance_sq(model, model.coefficients.col(a), model.coefficients.col(b),
                                           model.train_features.row(a).transpose(),
                                           model.train_features.row(b).transpose()));
    };
    for (long t = 0; t < triplets; ++t) {
        const Index a = pick(rng), b = pick(rng), c = pick(rng);
        if (a == b || b == c || a == c) continue;
        ++report.checked;
        if (dist(a, c) > dist(a, b) + dist(b, c) + slack) ++report.violations;
    }
    return report;
}

} // namespace r2lml
