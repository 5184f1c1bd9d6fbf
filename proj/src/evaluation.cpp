#include "r2lml/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace r2lml {

std::vector<std::uint8_t> PredictionSet::correct() const {
    std::vector<std::uint8_t> out;
    if (!true_labels) return out;
    if (true_labels->size() != predicted.size()) throw DimensionError("prediction and label counts differ");
    out.reserve(predicted.size());
    for (std::size_t i = 0; i < predicted.size(); ++i) out.push_back(predicted[i] == (*true_labels)[i] ? 1 : 0);
    return out;
}

double PredictionSet::accuracy() const {
    const auto bits = correct();
    if (bits.empty()) return std::numeric_limits<double>::quiet_NaN();
    return static_cast<double>(std::accumulate(bits.begin(), bits.end(), 0L)) / static_cast<double>(bits.size());
}

namespace {

// Neighbours are ranked by (distance, secondary, index); the vote tie goes
// to the tied class that appears first in that ranking.
int vote(const std::vector<double>& dist, const std::vector<double>& secondary, std::span<const int> labels, int k) {
    const auto n = static_cast<Index>(dist.size());
    if (n == 0) throw InvariantError("k-NN needs at least one training sample");
    if (k < 1 || k > n)
        throw ConfigError("k-NN needs 1 <= k <= " + std::to_string(n) + ", got " + std::to_string(k));
    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Index{0});
    auto closer = [&](Index a, Index b) {
        const auto ia = static_cast<std::size_t>(a), ib = static_cast<std::size_t>(b);
        if (dist[ia] != dist[ib]) return dist[ia] < dist[ib];
        if (secondary[ia] != secondary[ib]) return secondary[ia] < secondary[ib];
        return a < b;
    };
    std::partial_sort(order.begin(), order.begin() + k, order.end(), closer);

    std::map<int, int> counts;
    for (int i = 0; i < k; ++i) ++counts[labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]];
    int top = 0;
    for (const auto& [label, count] : counts) top = std::max(top, count);
    for (int i = 0; i < k; ++i) {
        const int label = labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
        if (counts[label] == top) return label;
    }
    return labels[static_cast<std::size_t>(order.front())];
}

void check_model(const LocalMetricModel& model) {
    if (model.num_train() == 0 || model.transforms.empty()) throw InvariantError("model is empty");
    if (static_cast<Index>(model.train_labels.size()) != model.num_train())
        throw DimensionError("model label count differs from its training rows");
}

} // namespace

int knn_predict(const LocalMetricModel& model, const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& g_x,
                int k) {
    check_model(model);
    if (x.size() != model.input_dim()) throw DimensionError("query has the wrong dimension");
    if (g_x.size() != model.num_metrics()) throw DimensionError("query coefficients must have K entries");
    // Samples whose coefficients share no metric with g_x sit at local
    // distance zero; Euclidean distance orders those ties.
    std::vector<double> dist(static_cast<std::size_t>(model.num_train()));
    std::vector<double> euclid(dist.size());
    for (Index n = 0; n < model.num_train(); ++n) {
        const auto i = static_cast<std::size_t>(n);
        dist[i] = local_distance_sq(model, g_x, model.coefficients.col(n), x, model.train_features.row(n).transpose());
        euclid[i] = (model.train_features.row(n).transpose() - x).squaredNorm();
    }
    return vote(dist, euclid, model.train_labels, k);
}

int euclidean_knn_predict(const Matrix& train_features, std::span<const int> train_labels,
                          const Eigen::Ref<const Vector>& x, int k) {
    if (static_cast<Index>(train_labels.size()) != train_features.rows())
        throw DimensionError("label count differs from training rows");
    if (x.size() != train_features.cols()) throw DimensionError("query has the wrong dimension");
    std::vector<double> dist(static_cast<std::size_t>(train_features.rows()));
    for (Index n = 0; n < train_features.rows(); ++n)
        dist[static_cast<std::size_t>(n)] = (train_features.row(n).transpose() - x).squaredNorm();
    return vote(dist, dist, train_labels, k);
}

PredictionSet predict(const LocalMetricModel& model, const Matrix& features, Method method,
                      const Matrix* transductive_g, int k) {
    check_model(model);
    if (features.cols() != model.input_dim())
        throw DimensionError("features have " + std::to_string(features.cols()) + " columns, model expects " +
                             std::to_string(model.input_dim()));
    if (method == Method::t_r2lml) {
        if (!transductive_g) throw ConfigError("t-r2lml prediction needs the transductive test coefficients");
        if (transductive_g->rows() != model.num_metrics() || transductive_g->cols() != features.rows())
            throw DimensionError("transductive coefficients must be K x M");
    }
    PredictionSet out;
    out.predicted.resize(static_cast<std::size_t>(features.rows()));
    for (Index i = 0; i < features.rows(); ++i) {
        const Vector x = features.row(i).transpose();
        const Vector g = method == Method::t_r2lml ? Vector(transductive_g->col(i)) : assign_test_g(model, x);
        out.predicted[static_cast<std::size_t>(i)] = knn_predict(model, x, g, k);
    }
    return out;
}

Evaluation evaluate(const LocalMetricModel& model, const Dataset& test, Method method, const Matrix* transductive_g,
                    int k) {
    if (test.size() == 0) throw ConfigError("test set is empty");
    Evaluation ev;
    ev.predictions = predict(model, test.features, method, transductive_g, k);
    ev.predictions.true_labels = test.labels;
    ev.accuracy = ev.predictions.accuracy();
    return ev;
}

double euclidean_knn_accuracy(const Dataset& train, const Dataset& test, int k) {
    if (test.size() == 0) throw ConfigError("test set is empty");
    long hits = 0;
    for (Index i = 0; i < test.size(); ++i)
        hits += euclidean_knn_predict(train.features, train.labels, test.features.row(i).transpose(), k) ==
                test.labels[static_cast<std::size_t>(i)];
    return static_cast<double>(hits) / static_cast<double>(test.size());
}

double loo_accuracy(const LocalMetricModel& model) {
    check_model(model);
    const Index n = model.num_train();
    if (n < 2) throw ConfigError("leave-one-out needs two samples");
    long hits = 0;
    for (Index i = 0; i < n; ++i) {
        Index best = -1;
        double best_d = 0.0, best_e = 0.0;
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dist = local_distance_sq(model, model.coefficients.col(i), model.coefficients.col(j),
                                                  model.train_features.row(i).transpose(),
                                                  model.train_features.row(j).transpose());
            const double e = (model.train_features.row(i) - model.train_features.row(j)).squaredNorm();
            if (best < 0 || dist < best_d || (dist == best_d && e < best_e)) {
                best = j;
                best_d = dist;
                best_e = e;
            }
        }
        hits += model.train_labels[static_cast<std::size_t>(best)] == model.train_labels[static_cast<std::size_t>(i)];
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

double euclidean_loo_accuracy(const Dataset& data) {
    const Index n = data.size();
    if (n < 2) throw ConfigError("leave-one-out needs two samples");
    long hits = 0;
    for (Index i = 0; i < n; ++i) {
        Index best = -1;
        double best_d = 0.0;
        for (Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dist = (data.features.row(i) - data.features.row(j)).squaredNorm();
            if (best < 0 || dist < best_d) {
                best = j;
                best_d = dist;
            }
        }
        hits += data.labels[static_cast<std::size_t>(best)] == data.labels[static_cast<std::size_t>(i)];
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

const char* mcnemar_branch_name(McNemarBranch branch) {
    switch (branch) {
    case McNemarBranch::no_discordance: return "none";
    case McNemarBranch::exact_binomial: return "exact";
    case McNemarBranch::chi_square: return "chi2";
    }
    return "unknown";
}

McNemarResult mcnemar(std::span<const std::uint8_t> correct_a, std::span<const std::uint8_t> correct_b) {
    if (correct_a.size() != correct_b.size())
        throw DimensionError("McNemar inputs have lengths " + std::to_string(correct_a.size()) + " and " +
                             std::to_string(correct_b.size()));
    McNemarResult r;
    for (std::size_t i = 0; i < correct_a.size(); ++i) {
        if (correct_a[i] && !correct_b[i]) ++r.b;
        if (!correct_a[i] && correct_b[i]) ++r.c;
    }
    const long n = r.b + r.c;
    if (n == 0) return r;
    if (n < kMcNemarExactBelow) {
        r.branch = McNemarBranch::exact_binomial;
        r.p_value = binomial_two_sided_half(r.b, r.c);
        return r;
    }
    r.branch = McNemarBranch::chi_square;
    const double diff = std::abs(static_cast<double>(r.b - r.c)) - 1.0;
    r.statistic = diff * diff / static_cast<double>(n);
    r.p_value = chi_square_sf(r.statistic, 1.0);
    return r;
}

std::vector<bool> holm(std::span<const double> p_values, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
    const std::size_t m = p_values.size();
    for (double p : p_values)
        if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("p-values must lie in [0, 1]");
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return p_values[a] < p_values[b]; });
    std::vector<bool> reject(m, false);
    for (std::size_t i = 0; i < m; ++i) {
        if (p_values[order[i]] > alpha / static_cast<double>(m - i)) break;
        reject[order[i]] = true;
    }
    return reject;
}

} // namespace r2lml
