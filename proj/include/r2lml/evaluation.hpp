#pragma once

#include "r2lml/common.hpp"
#include "r2lml/dataset.hpp"
#include "r2lml/metric_model.hpp"

#include <optional>
#include <span>
#include <vector>

namespace r2lml {

struct PredictionSet {
    std::vector<int> predicted;
    std::optional<std::vector<int>> true_labels;

    /// Per-sample correctness; empty when no labels are attached.
    std::vector<std::uint8_t> correct() const;
    double accuracy() const;
};

/// Majority vote among the k nearest training samples under the local
/// metric. Distance ties are ordered by Euclidean distance, then by the
/// smaller training index; vote ties go to the tied class whose best
/// neighbour ranks first.
int knn_predict(const LocalMetricModel& model, const Eigen::Ref<const Vector>& x,
                const Eigen::Ref<const Vector>& g_x, int k);

/// Plain Euclidean k-NN with the same tie rules, used as the baseline.
int euclidean_knn_predict(const Matrix& train_features, std::span<const int> train_labels,
                          const Eigen::Ref<const Vector>& x, int k);

/// Predicts every row of `features` (already in the model's input space).
/// For Method::t_r2lml the coefficient columns come from `transductive_g`
/// (K x M); for e_r2lml they come from the nearest training sample.
PredictionSet predict(const LocalMetricModel& model, const Matrix& features, Method method,
                      const Matrix* transductive_g, int k);

struct Evaluation {
    double accuracy = 0.0;
    PredictionSet predictions;
};

Evaluation evaluate(const LocalMetricModel& model, const Dataset& test, Method method,
                    const Matrix* transductive_g = nullptr, int k = 5);

double euclidean_knn_accuracy(const Dataset& train, const Dataset& test, int k);

/// Leave-one-out 1-NN accuracy on the training set under the learned local
/// metric (each sample keeps its own trained coefficients).
double loo_accuracy(const LocalMetricModel& model);
double euclidean_loo_accuracy(const Dataset& data);

// ---- paired comparison ----------------------------------------------------

enum class McNemarBranch { no_discordance, exact_binomial, chi_square };

const char* mcnemar_branch_name(McNemarBranch branch);

struct McNemarResult {
    long b = 0; // a correct, b wrong
    long c = 0; // a wrong, b correct
    McNemarBranch branch = McNemarBranch::no_discordance;
    double statistic = 0.0; // continuity-corrected chi-square, when used
    double p_value = 1.0;
};

inline constexpr long kMcNemarExactBelow = 25;

/// Two-sided McNemar test: exact binomial when b + c < 25, otherwise the
/// continuity-corrected chi-square statistic with one degree of freedom.
McNemarResult mcnemar(std::span<const std::uint8_t> correct_a, std::span<const std::uint8_t> correct_b);

/// Holm's step-down procedure; rejections in the original order.
std::vector<bool> holm(std::span<const double> p_values, double alpha);

/// Regularized upper incomplete gamma Q(a, x).
double regularized_gamma_q(double a, double x);

/// Survival function of the chi-square distribution.
double chi_square_sf(double x, double dof);

/// min(1, 2 P[X <= min(b, c)]) for X ~ Binomial(b + c, 1/2).
double binomial_two_sided_half(long b, long c);

} // namespace r2lml
