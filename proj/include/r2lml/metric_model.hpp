#pragma once

#include "r2lml/common.hpp"
#include "r2lml/dataset.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace r2lml {

enum class Method { e_r2lml, t_r2lml };

const char* method_name(Method method);
Method parse_method(std::string_view text);

struct Hyperparams {
    double c = 1.0;              // hinge penalty
    double lambda = 1.0;         // nuclear-norm weight
    int k_metrics = 2;
    double step_length = 1e-6;   // fixed PSD step
    int epochs = 5;
    int psd_iters_per_epoch = 500;
    int mm_max_iters = 3000;
    double mm_tol = 1e-3;
    double outer_tol = 1e-4;
    int max_outer_blocks = 5;    // transductive outer iterations
    double bisection_tol = 1e-10;
    std::uint64_t seed = 0;
    int p_dim = 0;               // output dimension; 0 means P = D

    /// Throws ConfigError on any out-of-range field. `input_dim` is D.
    void validate(Index input_dim) const;
    int output_dim(Index input_dim) const { return p_dim > 0 ? p_dim : static_cast<int>(input_dim); }
};

/// K low-rank transforms L^k with per-sample conical coefficients g^k.
///
/// The model carries its training set because both the coefficient lookup
/// for unseen points and k-NN prediction need it. Transductive models also
/// carry the test features they were trained with and the learned test
/// coefficients.
struct LocalMetricModel {
    Method method = Method::e_r2lml;
    std::vector<Matrix> transforms; // K matrices, P x D
    Matrix coefficients;            // K x N_train, columns on the simplex
    Matrix train_features;          // N_train x D
    std::vector<int> train_labels;
    std::vector<std::string> class_names; // original label text, may be empty
    Matrix test_features;           // M x D (transductive only)
    Matrix test_coefficients;       // K x M (transductive only)
    Hyperparams hyper;
    std::optional<StandardizationParams> standardization;

    int num_metrics() const { return static_cast<int>(transforms.size()); }
    Index input_dim() const { return train_features.cols(); }
    Index output_dim() const { return transforms.empty() ? 0 : transforms.front().rows(); }
    Index num_train() const { return train_features.rows(); }

    /// Shape checks, finiteness and simplex membership of every coefficient
    /// column within `simplex_tol`. Throws InvariantError / DimensionError.
    void validate(double simplex_tol = 1e-8) const;
};

/// Sum_k g_m^k g_n^k ||L^k (x_m - x_n)||^2.
double local_distance_sq(const LocalMetricModel& model,
                         const Eigen::Ref<const Vector>& g_m,
                         const Eigen::Ref<const Vector>& g_n,
                         const Eigen::Ref<const Vector>& x_m,
                         const Eigen::Ref<const Vector>& x_n);

/// Index of the Euclidean-nearest training row (ties: smallest index).
Index nearest_training_index(const Matrix& train_features, const Eigen::Ref<const Vector>& x);

/// Coefficient column of the Euclidean-nearest training sample.
Vector assign_test_g(const LocalMetricModel& model, const Eigen::Ref<const Vector>& x);

/// ||L (x_m - x_n)||^2 for all ordered pairs, via the Gram matrix of X L^T.
/// The diagonal is exactly zero and tiny negative round-off is clamped.
Matrix pairwise_sq_distances(const Matrix& features, const Matrix& transform);

/// Loss contributed by one metric, excluding the regularizer:
/// sum_{m,n} s g_m g_n d_mn + C (1 - s) [1 - d_mn]_+ .
double metric_loss(const Matrix& transform, const Matrix& features, const SimilarityMatrix& s,
                   const Eigen::Ref<const Vector>& g_k, double c);

struct ObjectiveTerms {
    double similar = 0.0;
    double hinge = 0.0;
    double nuclear = 0.0; // already multiplied by lambda

    double total() const { return similar + hinge + nuclear; }
};

ObjectiveTerms objective_terms(std::span<const Matrix> transforms, const Matrix& coefficients,
                               const Matrix& features, const SimilarityMatrix& s, double c,
                               double lambda);

/// Full training cost over all ordered pairs (diagonal included) plus
/// lambda * sum of nuclear norms. Throws on shape mismatch or NaN input.
double objective(std::span<const Matrix> transforms, const Matrix& coefficients,
                 const Matrix& features, const SimilarityMatrix& s, double c, double lambda);

double nuclear_norm(const Matrix& m);

struct TriangleReport {
    long checked = 0;
    long violations = 0;
};

/// Samples uniform random triplets of training samples and counts
/// violations of d(a,c) <= d(a,b) + d(b,c) for d = sqrt(local_distance_sq).
TriangleReport count_triangle_violations(const LocalMetricModel& model, long triplets,
                                         std::uint64_t seed, double slack = 1e-12);

inline constexpr const char* kModelSchemaVersion = "1";

void save_model(const LocalMetricModel& model, const std::filesystem::path& path);
LocalMetricModel load_model(const std::filesystem::path& path);

} // namespace r2lml
