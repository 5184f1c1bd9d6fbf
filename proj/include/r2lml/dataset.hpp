#pragma once

#include "r2lml/common.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace r2lml {

/// Feature matrix (one sample per row) with dense integer labels.
struct Dataset {
    Matrix features;                      // N x D
    std::vector<int> labels;              // canonical, in 0..C-1
    std::vector<std::string> feature_names;
    std::vector<std::string> class_names; // original label text per class index

    Index size() const { return features.rows(); }
    Index dim() const { return features.cols(); }
    int num_classes() const;

    /// Throws InvariantError unless the dataset is non-empty, finite and its
    /// labels are dense in 0..C-1.
    void validate() const;
};

/// Binary, symmetric, unit-diagonal pairwise similarity.
struct SimilarityMatrix {
    BinaryMatrix entries;

    Index size() const { return entries.rows(); }
    bool similar(Index m, Index n) const { return entries(m, n) != 0; }
    bool is_symmetric() const;
    bool has_unit_diagonal() const;
};

enum class SynthKind { overlap, sparse_overlap };

struct SynthConfig {
    SynthKind kind = SynthKind::overlap;
    int dim = 30;
    int n_train = 80;
    int n_test = 320;
    double spectral_radius = 0.3;
    double sparsity_prob = 0.5;
    // Controls the separation of the class means along one retained axis:
    // the means sit at +/-mu*e_j with mu set so that a shared-covariance
    // Bayes rule along that axis has this accuracy.
    double bayes_accuracy = 0.6;
    std::uint64_t seed = 0;

    void validate() const;
};

struct SynthResult {
    Dataset train;
    Dataset test;
    std::vector<Index> zeroed_features; // empty for SynthKind::overlap
    Index signal_feature = 0;           // axis carrying the class-mean offset
};

struct StandardizationParams {
    Vector mean;
    Vector scale; // per-feature standard deviation; 0 marks a constant feature

    Matrix apply(const Matrix& features) const;
    Dataset apply(const Dataset& data) const;
};

struct Standardized {
    Dataset train;
    std::vector<Dataset> others;
    StandardizationParams params;
};

struct SplitFractions {
    double train = 0.5;
    double val = 0.25;
    double test = 0.25;
};

struct SplitResult {
    Dataset train, val, test;
    std::vector<Index> train_indices, val_indices, test_indices;
    bool stratified = true;
    std::string warning; // set when stratification had to be abandoned
};

/// Reads a comma-separated file. A first row whose feature cells do not all
/// parse as numbers is treated as a header. A negative label_column counts
/// from the end (-1 is the last column).
Dataset load_csv(const std::filesystem::path& path, int label_column = -1);

/// Writes features followed by the canonical label in the last column.
void write_csv(const Dataset& data, const std::filesystem::path& path);

/// Reads a numeric-only matrix (optional header row, no label column).
Matrix load_matrix_csv(const std::filesystem::path& path);

SimilarityMatrix similarity_from_labels(std::span<const int> labels);

SynthResult synth_gaussian_mixture(const SynthConfig& config);

Standardized standardize(const Dataset& train, std::span<const Dataset> others = {});

SplitResult split(const Dataset& data, SplitFractions fractions, std::uint64_t seed);

/// Rows of `data` at `indices`, in that order. Labels are kept as-is.
Dataset subset(const Dataset& data, std::span<const Index> indices);

/// Two classes, each made of two elongated clusters placed so that the
/// nearest cluster of the other class is closer than the second cluster of
/// the same class. With per_cluster = 1 and spread = 0 this is the four-point
/// toy: class 0 at (0,0),(3,0) and class 1 at (0,1),(3,1).
Dataset make_toy_dataset(int per_cluster, double spread, std::uint64_t seed);

/// Maps arbitrary integer labels to 0..C-1 by order of first appearance.
std::vector<int> canonicalize_labels(std::span<const int> raw);

} // namespace r2lml
