#include "r2lml/dataset.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

namespace r2lml {

std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
    // FNV-1a over the stream name, mixed into the master seed with splitmix64.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char ch : stream) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    std::uint64_t z = master ^ h;
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

int Dataset::num_classes() const {
    if (labels.empty()) return 0;
    return *std::max_element(labels.begin(), labels.end()) + 1;
}

void Dataset::validate() const {
    if (features.rows() < 1 || features.cols() < 1)
        throw InvariantError("dataset must have at least one sample and one feature");
    if (static_cast<Index>(labels.size()) != features.rows())
        throw DimensionError("dataset has " + std::to_string(features.rows()) + " rows but " +
                             std::to_string(labels.size()) + " labels");
    if (!features.allFinite()) throw InvariantError("dataset contains non-finite feature values");
    const int c = num_classes();
    std::vector<bool> seen(static_cast<std::size_t>(std::max(c, 0)), false);
    for (int l : labels) {
        if (l < 0) throw InvariantError("negative label " + std::to_string(l));
        seen[static_cast<std::size_t>(l)] = true;
    }
    for (int k = 0; k < c; ++k)
        if (!seen[static_cast<std::size_t>(k)])
            throw InvariantError("labels are not dense: class " + std::to_string(k) + " is missing");
}

bool SimilarityMatrix::is_symmetric() const {
    return entries.rows() == entries.cols() && entries == entries.transpose();
}

bool SimilarityMatrix::has_unit_diagonal() const {
    for (Index i = 0; i < entries.rows(); ++i)
        if (entries(i, i) != 1) return false;
    return true;
}

std::vector<int> canonicalize_labels(std::span<const int> raw) {
    std::unordered_map<int, int> index;
    std::vector<int> out;
    out.reserve(raw.size());
    for (int r : raw) {
        auto [it, inserted] = index.try_emplace(r, static_cast<int>(index.size()));
        out.push_back(it->second);
    }
    return out;
}

SimilarityMatrix similarity_from_labels(std::span<const int> labels) {
    const auto n = static_cast<Index>(labels.size());
    SimilarityMatrix s{BinaryMatrix(n, n)};
    for (Index m = 0; m < n; ++m)
        for (Index k = 0; k < n; ++k)
            s.entries(m, k) = labels[static_cast<std::size_t>(m)] == labels[static_cast<std::size_t>(k)] ? 1 : 0;
    return s;
}

// ---- CSV -------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> cells;
    std::string_view rest(line);
    while (true) {
        auto pos = rest.find(',');
        cells.emplace_back(trim(rest.substr(0, pos)));
        if (pos == std::string_view::npos) break;
        rest.remove_prefix(pos + 1);
    }
    return cells;
}

bool parse_double(std::string_view text, double& out) {
    if (text.empty()) return false;
    if (text.front() == '+') text.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc() && ptr == text.data() + text.size();
}

struct RawTable {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;
};

RawTable read_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path.string() + "'");
    RawTable table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        table.rows.push_back(split_row(line));
        table.line_numbers.push_back(line_no);
    }
    if (in.bad()) throw IoError("read failure on '" + path.string() + "'");
    if (table.rows.empty()) throw ParseError("'" + path.string() + "' is empty");
    const std::size_t arity = table.rows.front().size();
    for (std::size_t r = 0; r < table.rows.size(); ++r)
        if (table.rows[r].size() != arity)
            throw ParseError("ragged row " + std::to_string(r) + " (line " +
                             std::to_string(table.line_numbers[r]) + "): expected " +
                             std::to_string(arity) + " columns, found " +
                             std::to_string(table.rows[r].size()));
    return table;
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

Dataset load_csv(const std::filesystem::path& path, int label_column) {
    RawTable table = read_table(path);
    const auto arity = static_cast<int>(table.rows.front().size());
    if (arity < 2) throw ParseError("'" + path.string() + "' needs at least one feature and a label column");
    const int label_col = label_column < 0 ? arity + label_column : label_column;
    if (label_col < 0 || label_col >= arity)
        throw ConfigError("label column " + std::to_string(label_column) + " out of range for " +
                          std::to_string(arity) + " columns");

    std::size_t first = 0;
    std::vector<std::string> names;
    {
        const auto& row = table.rows.front();
        double tmp = 0.0;
        bool header = false;
        for (int j = 0; j < arity; ++j)
            if (j != label_col && !parse_double(row[static_cast<std::size_t>(j)], tmp)) header = true;
        if (header) {
            first = 1;
            for (int j = 0; j < arity; ++j)
                if (j != label_col) names.push_back(row[static_cast<std::size_t>(j)]);
        }
    }
    const auto n = static_cast<Index>(table.rows.size() - first);
    if (n == 0) throw ParseError("'" + path.string() + "' has a header but no data rows");

    Dataset data;
    data.features.resize(n, arity - 1);
    data.feature_names = std::move(names);
    std::map<std::string, int> class_index;
    for (Index i = 0; i < n; ++i) {
        const std::size_t r = first + static_cast<std::size_t>(i);
        const auto& row = table.rows[r];
        Index col = 0;
        for (int j = 0; j < arity; ++j) {
            const auto& cell = row[static_cast<std::size_t>(j)];
            if (j == label_col) {
                if (cell.empty())
                    throw ParseError("empty label at row " + std::to_string(r) + ", column " + std::to_string(j));
                auto [it, inserted] = class_index.try_emplace(cell, static_cast<int>(class_index.size()));
                if (inserted) data.class_names.push_back(cell);
                data.labels.push_back(it->second);
                continue;
            }
            double v = 0.0;
            if (!parse_double(cell, v) || !std::isfinite(v))
                throw ParseError("non-numeric feature '" + cell + "' at row " + std::to_string(r) +
                                 " (line " + std::to_string(table.line_numbers[r]) + "), column " +
                                 std::to_string(j));
            data.features(i, col++) = v;
        }
    }
    return data;
}

Matrix load_matrix_csv(const std::filesystem::path& path) {
    RawTable table = read_table(path);
    const std::size_t arity = table.rows.front().size();
    std::size_t first = 0;
    double tmp = 0.0;
    for (const auto& cell : table.rows.front())
        if (!parse_double(cell, tmp)) first = 1;
    const auto n = static_cast<Index>(table.rows.size() - first);
    if (n == 0) throw ParseError("'" + path.string() + "' has a header but no data rows");
    Matrix out(n, static_cast<Index>(arity));
    for (Index i = 0; i < n; ++i) {
        const std::size_t r = first + static_cast<std::size_t>(i);
        for (std::size_t j = 0; j < arity; ++j) {
            double v = 0.0;
            if (!parse_double(table.rows[r][j], v) || !std::isfinite(v))
                throw ParseError("non-numeric value '" + table.rows[r][j] + "' at row " + std::to_string(r) +
                                 ", column " + std::to_string(j));
            out(i, static_cast<Index>(j)) = v;
        }
    }
    return out;
}

void write_csv(const Dataset& data, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    if (!data.feature_names.empty()) {
        for (const auto& name : data.feature_names) out << name << ',';
        out << "label\n";
    }
    for (Index i = 0; i < data.size(); ++i) {
        for (Index j = 0; j < data.dim(); ++j) out << format_double(data.features(i, j)) << ',';
        const int l = data.labels[static_cast<std::size_t>(i)];
        if (static_cast<std::size_t>(l) < data.class_names.size())
            out << data.class_names[static_cast<std::size_t>(l)];
        else
            out << l;
        out << '\n';
    }
    if (!out) throw IoError("write failure on '" + path.string() + "'");
}

// ---- synthesis ---------------------------------------------------------------

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double normal_quantile(double p) {
    double lo = -40.0, hi = 40.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (normal_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

Matrix random_covariance(int dim, double spectral_radius, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix a(dim, dim);
    for (Index i = 0; i < a.rows(); ++i)
        for (Index j = 0; j < a.cols(); ++j) a(i, j) = normal(rng);
    Matrix cov = a * a.transpose() / static_cast<double>(dim);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov, Eigen::EigenvaluesOnly);
    return cov * (spectral_radius / eig.eigenvalues().maxCoeff());
}

Dataset draw_samples(int n, const std::array<Vector, 2>& means, const std::array<Matrix, 2>& chol,
                     const std::vector<Index>& zeroed, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const Index d = means[0].size();
    Dataset data;
    data.features.resize(n, d);
    data.class_names = {"0", "1"};
    Vector z(d);
    for (int i = 0; i < n; ++i) {
        const int label = i % 2;
        for (Index j = 0; j < d; ++j) z(j) = normal(rng);
        data.features.row(i) = (means[static_cast<std::size_t>(label)] + chol[static_cast<std::size_t>(label)] * z).transpose();
        for (Index j : zeroed) data.features(i, j) = 0.0;
        data.labels.push_back(label);
    }
    return data;
}

} // namespace

void SynthConfig::validate() const {
    if (dim < 2) throw ConfigError("synthetic dimension must be at least 2");
    if (n_train < 2 || n_test < 2) throw ConfigError("n_train and n_test must be at least 2");
    if (!(spectral_radius > 0.0)) throw ConfigError("spectral radius must be positive");
    if (!(sparsity_prob >= 0.0 && sparsity_prob <= 1.0)) throw ConfigError("sparsity probability must lie in [0,1]");
    if (!(bayes_accuracy > 0.5 && bayes_accuracy < 1.0)) throw ConfigError("bayes accuracy must lie in (0.5, 1)");
}

SynthResult synth_gaussian_mixture(const SynthConfig& config) {
    config.validate();
    std::mt19937_64 rng(derive_seed(config.seed, "synth"));

    SynthResult result;
    std::vector<bool> masked(static_cast<std::size_t>(config.dim), false);
    if (config.kind == SynthKind::sparse_overlap) {
        std::bernoulli_distribution coin(config.sparsity_prob);
        for (int j = 0; j < config.dim; ++j)
            if (coin(rng)) masked[static_cast<std::size_t>(j)] = true;
        // Keep at least one informative axis.
        if (std::all_of(masked.begin(), masked.end(), [](bool b) { return b; })) masked[0] = false;
        for (int j = 0; j < config.dim; ++j)
            if (masked[static_cast<std::size_t>(j)]) result.zeroed_features.push_back(j);
    }
    const auto signal = static_cast<Index>(std::find(masked.begin(), masked.end(), false) - masked.begin());
    result.signal_feature = signal;

    std::array<Matrix, 2> cov{random_covariance(config.dim, config.spectral_radius, rng),
                              random_covariance(config.dim, config.spectral_radius, rng)};
    std::array<Matrix, 2> chol{cov[0].llt().matrixL(), cov[1].llt().matrixL()};
    const double sigma = std::sqrt(0.5 * (cov[0](signal, signal) + cov[1](signal, signal)));
    const double offset = normal_quantile(config.bayes_accuracy) * sigma;
    std::array<Vector, 2> means{Vector::Zero(config.dim), Vector::Zero(config.dim)};
    means[0](signal) = offset;
    means[1](signal) = -offset;

    result.train = draw_samples(config.n_train, means, chol, result.zeroed_features, rng);
    result.test = draw_samples(config.n_test, means, chol, result.zeroed_features, rng);
    return result;
}

Dataset make_toy_dataset(int per_cluster, double spread, std::uint64_t seed) {
    if (per_cluster < 1) throw ConfigError("toy dataset needs at least one sample per cluster");
    const std::array<std::array<double, 2>, 4> centers{{{0.0, 0.0}, {0.0, 1.0}, {3.0, 0.0}, {3.0, 1.0}}};
    const std::array<int, 4> labels{0, 1, 0, 1};
    std::mt19937_64 rng(derive_seed(seed, "toy"));
    std::normal_distribution<double> normal(0.0, 1.0);
    Dataset data;
    data.features.resize(4 * per_cluster, 2);
    data.class_names = {"0", "1"};
    Index row = 0;
    for (int i = 0; i < per_cluster; ++i) {
        for (std::size_t c = 0; c < 4; ++c) {
            data.features(row, 0) = centers[c][0] + spread * normal(rng);
            data.features(row, 1) = centers[c][1] + 0.1 * spread * normal(rng);
            data.labels.push_back(labels[c]);
            ++row;
        }
    }
    return data;
}

// ---- standardization -----------------------------------------------------------

Matrix StandardizationParams::apply(const Matrix& features) const {
    if (features.cols() != mean.size())
        throw DimensionError("standardization expects " + std::to_string(mean.size()) + " features, got " +
                             std::to_string(features.cols()));
    Matrix out(features.rows(), features.cols());
    for (Index j = 0; j < features.cols(); ++j) {
        if (scale(j) > 0.0)
            out.col(j) = (features.col(j).array() - mean(j)) / scale(j);
        else
            out.col(j).setZero();
    }
    return out;
}

Dataset StandardizationParams::apply(const Dataset& data) const {
    Dataset out = data;
    out.features = apply(data.features);
    return out;
}

Standardized standardize(const Dataset& train, std::span<const Dataset> others) {
    if (train.size() < 1) throw InvariantError("cannot standardize an empty training set");
    for (const auto& o : others)
        if (o.dim() != train.dim())
            throw DimensionError("dimension mismatch: train has " + std::to_string(train.dim()) +
                                 " features, other set has " + std::to_string(o.dim()));
    StandardizationParams params;
    params.mean = train.features.colwise().mean().transpose();
    params.scale.resize(train.dim());
    for (Index j = 0; j < train.dim(); ++j) {
        const double var = (train.features.col(j).array() - params.mean(j)).square().mean();
        const double sd = std::sqrt(var);
        params.scale(j) = sd > 1e-12 * std::max(1.0, std::abs(params.mean(j))) ? sd : 0.0;
    }
    Standardized result;
    result.train = params.apply(train);
    for (const auto& o : others) result.others.push_back(params.apply(o));
    result.params = std::move(params);
    return result;
}

// ---- splitting -------------------------------------------------------------------

Dataset subset(const Dataset& data, std::span<const Index> indices) {
    Dataset out;
    out.features.resize(static_cast<Index>(indices.size()), data.dim());
    out.feature_names = data.feature_names;
    out.class_names = data.class_names;
    for (std::size_t i = 0; i < indices.size(); ++i) {
        out.features.row(static_cast<Index>(i)) = data.features.row(indices[i]);
        out.labels.push_back(data.labels[static_cast<std::size_t>(indices[i])]);
    }
    return out;
}

SplitResult split(const Dataset& data, SplitFractions f, std::uint64_t seed) {
    if (!(f.train > 0.0 && f.val > 0.0 && f.test >= 0.0))
        throw ConfigError("split fractions must be positive (test may be zero)");
    if (f.train + f.val + f.test > 1.0 + 1e-12) throw ConfigError("split fractions must sum to at most 1");
    const Index n = data.size();
    auto count = [n](double frac) { return static_cast<Index>(std::floor(frac * static_cast<double>(n) + 1e-9)); };
    const Index n_train = count(f.train), n_val = count(f.val), n_test = count(f.test);

    std::mt19937_64 rng(derive_seed(seed, "split"));
    SplitResult result;

    const int classes = data.num_classes();
    std::vector<std::vector<Index>> by_class(static_cast<std::size_t>(classes));
    for (Index i = 0; i < n; ++i) by_class[static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)])].push_back(i);
    const std::size_t parts = f.test > 0.0 ? 3 : 2;
    for (std::size_t c = 0; c < by_class.size(); ++c) {
        if (by_class[c].size() < parts) {
            result.stratified = false;
            result.warning = "class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                             " samples, fewer than the " + std::to_string(parts) +
                             " split parts; falling back to an unstratified split";
            break;
        }
    }

    std::vector<Index> order;
    order.reserve(static_cast<std::size_t>(n));
    if (result.stratified) {
        // Interleave classes by relative position so every contiguous cut is
        // close to the class proportions.
        struct Keyed {
            double key;
            int cls;
            Index index;
        };
        std::vector<Keyed> keyed;
        for (std::size_t c = 0; c < by_class.size(); ++c) {
            auto& members = by_class[c];
            std::shuffle(members.begin(), members.end(), rng);
            const auto nc = static_cast<double>(members.size());
            for (std::size_t i = 0; i < members.size(); ++i)
                keyed.push_back({(static_cast<double>(i) + 0.5) / nc, static_cast<int>(c), members[i]});
        }
        std::sort(keyed.begin(), keyed.end(), [](const Keyed& a, const Keyed& b) {
            return a.key != b.key ? a.key < b.key : a.cls < b.cls;
        });
        for (const auto& k : keyed) order.push_back(k.index);
    } else {
        order.resize(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), Index{0});
        std::shuffle(order.begin(), order.end(), rng);
    }

    auto take = [&order](std::size_t from, Index len) {
        return std::vector<Index>(order.begin() + static_cast<std::ptrdiff_t>(from),
                                  order.begin() + static_cast<std::ptrdiff_t>(from) + len);
    };
    result.train_indices = take(0, n_train);
    result.val_indices = take(static_cast<std::size_t>(n_train), n_val);
    result.test_indices = take(static_cast<std::size_t>(n_train + n_val), n_test);
    result.train = subset(data, result.train_indices);
    result.val = subset(data, result.val_indices);
    result.test = subset(data, result.test_indices);
    return result;
}

} // namespace r2lml
