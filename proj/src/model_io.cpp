#include "r2lml/metric_model.hpp"

#include <json.hpp>

#include <fstream>

namespace r2lml {

namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
    json data = json::array();
    for (Index i = 0; i < m.rows(); ++i)
        for (Index j = 0; j < m.cols(); ++j) data.push_back(m(i, j));
    return json{{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

Matrix matrix_from_json(const json& j, const char* what) {
    const auto rows = j.at("rows").get<Index>();
    const auto cols = j.at("cols").get<Index>();
    const auto& data = j.at("data");
    if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols)
        throw ParseError(std::string("field '") + what + "' has " + std::to_string(data.size()) +
                         " values, expected " + std::to_string(rows) + "x" + std::to_string(cols));
    Matrix m(rows, cols);
    for (Index i = 0; i < rows; ++i)
        for (Index c = 0; c < cols; ++c) m(i, c) = data[static_cast<std::size_t>(i * cols + c)].get<double>();
    return m;
}

json vector_to_json(const Vector& v) {
    json out = json::array();
    for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
    return out;
}

Vector vector_from_json(const json& j) {
    Vector v(static_cast<Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
    return v;
}

json hyper_to_json(const Hyperparams& h) {
    return json{{"c", h.c},
                {"lambda", h.lambda},
                {"k_metrics", h.k_metrics},
                {"step_length", h.step_length},
                {"epochs", h.epochs},
                {"psd_iters_per_epoch", h.psd_iters_per_epoch},
                {"mm_max_iters", h.mm_max_iters},
                {"mm_tol", h.mm_tol},
                {"outer_tol", h.outer_tol},
                {"max_outer_blocks", h.max_outer_blocks},
                {"bisection_tol", h.bisection_tol},
                {"seed", h.seed},
                {"p_dim", h.p_dim}};
}

Hyperparams hyper_from_json(const json& j) {
    Hyperparams h;
    h.c = j.at("c").get<double>();
    h.lambda = j.at("lambda").get<double>();
    h.k_metrics = j.at("k_metrics").get<int>();
    h.step_length = j.at("step_length").get<double>();
    h.epochs = j.at("epochs").get<int>();
    h.psd_iters_per_epoch = j.at("psd_iters_per_epoch").get<int>();
    h.mm_max_iters = j.at("mm_max_iters").get<int>();
    h.mm_tol = j.at("mm_tol").get<double>();
    h.outer_tol = j.at("outer_tol").get<double>();
    h.max_outer_blocks = j.at("max_outer_blocks").get<int>();
    h.bisection_tol = j.at("bisection_tol").get<double>();
    h.seed = j.at("seed").get<std::uint64_t>();
    h.p_dim = j.at("p_dim").get<int>();
    return h;
}

} // namespace

void save_model(const LocalMetricModel& model, const std::filesystem::path& path) {
    model.validate();
    json transforms = json::array();
    for (const auto& l : model.transforms) transforms.push_back(matrix_to_json(l));
    json doc{{"schema_version", kModelSchemaVersion},
             {"method", method_name(model.method)},
             {"K", model.num_metrics()},
             {"D", model.input_dim()},
             {"P", model.output_dim()},
             {"C", model.hyper.c},
             {"lambda", model.hyper.lambda},
             {"hyperparams", hyper_to_json(model.hyper)},
             {"transforms", std::move(transforms)},
             {"coefficients", matrix_to_json(model.coefficients)},
             {"train_features", matrix_to_json(model.train_features)},
             {"train_labels", model.train_labels},
             {"class_names", model.class_names},
             {"test_features", matrix_to_json(model.test_features)},
             {"test_coefficients", matrix_to_json(model.test_coefficients)}};
    if (model.standardization)
        doc["standardization"] = json{{"mean", vector_to_json(model.standardization->mean)},
                                      {"scale", vector_to_json(model.standardization->scale)}};
    else
        doc["standardization"] = nullptr;

    std::ofstream out(path);
    if (!out) throw IoError("cannot write model file '" + path.string() + "'");
    out << doc.dump(1) << '\n';
    if (!out) throw IoError("write failure on '" + path.string() + "'");
}

LocalMetricModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open model file '" + path.string() + "'");
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ParseError("model file '" + path.string() + "' is malformed or truncated: " + e.what());
    }
    if (!doc.is_object() || !doc.contains("schema_version"))
        throw ParseError("model file '" + path.string() + "' has no schema_version");
    if (!doc["schema_version"].is_string() || doc["schema_version"].get<std::string>() != kModelSchemaVersion)
        throw VersionError("model file '" + path.string() + "' has schema version " + doc["schema_version"].dump() +
                           ", this build reads version \"" + kModelSchemaVersion + "\"");

    LocalMetricModel model;
    try {
        model.method = parse_method(doc.at("method").get<std::string>());
        model.hyper = hyper_from_json(doc.at("hyperparams"));
        model.hyper.c = doc.at("C").get<double>();
        model.hyper.lambda = doc.at("lambda").get<double>();
        for (const auto& t : doc.at("transforms")) model.transforms.push_back(matrix_from_json(t, "transforms"));
        model.coefficients = matrix_from_json(doc.at("coefficients"), "coefficients");
        model.train_features = matrix_from_json(doc.at("train_features"), "train_features");
        model.train_labels = doc.at("train_labels").get<std::vector<int>>();
        model.class_names = doc.at("class_names").get<std::vector<std::string>>();
        model.test_features = matrix_from_json(doc.at("test_features"), "test_features");
        model.test_coefficients = matrix_from_json(doc.at("test_coefficients"), "test_coefficients");
        const auto& st = doc.at("standardization");
        if (!st.is_null())
            model.standardization = StandardizationParams{vector_from_json(st.at("mean")), vector_from_json(st.at("scale"))};
        const auto k = doc.at("K").get<int>();
        const auto d = doc.at("D").get<Index>();
        const auto p = doc.at("P").get<Index>();
        if (k != model.num_metrics() || d != model.input_dim() || p != model.output_dim())
            throw DimensionError("model header (K, D, P) disagrees with the stored arrays");
    } catch (const json::exception& e) {
        throw ParseError("model file '" + path.string() + "' is missing or has malformed fields: " + e.what());
    }
    model.validate(1e-6);
    return model;
}

} // namespace r2lml
