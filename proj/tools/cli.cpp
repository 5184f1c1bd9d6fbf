#include "cli.hpp"

#include "r2lml/evaluation.hpp"
#include "r2lml/trainer.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

namespace r2lml::cli {

namespace {

struct HyperFlags {
    Hyperparams hyper;
    std::string method = "e-r2lml";
    int restarts = 1;
    int threads = 1;
};

void add_hyper_options(CLI::App* app, HyperFlags& f) {
    auto& h = f.hyper;
    app->add_option("--method", f.method, "e-r2lml or t-r2lml")->capture_default_str();
    app->add_option("--k-metrics", h.k_metrics, "number of local metrics K")->capture_default_str();
    app->add_option("--lambda", h.lambda, "nuclear-norm weight")->capture_default_str();
    app->add_option("--c", h.c, "hinge penalty C")->capture_default_str();
    app->add_option("--step", h.step_length, "PSD step length")->capture_default_str();
    app->add_option("--epochs", h.epochs, "outer iterations (e-r2lml)")->capture_default_str();
    app->add_option("--psd-iters", h.psd_iters_per_epoch, "PSD iterations per outer iteration")->capture_default_str();
    app->add_option("--mm-max-iters", h.mm_max_iters, "MM iteration cap")->capture_default_str();
    app->add_option("--mm-tol", h.mm_tol, "MM stopping tolerance")->capture_default_str();
    app->add_option("--outer-tol", h.outer_tol, "objective change that ends training")->capture_default_str();
    app->add_option("--max-outer-blocks", h.max_outer_blocks, "outer iterations (t-r2lml)")->capture_default_str();
    app->add_option("--bisection-tol", h.bisection_tol, "simplex bisection tolerance")->capture_default_str();
    app->add_option("--p-dim", h.p_dim, "output dimension P (0: P = D)")->capture_default_str();
    app->add_option("--seed", h.seed, "master seed")->capture_default_str();
    app->add_option("--restarts", f.restarts, "random restarts, best objective kept")->capture_default_str();
    app->add_option("--threads", f.threads, "worker threads")->capture_default_str();
}

std::string fmt(double v) { return format_double(v); }

std::string fixed4(double v) {
    std::ostringstream s;
    s << std::fixed << std::setprecision(4) << v;
    return s.str();
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path + "'");
    return out;
}

void finish(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw IoError("write failure on '" + path + "'");
}

// Features for prediction or transductive training. A file with one column
// more than the model's dimension carries labels in `label_column`, which
// are dropped here.
Matrix load_features(const std::string& path, Index dim, int label_column) {
    Matrix m;
    try {
        m = load_matrix_csv(path);
    } catch (const ParseError&) {
        return load_csv(path, label_column).features;
    }
    if (m.cols() == dim) return m;
    if (m.cols() == dim + 1) {
        const Index drop = label_column < 0 ? m.cols() + label_column : label_column;
        if (drop < 0 || drop >= m.cols()) throw ConfigError("label column out of range");
        Matrix out(m.rows(), dim);
        Index j = 0;
        for (Index c = 0; c < m.cols(); ++c)
            if (c != drop) out.col(j++) = m.col(c);
        return out;
    }
    throw DimensionError("'" + path + "' has " + std::to_string(m.cols()) + " columns, expected " +
                         std::to_string(dim));
}

// Re-expresses labels of a separately loaded file in the model's class
// indices. Classes the model never saw get indices past the known ones.
void align_labels(Dataset& data, const std::vector<std::string>& reference) {
    if (reference.empty()) return;
    std::vector<int> map(data.class_names.size());
    int extra = static_cast<int>(reference.size());
    for (std::size_t i = 0; i < data.class_names.size(); ++i) {
        const auto it = std::find(reference.begin(), reference.end(), data.class_names[i]);
        map[i] = it == reference.end() ? extra++ : static_cast<int>(it - reference.begin());
    }
    for (auto& l : data.labels) l = map[static_cast<std::size_t>(l)];
}

std::string label_text(int label, const std::vector<std::string>& names) {
    if (label >= 0 && static_cast<std::size_t>(label) < names.size()) return names[static_cast<std::size_t>(label)];
    return std::to_string(label);
}

void write_trace(const TrainingTrace& trace, int k, bool wall_time, const std::string& path) {
    auto out = open_out(path);
    out << "iteration,objective_start,after_block1,after_block2,after_block3,mm_iterations,mm_stop,"
           "similarity_accepted";
    for (int i = 0; i < k; ++i) out << ",nuclear_norm_" << i;
    for (int i = 0; i < k; ++i) out << ",zero_columns_" << i;
    if (wall_time) out << ",wall_seconds";
    out << '\n';
    double start = trace.initial_objective;
    for (const auto& r : trace.records) {
        out << r.iteration << ',' << fmt(start) << ',' << fmt(r.after_block1) << ',' << fmt(r.after_block2) << ','
            << (std::isnan(r.after_block3) ? std::string() : fmt(r.after_block3)) << ',' << r.mm_iterations << ','
            << mm_stop_name(r.mm_stop) << ',' << (r.similarity_accepted ? 1 : 0);
        for (double v : r.nuclear_norms) out << ',' << fmt(v);
        for (int v : r.zero_columns) out << ',' << v;
        if (wall_time) out << ',' << fmt(r.wall_seconds);
        out << '\n';
        start = std::isnan(r.after_block3) ? r.after_block2 : r.after_block3;
    }
    finish(out, path);
}

void write_psd_trace(const TrainingTrace& trace, const std::string& path) {
    auto out = open_out(path);
    out << "iteration,metric,objective,nuclear_norm\n";
    for (const auto& r : trace.psd_rows)
        out << r.iteration << ',' << r.metric << ',' << fmt(r.objective) << ',' << fmt(r.nuclear_norm) << '\n';
    finish(out, path);
}

void write_similarity(const SimilarityMatrix& s, const std::string& path) {
    auto out = open_out(path);
    for (Index i = 0; i < s.size(); ++i) {
        for (Index j = 0; j < s.size(); ++j) out << (j ? "," : "") << int(s.entries(i, j));
        out << '\n';
    }
    finish(out, path);
}

void write_predictions(const PredictionSet& p, const std::vector<std::string>& names, const std::string& path) {
    auto out = open_out(path);
    const auto bits = p.correct();
    out << (bits.empty() ? "index,predicted\n" : "index,predicted,true,correct\n");
    for (std::size_t i = 0; i < p.predicted.size(); ++i) {
        out << i << ',' << label_text(p.predicted[i], names);
        if (!bits.empty()) out << ',' << label_text((*p.true_labels)[i], names) << ',' << int(bits[i]);
        out << '\n';
    }
    finish(out, path);
}

std::vector<std::uint8_t> read_correct_column(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ParseError("'" + path + "' is empty");
    if (line.find("correct") == std::string::npos)
        throw ParseError("'" + path + "' has no 'correct' column; write it with the evaluate command");
    std::vector<std::uint8_t> bits;
    int row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.rfind(',');
        const std::string cell = comma == std::string::npos ? line : line.substr(comma + 1);
        if (cell != "0" && cell != "1")
            throw ParseError("'" + path + "' line " + std::to_string(row) + ": correct flag must be 0 or 1");
        bits.push_back(cell == "1" ? 1 : 0);
    }
    return bits;
}

// ---- commands --------------------------------------------------------------

struct TrainArgs {
    HyperFlags flags;
    std::string input, test_features, out, trace, psd_trace, similarity_out;
    int label_column = -1;
    bool no_standardize = false;
    bool wall_time = false;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
    const Method method = parse_method(a.flags.method);
    if (method == Method::t_r2lml && a.test_features.empty())
        throw ConfigError("--method t-r2lml requires --test-features");
    Dataset train = load_csv(a.input, a.label_column);
    Matrix test;
    if (!a.test_features.empty()) test = load_features(a.test_features, train.dim(), a.label_column);

    std::optional<StandardizationParams> params;
    if (!a.no_standardize) {
        Standardized st = standardize(train);
        train = std::move(st.train);
        params = st.params;
        if (test.size() > 0) test = params->apply(test);
    }

    TrainOptions options;
    options.restarts = a.flags.restarts;
    options.threads = a.flags.threads;
    options.record_psd_trace = !a.psd_trace.empty();

    LocalMetricModel model;
    TrainingTrace trace;
    if (method == Method::e_r2lml) {
        TrainResult r = train_e_r2lml(train, a.flags.hyper, options);
        model = std::move(r.model);
        trace = std::move(r.trace);
    } else {
        TransductiveResult r = train_t_r2lml(train, test, a.flags.hyper, options);
        model = std::move(r.model);
        trace = std::move(r.trace);
        if (!a.similarity_out.empty()) write_similarity(r.similarity, a.similarity_out);
    }
    model.standardization = params;
    save_model(model, a.out);
    write_trace(trace, model.num_metrics(), a.wall_time, a.trace.empty() ? a.out + ".trace.csv" : a.trace);
    if (!a.psd_trace.empty()) write_psd_trace(trace, a.psd_trace);
    out << "final_objective=" << fmt(trace.final_objective()) << " outer_iterations=" << trace.records.size()
        << " termination=" << termination_name(trace.termination) << '\n';
    return kExitOk;
}

struct PredictArgs {
    std::string model, input, out;
    int label_column = -1;
    int k = 5;
};

// Coefficients for the rows of `features`: transductive models only know
// the test set they were trained with.
PredictionSet predict_rows(const LocalMetricModel& model, const Matrix& features, int k) {
    if (model.method == Method::e_r2lml) return predict(model, features, Method::e_r2lml, nullptr, k);
    const Matrix& known = model.test_features;
    bool same = known.rows() == features.rows() && known.cols() == features.cols();
    if (same && known.size() > 0) {
        const double scale = std::max(1.0, known.cwiseAbs().maxCoeff());
        same = (known - features).cwiseAbs().maxCoeff() <= 1e-9 * scale;
    }
    if (!same)
        throw ConfigError("a t-r2lml model predicts only the test features it was trained with (" +
                          std::to_string(known.rows()) + " rows)");
    return predict(model, features, Method::t_r2lml, &model.test_coefficients, k);
}

Matrix model_space(const LocalMetricModel& model, const Matrix& raw) {
    return model.standardization ? model.standardization->apply(raw) : raw;
}

int cmd_predict(const PredictArgs& a, std::ostream& out) {
    const LocalMetricModel model = load_model(a.model);
    const Matrix features = model_space(model, load_features(a.input, model.input_dim(), a.label_column));
    const PredictionSet p = predict_rows(model, features, a.k);
    write_predictions(p, model.class_names, a.out);
    out << "predicted " << p.predicted.size() << " samples\n";
    return kExitOk;
}

int cmd_evaluate(const PredictArgs& a, std::ostream& out) {
    const LocalMetricModel model = load_model(a.model);
    Dataset test = load_csv(a.input, a.label_column);
    if (test.dim() != model.input_dim())
        throw DimensionError("'" + a.input + "' has " + std::to_string(test.dim()) + " features, model expects " +
                             std::to_string(model.input_dim()));
    align_labels(test, model.class_names);
    PredictionSet p = predict_rows(model, model_space(model, test.features), a.k);
    p.true_labels = test.labels;
    if (!a.out.empty()) write_predictions(p, model.class_names, a.out);
    out << "accuracy=" << fixed4(p.accuracy()) << '\n';
    return kExitOk;
}

struct CompareArgs {
    std::vector<std::string> predictions;
    double alpha = 0.05;
    std::string out;
};

int cmd_compare(const CompareArgs& a, std::ostream& out) {
    if (a.predictions.size() < 2) throw ConfigError("--predictions needs at least two files");
    std::vector<std::vector<std::uint8_t>> bits;
    for (const auto& path : a.predictions) bits.push_back(read_correct_column(path));
    struct Row {
        std::size_t i, j;
        McNemarResult r;
    };
    std::vector<Row> rows;
    for (std::size_t i = 0; i < bits.size(); ++i)
        for (std::size_t j = i + 1; j < bits.size(); ++j) rows.push_back({i, j, mcnemar(bits[i], bits[j])});
    std::vector<double> p;
    for (const auto& r : rows) p.push_back(r.r.p_value);
    const auto reject = holm(p, a.alpha);

    out << std::left << std::setw(40) << "pair" << std::setw(6) << "b" << std::setw(6) << "c" << std::setw(7)
        << "branch" << std::setw(12) << "statistic" << std::setw(12) << "p" << "holm\n";
    std::ofstream csv;
    if (!a.out.empty()) {
        csv = open_out(a.out);
        csv << "a,b_file,b,c,branch,statistic,p_value,reject\n";
    }
    for (std::size_t n = 0; n < rows.size(); ++n) {
        const auto& [i, j, r] = rows[n];
        std::ostringstream pval, stat;
        pval << std::setprecision(4) << r.p_value;
        stat << std::setprecision(4) << r.statistic;
        out << std::left << std::setw(40) << (a.predictions[i] + " vs " + a.predictions[j]) << std::setw(6) << r.b
            << std::setw(6) << r.c << std::setw(7) << mcnemar_branch_name(r.branch) << std::setw(12) << stat.str()
            << std::setw(12) << pval.str() << (reject[n] ? "reject" : "keep") << '\n';
        if (csv.is_open())
            csv << a.predictions[i] << ',' << a.predictions[j] << ',' << r.b << ',' << r.c << ','
                << mcnemar_branch_name(r.branch) << ',' << fmt(r.statistic) << ',' << fmt(r.p_value) << ','
                << (reject[n] ? 1 : 0) << '\n';
    }
    if (csv.is_open()) finish(csv, a.out);
    return kExitOk;
}

struct SynthArgs {
    SynthConfig cfg;
    std::string kind = "overlap";
    std::string out_train, out_test;
};

int cmd_synth(SynthArgs a, std::ostream& out) {
    if (a.kind == "overlap")
        a.cfg.kind = SynthKind::overlap;
    else if (a.kind == "sparse-overlap" || a.kind == "sparse_overlap")
        a.cfg.kind = SynthKind::sparse_overlap;
    else
        throw ConfigError("unknown --kind '" + a.kind + "' (overlap, sparse-overlap)");
    const SynthResult r = synth_gaussian_mixture(a.cfg);
    write_csv(r.train, a.out_train);
    write_csv(r.test, a.out_test);
    out << "train=" << r.train.size() << " test=" << r.test.size() << " dim=" << r.train.dim()
        << " signal_feature=" << r.signal_feature << " zeroed_features=" << r.zeroed_features.size() << '\n';
    return kExitOk;
}

struct SweepArgs {
    HyperFlags flags;
    std::string input, val, out, best_out;
    int label_column = -1;
    std::vector<int> k_grid;
    std::vector<double> lambda_grid{0.0, 0.1, 1.0, 10.0, 100.0, 1000.0};
    std::vector<double> step_grid;
    int knn_k = 5;
    bool no_standardize = false;
};

int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
    const Method method = parse_method(a.flags.method);
    Dataset train = load_csv(a.input, a.label_column);
    Dataset val;
    if (a.val.empty()) {
        SplitResult s = split(train, SplitFractions{0.75, 0.25, 0.0}, derive_seed(a.flags.hyper.seed, "split"));
        if (!s.warning.empty()) err << "warning: " << s.warning << '\n';
        train = std::move(s.train);
        val = std::move(s.val);
    } else {
        val = load_csv(a.val, a.label_column);
        align_labels(val, train.class_names);
    }
    if (!a.no_standardize) {
        const Dataset others[] = {val};
        Standardized st = standardize(train, others);
        train = std::move(st.train);
        val = std::move(st.others.front());
    }
    HyperGrid grid;
    grid.k_metrics = a.k_grid.empty() ? std::vector<int>{a.flags.hyper.k_metrics} : a.k_grid;
    grid.lambdas = a.lambda_grid;
    grid.step_lengths = a.step_grid;
    TrainOptions options;
    options.restarts = a.flags.restarts;
    options.threads = a.flags.threads;
    const CrossValidation cv = cross_validate(train, val, grid, a.flags.hyper, method, a.knn_k, options);

    auto table = open_out(a.out);
    table << "k_metrics,lambda,step_length,accuracy,objective,error\n";
    for (const auto& r : cv.table) {
        table << r.k_metrics << ',' << fmt(r.lambda) << ',' << fmt(r.step_length) << ','
              << (std::isnan(r.accuracy) ? "" : fmt(r.accuracy)) << ','
              << (std::isnan(r.objective) ? "" : fmt(r.objective)) << ',';
        std::string e = r.error;
        std::replace(e.begin(), e.end(), ',', ';');
        table << e << '\n';
    }
    finish(table, a.out);

    const std::string best_path = a.best_out.empty() ? a.out + ".best.json" : a.best_out;
    auto best = open_out(best_path);
    best << nlohmann::json{{"method", method_name(method)},
                           {"k_metrics", cv.best.k_metrics},
                           {"lambda", cv.best.lambda},
                           {"step_length", cv.best.step_length},
                           {"c", cv.best.c},
                           {"seed", cv.best.seed}}
                .dump(1)
         << '\n';
    finish(best, best_path);
    out << "grid_points=" << cv.table.size() << " best_k_metrics=" << cv.best.k_metrics
        << " best_lambda=" << fmt(cv.best.lambda) << " best_step=" << fmt(cv.best.step_length) << '\n';
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Reduced-rank local metric learning"};
    app.name("r2lml");
    app.require_subcommand(1);
    app.set_config("--config", "", "INI/TOML file; keys mirror flag names under a [command] section");
    app.fallthrough();

    TrainArgs train;
    auto* t = app.add_subcommand("train", "learn a local metric model");
    t->add_option("--input", train.input, "labelled training CSV")->required()->check(CLI::ExistingFile);
    t->add_option("--label-column", train.label_column, "label column, negative counts from the end");
    t->add_option("--test-features", train.test_features, "test features for t-r2lml");
    t->add_option("--out", train.out, "model file")->required();
    t->add_option("--trace", train.trace, "per-iteration trace CSV (default: <out>.trace.csv)");
    t->add_option("--psd-trace", train.psd_trace, "per-PSD-step trace CSV");
    t->add_option("--similarity-out", train.similarity_out, "learned similarity matrix CSV (t-r2lml)");
    t->add_flag("--no-standardize", train.no_standardize, "keep raw feature scales");
    t->add_flag("--trace-wall-time", train.wall_time, "add wall time to the trace (not reproducible)");
    add_hyper_options(t, train.flags);

    PredictArgs pred;
    auto* p = app.add_subcommand("predict", "label new samples");
    p->add_option("--model", pred.model, "model file")->required()->check(CLI::ExistingFile);
    p->add_option("--input", pred.input, "features CSV")->required()->check(CLI::ExistingFile);
    p->add_option("--label-column", pred.label_column, "label column to drop, if present");
    p->add_option("--k", pred.k, "neighbours")->capture_default_str();
    p->add_option("--out", pred.out, "label CSV")->required();

    PredictArgs eval;
    auto* e = app.add_subcommand("evaluate", "accuracy on a labelled file");
    e->add_option("--model", eval.model, "model file")->required()->check(CLI::ExistingFile);
    e->add_option("--input", eval.input, "labelled CSV")->required()->check(CLI::ExistingFile);
    e->add_option("--label-column", eval.label_column, "label column");
    e->add_option("--k", eval.k, "neighbours")->capture_default_str();
    e->add_option("--out", eval.out, "prediction CSV with correctness flags");

    CompareArgs cmp;
    auto* c = app.add_subcommand("compare", "pairwise McNemar tests with Holm control");
    c->add_option("--predictions", cmp.predictions, "prediction CSVs from evaluate")->required()->expected(2, -1);
    c->add_option("--alpha", cmp.alpha, "family-wise level")->capture_default_str();
    c->add_option("--out", cmp.out, "result CSV");

    SynthArgs syn;
    auto* s = app.add_subcommand("synth", "two-class Gaussian mixture");
    s->add_option("--kind", syn.kind, "overlap or sparse-overlap")->capture_default_str();
    s->add_option("--dim", syn.cfg.dim)->capture_default_str();
    s->add_option("--n-train", syn.cfg.n_train)->capture_default_str();
    s->add_option("--n-test", syn.cfg.n_test)->capture_default_str();
    s->add_option("--spectral-radius", syn.cfg.spectral_radius)->capture_default_str();
    s->add_option("--sparsity-prob", syn.cfg.sparsity_prob)->capture_default_str();
    s->add_option("--bayes-accuracy", syn.cfg.bayes_accuracy)->capture_default_str();
    s->add_option("--seed", syn.cfg.seed)->capture_default_str();
    s->add_option("--out-train", syn.out_train, "training CSV")->required();
    s->add_option("--out-test", syn.out_test, "test CSV")->required();

    SweepArgs sw;
    auto* w = app.add_subcommand("sweep", "cross-validate K, lambda and step");
    w->add_option("--input", sw.input, "labelled training CSV")->required()->check(CLI::ExistingFile);
    w->add_option("--val", sw.val, "labelled validation CSV (default: 25% split of --input)");
    w->add_option("--label-column", sw.label_column, "label column");
    w->add_option("--k-grid", sw.k_grid, "K values")->delimiter(',');
    w->add_option("--lambda-grid", sw.lambda_grid, "lambda values")->delimiter(',')->capture_default_str();
    w->add_option("--step-grid", sw.step_grid, "step lengths")->delimiter(',');
    w->add_option("--knn-k", sw.knn_k, "neighbours for validation accuracy")->capture_default_str();
    w->add_option("--out", sw.out, "score table CSV")->required();
    w->add_option("--best-out", sw.best_out, "best hyperparameters JSON (default: <out>.best.json)");
    w->add_flag("--no-standardize", sw.no_standardize, "keep raw feature scales");
    add_hyper_options(w, sw.flags);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& h) {
        return app.exit(h, out, err);
    } catch (const CLI::CallForAllHelp& h) {
        return app.exit(h, out, err);
    } catch (const CLI::ParseError& pe) {
        app.exit(pe, out, err);
        return kExitUsage;
    }

    try {
        if (t->parsed()) return cmd_train(train, out);
        if (p->parsed()) return cmd_predict(pred, out);
        if (e->parsed()) return cmd_evaluate(eval, out);
        if (c->parsed()) return cmd_compare(cmp, out);
        if (s->parsed()) return cmd_synth(syn, out);
        if (w->parsed()) return cmd_sweep(sw, out, err);
    } catch (const ConfigError& ce) {
        err << "error: " << ce.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& ex) {
        err << "error: " << ex.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

} // namespace r2lml::cli
