// crftree command-line tool: train / predict / eval / synth.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "crftree/crftree.hpp"

namespace {

using namespace crftree;

/// Bad input: missing labels, mismatched files, unknown names. Exit code 2.
class UsageError : public Error {
public:
    using Error::Error;
};

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

LogLevel log_level() {
    const char* env = std::getenv("CRFTREE_LOG");
    if (!env) return LogLevel::info;
    const std::string v = env;
    if (v == "0" || v == "quiet" || v == "off") return LogLevel::quiet;
    if (v == "2" || v == "debug") return LogLevel::debug;
    return LogLevel::info;
}

template <class... Args>
void log(LogLevel level, const Args&... args) {
    if (static_cast<int>(level) > static_cast<int>(log_level())) return;
    std::ostringstream os;
    (os << ... << args);
    std::cerr << os.str() << '\n';
}

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

// ------------------------------------------------------------------ train

struct TrainArgs {
    std::string data;
    std::string out_model;
    TrainConfig cfg;
    std::string loss_weights;
};

LossWeights choose_loss_weights(const Dataset& ds, const std::string& mode, std::string& used) {
    if (mode == "uniform") {
        used = "uniform";
        return LossWeights::uniform(ds.num_classes);
    }
    if (mode == "inverse-frequency" || (mode.empty() && !ds.loss_weights)) {
        used = "inverse-frequency";
        try {
            return class_frequency_weights(ds.instances, ds.num_classes);
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
    }
    if (mode.empty()) {
        used = "dataset";
        return *ds.loss_weights;
    }
    throw UsageError("unknown --loss-weights '" + mode + "' (valid: uniform, inverse-frequency)");
}

int cmd_train(const TrainArgs& a) {
    try {
        a.cfg.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    const Dataset ds = load_dataset(a.data);
    if (!ds.labeled()) throw UsageError(a.data + ": training data must carry labels on every instance");
    if (ds.num_classes < 2) throw UsageError(a.data + ": training needs at least 2 classes");
    std::string lw_name;
    const LossWeights lw = choose_loss_weights(ds, a.loss_weights, lw_name);

    ModelFile mf;
    mf.dims = ds.dims;
    mf.model = PotentialModel(ds.num_classes);
    if (a.cfg.cg_iters > 0) {
        if (ds.instances.empty()) throw UsageError(a.data + ": no training instances");
        log(LogLevel::info, "training on ", ds.instances.size(), " instances, K = ", ds.num_classes, ", C = ",
            fmt(a.cfg.C));
        const TrainResult res = train_crftree(ds.instances, ds.num_classes, lw, a.cfg, [](const RoundReport& r) {
            log(LogLevel::info, "round ", r.round, " cp_iters ", r.cp_iterations, r.cp_converged ? "" : " (capped)",
                " objective ", fmt(r.objective), " xi ", fmt(r.xi), " max_tree_objective ",
                fmt(r.max_tree_objective), " train_risk ", fmt(r.train_risk));
            if (r.constant_trees > 0) log(LogLevel::debug, "round ", r.round, ": ", r.constant_trees, " constant trees");
        });
        if (res.stopped_early)
            log(LogLevel::info, "stopped after ", res.rounds.size(), " rounds: no new tree improves the objective");
        mf.model = res.model;
    }
    mf.config = {{"C", a.cfg.C},
                 {"cg_iters", a.cfg.cg_iters},
                 {"tree_depth", a.cfg.tree_depth},
                 {"eps_cp", a.cfg.eps_cp},
                 {"max_cp_iters", a.cfg.max_cp_iters},
                 {"seed", a.cfg.seed},
                 {"loss_weights", lw_name},
                 {"loss_weight_values", lw.values()}};
    save_model(mf, a.out_model);
    log(LogLevel::info, "wrote ", a.out_model, " (", mf.model.rounds(), " rounds)");
    return 0;
}

// ---------------------------------------------------------------- predict

int cmd_predict(const std::string& data, const std::string& model_path, const std::string& out) {
    const Dataset ds = load_dataset(data);
    const ModelFile mf = load_model(model_path);
    if (mf.model.num_classes() != ds.num_classes)
        throw UsageError(detail::concat("model has ", mf.model.num_classes(), " classes but ", data, " declares ",
                                        ds.num_classes));
    if (mf.model.max_node_feature() >= static_cast<int>(ds.dims.node_dim))
        throw UsageError(detail::concat("model uses node feature ", mf.model.max_node_feature(), " but ", data,
                                        " has node_dim ", ds.dims.node_dim));
    if (mf.model.max_edge_feature() >= static_cast<int>(ds.dims.edge_dim))
        throw UsageError(detail::concat("model uses edge feature ", mf.model.max_edge_feature(), " but ", data,
                                        " has edge_dim ", ds.dims.edge_dim));
    std::vector<Labeling> preds;
    preds.reserve(ds.instances.size());
    for (const Instance& inst : ds.instances) preds.push_back(map_inference(inst, mf.model));
    save_predictions(preds, ds.num_classes, out);
    log(LogLevel::info, "wrote ", preds.size(), " labelings to ", out);
    return 0;
}

// ------------------------------------------------------------------- eval

const std::vector<std::string> kMetricNames = {"acc", "iou", "fscore"};

std::vector<std::string> parse_metrics(const std::string& spec) {
    std::vector<std::string> out;
    std::stringstream ss(spec);
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (name.empty()) continue;
        bool known = false;
        for (const auto& k : kMetricNames) known = known || k == name;
        if (!known) throw UsageError("unknown metric '" + name + "' (valid: acc, iou, fscore)");
        out.push_back(name);
    }
    if (out.empty()) throw UsageError("no metrics requested (valid: acc, iou, fscore)");
    return out;
}

int cmd_eval(const std::string& pred_path, const std::string& truth_path, const std::string& metric_spec) {
    const std::vector<std::string> metrics = parse_metrics(metric_spec);
    const Predictions preds = load_predictions(pred_path);
    const Dataset ds = load_dataset(truth_path);
    if (!ds.labeled()) throw UsageError(truth_path + ": every instance needs labels for evaluation");
    if (preds.labelings.size() != ds.instances.size())
        throw UsageError(detail::concat(pred_path, " has ", preds.labelings.size(), " labelings but ", truth_path,
                                        " has ", ds.instances.size(), " instances"));
    if (preds.num_classes != ds.num_classes)
        throw UsageError(detail::concat(pred_path, " declares ", preds.num_classes, " classes, ", truth_path,
                                        " declares ", ds.num_classes));
    ConfusionCounts counts(ds.num_classes);
    for (std::size_t i = 0; i < ds.instances.size(); ++i) {
        if (preds.labelings[i].size() != ds.instances[i].num_nodes())
            throw UsageError(detail::concat("instance ", i, ": ", preds.labelings[i].size(), " predicted labels for ",
                                            ds.instances[i].num_nodes(), " nodes"));
        counts.add(ds.instances[i].truth(), preds.labelings[i]);
    }

    std::cout << "metric\tclass\tvalue\n";
    for (const std::string& m : metrics) {
        if (m == "acc") {
            std::cout << "acc\tall\t" << fmt(counts.accuracy().value) << '\n';
            continue;
        }
        double sum = 0.0;
        int rows = 0;
        for (int c = 1; c <= ds.num_classes; ++c) {
            if (!counts.present(c)) continue;
            const MetricValue v = m == "iou" ? counts.iou(c) : counts.f_score(c);
            if (!v.defined) log(LogLevel::info, "warning: ", m, " undefined for class ", c, " (reported as 0)");
            std::cout << m << '\t' << c << '\t' << fmt(v.value) << '\n';
            sum += v.value;
            ++rows;
        }
        std::cout << m << "\tmean\t" << fmt(rows ? sum / rows : 0.0) << '\n';
    }
    return 0;
}

// ------------------------------------------------------------------ synth

struct SynthArgs {
    std::string task = "xor";
    int grid = 8;
    std::size_t n_train = 30;
    std::size_t n_test = 20;
    int classes = 2;
    double noise = 0.1;
    std::uint64_t seed = 0;
    std::string out_dir;
};

int cmd_synth(const SynthArgs& a) {
    SynthTask task;
    try {
        task = parse_synth_task(a.task);
        if (a.grid < 2) throw Error(detail::concat("--grid must be >= 2, got ", a.grid));
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    const Dataset train = synth_grid_task(a.seed, a.grid, a.classes, a.noise, task, a.n_train);
    const Dataset test = synth_grid_task(derived_seed(a.seed), a.grid, a.classes, a.noise, task, a.n_test);
    std::error_code ec;
    std::filesystem::create_directories(a.out_dir, ec);
    if (ec) throw FileError("cannot create directory '" + a.out_dir + "': " + ec.message());
    const std::string train_path = (std::filesystem::path(a.out_dir) / "train.json").string();
    const std::string test_path = (std::filesystem::path(a.out_dir) / "test.json").string();
    save_dataset(train, train_path);
    save_dataset(test, test_path);
    log(LogLevel::info, "wrote ", train_path, " (", train.instances.size(), ") and ", test_path, " (",
        test.instances.size(), ")");
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Decision-tree potentials for CRFs: train, predict, evaluate, generate data"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train = app.add_subcommand("train", "Learn a model from a labeled dataset");
    train->add_option("--data", ta.data, "Training dataset (JSON)")->required();
    train->add_option("--out-model", ta.out_model, "Output model path")->required();
    train->add_option("--C", ta.cfg.C, "Regularization constant")->capture_default_str();
    train->add_option("--cg-iters", ta.cfg.cg_iters, "Column-generation rounds")->capture_default_str();
    train->add_option("--tree-depth", ta.cfg.tree_depth, "Depth of every tree")->capture_default_str();
    train->add_option("--eps-cp", ta.cfg.eps_cp, "Cutting-plane tolerance")->capture_default_str();
    train->add_option("--max-cp-iters", ta.cfg.max_cp_iters, "Cutting-plane iteration cap")->capture_default_str();
    train->add_option("--seed", ta.cfg.seed, "Recorded in the model; training is deterministic")
        ->capture_default_str();
    train->add_option("--loss-weights", ta.loss_weights,
                      "uniform | inverse-frequency (default: dataset header, else inverse-frequency)");

    std::string p_data, p_model, p_out;
    auto* predict = app.add_subcommand("predict", "MAP labelings for every instance");
    predict->add_option("--data", p_data, "Dataset (JSON)")->required();
    predict->add_option("--model", p_model, "Model (JSON)")->required();
    predict->add_option("--out", p_out, "Output predictions path")->required();

    std::string e_pred, e_truth, e_metrics = "acc,iou,fscore";
    auto* eval = app.add_subcommand("eval", "Score predictions against labeled data");
    eval->add_option("--pred", e_pred, "Predictions (JSON)")->required();
    eval->add_option("--truth-data", e_truth, "Labeled dataset (JSON)")->required();
    eval->add_option("--metrics", e_metrics, "Comma-separated subset of acc,iou,fscore")->capture_default_str();

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Generate synthetic grid datasets");
    synth->add_option("--task", sa.task, "linear | xor")->capture_default_str();
    synth->add_option("--grid", sa.grid, "Grid side length")->capture_default_str();
    synth->add_option("--n-train", sa.n_train, "Training instances")->capture_default_str();
    synth->add_option("--n-test", sa.n_test, "Test instances")->capture_default_str();
    synth->add_option("--classes", sa.classes, "Number of classes")->capture_default_str();
    synth->add_option("--noise", sa.noise, "Feature flip probability")->capture_default_str();
    synth->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
    synth->add_option("--out-dir", sa.out_dir, "Directory for train.json and test.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (train->parsed()) return cmd_train(ta);
        if (predict->parsed()) return cmd_predict(p_data, p_model, p_out);
        if (eval->parsed()) return cmd_eval(e_pred, e_truth, e_metrics);
        if (synth->parsed()) return cmd_synth(sa);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const FileError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const FormatError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
