// conntra command-line front end.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "conntra/data_io.hpp"
#include "conntra/discrete.hpp"
#include "conntra/errors.hpp"
#include "conntra/experiment.hpp"
#include "conntra/losses.hpp"
#include "conntra/pretrain.hpp"
#include "conntra/qubo.hpp"
#include "conntra/report.hpp"

#ifndef CONNTRA_DATA_DIR_DEFAULT
#define CONNTRA_DATA_DIR_DEFAULT "data"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace conntra;

namespace {

enum ExitCode : int {
    exit_ok = 0,
    exit_internal = 1,
    exit_usage = 2,
    exit_invalid_argument = 3,
    exit_domain = 4,
    exit_format = 5,
    exit_io = 6,
    exit_diverged = 7,
    exit_not_pd = 8,
    exit_capacity = 9,
    exit_invalid_state = 10,
};

int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_argument: return exit_invalid_argument;
    case ErrorKind::domain: return exit_domain;
    case ErrorKind::format: return exit_format;
    case ErrorKind::io: return exit_io;
    case ErrorKind::training_diverged: return exit_diverged;
    case ErrorKind::not_positive_definite: return exit_not_pd;
    case ErrorKind::capacity: return exit_capacity;
    case ErrorKind::invalid_state: return exit_invalid_state;
    }
    return exit_internal;
}

std::string one_line(std::string s) {
    for (char& c : s)
        if (c == '\n' || c == '\r') c = ' ';
    return s;
}

void fail_line(std::string_view kind, const std::string& message) {
    std::cerr << "conntra: error[" << kind << "]: " << one_line(message) << '\n';
}

std::vector<double> parse_omega(const std::string& text) {
    std::vector<double> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        std::size_t used = 0;
        double v;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw InvalidArgument("bad omega entry '" + item + "'");
        }
        if (used != item.size()) {
            throw InvalidArgument("bad omega entry '" + item + "'");
        }
        out.push_back(v);
    }
    return out;
}

fs::path default_data_dir() {
    if (const char* env = std::getenv("CONNTRA_DATA_DIR"); env && *env) return env;
    return CONNTRA_DATA_DIR_DEFAULT;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create " + dir.string() + ": " + ec.message());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string curve_csv(const TrainReport& report) {
    std::ostringstream os;
    write_curve_csv(os, report);
    return os.str();
}

/// Flags shared by the commands that build an experiment.
struct ExperimentFlags {
    std::string model, dataset, omega, search_loss, eval_mode, config;
    std::uint64_t seed = 0, iterations_T = 1, epochs = 0, record_every = 0;
    double learning_rate = 0.0, rescale_target = 0.0;
    std::size_t batch_size = 0, train_subset = 0;
    CLI::Option *o_model{}, *o_dataset{}, *o_omega{}, *o_seed{}, *o_T{}, *o_loss{}, *o_mode{},
        *o_epochs{}, *o_lr{}, *o_batch{}, *o_rescale{}, *o_record{}, *o_subset{};

    void attach(CLI::App* app) {
        o_model = app->add_option("--model", model, "logreg | mlp | cnn");
        o_dataset = app->add_option("--dataset", dataset, "mnist | iris | synthetic");
        o_omega = app->add_option("--omega", omega, "comma-separated value set, e.g. -1,0,1");
        o_seed = app->add_option("--seed", seed, "run seed");
        o_T = app->add_option("--iterations-T", iterations_T, "passes of |W| epochs");
        o_loss = app->add_option("--search-loss", search_loss, "xent | euclid");
        o_mode = app->add_option("--eval-mode", eval_mode, "full | incremental");
        o_epochs = app->add_option("--epochs", epochs, "pretraining epochs");
        o_lr = app->add_option("--learning-rate", learning_rate, "pretraining learning rate");
        o_batch = app->add_option("--batch-size", batch_size, "pretraining batch size");
        o_rescale = app->add_option("--rescale-target", rescale_target,
                                    "mean |w| per layer after pretraining; 0 disables");
        o_record = app->add_option("--record-every", record_every, "epochs between curve points");
        o_subset = app->add_option("--train-subset", train_subset, "stratified training subset size");
        app->add_option("--config", config, "JSON file with config keys")->check(CLI::ExistingFile);
    }

    /// Preset for (model, dataset), then the config file, then explicit flags.
    ExperimentConfig build() const {
        json file = json::object();
        if (!config.empty()) file = read_json(config);
        if (!file.is_object()) {
            throw InvalidArgument("config file must hold a JSON object");
        }
        std::string m = model, d = dataset;
        if (!*o_model && file.contains("model") && file["model"].is_string()) m = file["model"];
        if (!*o_dataset && file.contains("dataset") && file["dataset"].is_string()) d = file["dataset"];
        if (m.empty() || d.empty()) {
            throw InvalidArgument("--model and --dataset are required (flag or config file)");
        }
        ExperimentConfig cfg = default_experiment(parse_model_kind(m), parse_dataset_kind(d));
        cfg.data_dir = default_data_dir();
        apply_json(cfg, file);
        if (*o_omega) cfg.omega = parse_omega(omega);
        if (*o_seed) cfg.seed = seed;
        if (*o_T) cfg.iterations_T = iterations_T;
        if (*o_loss) cfg.search_loss = parse_search_loss(search_loss);
        if (*o_mode) cfg.eval_mode = parse_eval_mode(eval_mode);
        if (*o_epochs) cfg.epochs = epochs;
        if (*o_lr) cfg.learning_rate = learning_rate;
        if (*o_batch) cfg.batch_size = batch_size;
        if (*o_rescale) cfg.rescale_target = rescale_target;
        if (*o_record) cfg.record_every = record_every;
        if (*o_subset) cfg.train_subset = train_subset;
        cfg.validate();
        return cfg;
    }
};

json dataset_json(const ExperimentData& data) {
    return {
        {"name", data.train.name()},
        {"source", data.source},
        {"train_size", data.train.size()},
        {"validation_size", data.validation.size()},
        {"feature_dim", data.train.feature_dim()},
        {"class_count", data.train.class_count()},
    };
}

json error_json(const Network& net, std::span<const double> params, const ExperimentData& data) {
    const Prediction tr = forward(net, params, data.train);
    const Prediction va = forward(net, params, data.validation);
    return {
        {"training_error_pct", classification_error(tr, data.train.labels())},
        {"validation_error_pct", classification_error(va, data.validation.labels())},
        {"training_loss", cross_entropy(tr, data.train.labels_onehot())},
    };
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Weight files are recognised by magic: packed codes or 64-bit floats.
std::vector<double> load_any_weights(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path.string());
    }
    char magic[8] = {};
    in.read(magic, 8);
    in.close();
    if (std::string(magic, 8) == "CNTRAPK1") return unpack(load_packed(path));
    return load_weights(path);
}

// ---- commands -------------------------------------------------------------

int cmd_pretrain(const ExperimentFlags& flags, const fs::path& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentConfig cfg = flags.build();
    const ExperimentData data = load_experiment_data(cfg);
    const ModelSpec spec = experiment_model(cfg, data.train);
    const PretrainResult res = pretrain(spec, data.train, cfg.pretrain_config(), &data.validation);
    const Network net(spec);

    ensure_dir(out_dir);
    save_weights(out_dir / "pretrained.wts", res.params.values());
    write_text(out_dir / "pretrain_curve.csv", curve_csv(res.report));
    json report = {
        {"command", "pretrain"},
        {"config", to_json(cfg)},
        {"seed", cfg.seed},
        {"dataset", dataset_json(data)},
        {"model", {{"kind", to_string(cfg.model)}, {"param_count", param_count(spec)}}},
        {"result", error_json(net, res.params.values(), data)},
        {"memory", memory_json(param_count(spec), DiscreteSet(cfg.omega).bits_per_code())},
        {"curve", curve_json(res.report.curve)},
        {"wall_seconds", seconds_since(t0)},
    };
    write_json(out_dir / "pretrain_report.json", report);
    std::cout << "pretrain: training error " << report["result"]["training_error_pct"]
              << "%, validation error " << report["result"]["validation_error_pct"] << "%\n";
    return exit_ok;
}

int cmd_train(const ExperimentFlags& flags, const std::string& weights, const fs::path& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentConfig cfg = flags.build();
    const ExperimentData data = load_experiment_data(cfg);
    std::vector<double> given;
    if (!weights.empty()) given = load_any_weights(weights);
    const ExperimentResult r = run_experiment(cfg, data, weights.empty() ? nullptr : &given);
    const DiscreteSet omega(cfg.omega);
    const Network net(r.spec);

    ensure_dir(out_dir);
    save_packed(out_dir / "weights.cpk", pack(r.conntra.params.values(), omega));
    write_text(out_dir / "curve.csv", curve_csv(r.conntra.report));
    if (weights.empty()) {
        save_weights(out_dir / "pretrained.wts", r.pretrain.params.values());
        write_text(out_dir / "pretrain_curve.csv", curve_csv(r.pretrain.report));
    }

    const auto& last = r.conntra.report.curve.back();
    const Prediction pre_pred = forward(net, r.pretrain.params.values(), data.train);
    json report = {
        {"command", "train"},
        {"config", to_json(cfg)},
        {"seed", cfg.seed},
        {"dataset", dataset_json(data)},
        {"model", {{"kind", to_string(cfg.model)}, {"param_count", param_count(r.spec)}}},
        {"pretrain",
         {{"source", weights.empty() ? "backprop" : "file"},
          {"training_error_pct", classification_error(pre_pred, data.train.labels())},
          {"validation_error_pct", r.pretrain_validation_error},
          {"training_loss", cross_entropy(pre_pred, data.train.labels_onehot())},
          {"wall_seconds", r.pretrain.report.wall_seconds}}},
        {"discretized",
         {{"training_error_pct", r.conntra.discretized_training_error},
          {"loss", r.conntra.discretized_loss}}},
        {"conntra",
         {{"training_error_pct", last.training_error_pct},
          {"validation_error_pct", last.validation_error_pct ? json(*last.validation_error_pct) : json()},
          {"optimal_loss", r.conntra.optimal_loss},
          {"total_epochs", r.conntra.report.total_epochs},
          {"loss_evaluations", r.conntra.report.loss_evaluations},
          {"wall_seconds", r.conntra.report.wall_seconds}}},
        {"memory", memory_json(param_count(r.spec), omega.bits_per_code())},
        {"curve", curve_json(r.conntra.report.curve)},
        {"wall_seconds", seconds_since(t0)},
    };
    write_json(out_dir / "report.json", report);
    std::cout << "train: conntra training error " << last.training_error_pct << "%, validation error "
              << report["conntra"]["validation_error_pct"] << "%, packed memory "
              << report["memory"]["packed"]["kilobytes_rounded"] << " KB\n";
    return exit_ok;
}

int cmd_evaluate(const ExperimentFlags& flags, const std::string& weights, bool zero,
                 const fs::path& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    if (weights.empty() == !zero) {
        throw InvalidArgument("pass exactly one of --weights or --zero-weights");
    }
    const ExperimentConfig cfg = flags.build();
    const ExperimentData data = load_experiment_data(cfg);
    const ModelSpec spec = experiment_model(cfg, data.train);
    std::vector<double> params = zero ? std::vector<double>(param_count(spec), 0.0) : load_any_weights(weights);
    if (params.size() != param_count(spec)) {
        throw InvalidArgument("weights have " + std::to_string(params.size()) + " entries, model needs " +
                              std::to_string(param_count(spec)));
    }
    const Network net(spec);
    json report = {
        {"command", "evaluate"},
        {"config", to_json(cfg)},
        {"seed", cfg.seed},
        {"weights", zero ? std::string("zero") : weights},
        {"dataset", dataset_json(data)},
        {"model", {{"kind", to_string(cfg.model)}, {"param_count", param_count(spec)}}},
        {"result", error_json(net, params, data)},
        {"memory", memory_json(param_count(spec), DiscreteSet(cfg.omega).bits_per_code())},
        {"wall_seconds", seconds_since(t0)},
    };
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        write_json(out_dir / "evaluate_report.json", report);
    }
    std::cout << report.dump(2) << '\n';
    return exit_ok;
}

int cmd_reduce_qubo(const fs::path& input, const fs::path& out_dir, bool symmetrize_first) {
    const auto t0 = std::chrono::steady_clock::now();
    std::ifstream in(input);
    if (!in) {
        throw IoError("cannot open " + input.string());
    }
    const qubo::QuboInstance q = qubo::read_qubo(in, symmetrize_first);
    const auto t = qubo::reduce_qubo(q);
    const std::size_t d = q.b.size();

    json report = {
        {"command", "reduce-qubo"},
        {"config", {{"input", input.string()}, {"symmetrize", symmetrize_first}}},
        {"seed", 0},
        {"dimension", d},
        {"offset", t.offset},
    };
    bool match = false;
    if (d <= qubo::kMaxEnumerationDim) {
        const auto qv = qubo::enumerate_qubo(q);
        const auto tv = qubo::enumerate_training(t);
        const double scale = std::max(1.0, std::abs(*std::min_element(qv.begin(), qv.end())));
        const auto qa = qubo::argmin_set(qv, 1e-9 * scale);
        const auto ta = qubo::argmin_set(tv, 1e-9 * scale);
        match = qa == ta;
        const auto best = qubo::brute_force_qubo(q);
        report["argmin"] = best.z;
        report["qubo_value"] = best.value;
        report["training_value"] = qubo::brute_force_training(t).value;
        report["argmin_match"] = match;
    } else {
        report["argmin_match"] = nullptr;
    }
    report["wall_seconds"] = seconds_since(t0);

    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        std::ofstream os(out_dir / "training_instance.txt");
        qubo::write_training_instance(os, t);
        if (!os) throw IoError("cannot write training instance");
        write_json(out_dir / "reduce_report.json", report);
    }
    if (d <= qubo::kMaxEnumerationDim) {
        std::cout << "argmin match: " << (match ? "true" : "false") << '\n';
    } else {
        std::cout << "argmin match: skipped (d > " << qubo::kMaxEnumerationDim << ")\n";
    }
    return match || d > qubo::kMaxEnumerationDim ? exit_ok : exit_invalid_state;
}

std::string fmt(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

int cmd_report(const std::vector<std::string>& inputs, std::int64_t params, unsigned bits,
               const fs::path& out_dir) {
    const auto t0 = std::chrono::steady_clock::now();
    if (inputs.empty() && params <= 0) {
        throw InvalidArgument("pass --from <report.json> or --params <count>");
    }
    json rows = json::array();
    std::ostringstream table;
    table << "run,method,training_error_pct,validation_error_pct,memory_kb,time_s\n";
    for (const auto& path : inputs) {
        const json r = read_json(path);
        if (r.value("command", "") != "train") {
            throw FormatError(path + ": not a train report");
        }
        const std::string run = r["config"]["model"].get<std::string>() + "/" +
                                r["config"]["dataset"].get<std::string>();
        const auto& mem = r["memory"];
        auto cell = [](const json& v) { return v.is_null() ? std::string() : fmt(v.get<double>(), 2); };
        table << run << ",backprop," << cell(r["pretrain"]["training_error_pct"]) << ','
              << cell(r["pretrain"]["validation_error_pct"]) << ','
              << fmt(mem["float64"]["kilobytes_rounded"].get<double>(), 2) << ','
              << cell(r["pretrain"]["wall_seconds"]) << '\n';
        table << run << ",conntra," << cell(r["conntra"]["training_error_pct"]) << ','
              << cell(r["conntra"]["validation_error_pct"]) << ','
              << fmt(mem["packed"]["kilobytes_rounded"].get<double>(), 2) << ','
              << cell(r["conntra"]["wall_seconds"]) << '\n';
        rows.push_back({{"run", run},
                        {"backprop", r["pretrain"]},
                        {"conntra", r["conntra"]},
                        {"memory", mem}});
    }
    json report = {
        {"command", "report"},
        {"config", {{"from", inputs}, {"params", params}, {"bits", bits}}},
        {"seed", 0},
        {"runs", rows},
    };
    if (params > 0) {
        report["memory"] = memory_json(static_cast<std::uint64_t>(params), bits);
        table << "params=" << params << ",float64,,," << fmt(report["memory"]["float64"]["kilobytes_rounded"].get<double>(), 2)
              << ",\n";
        table << "params=" << params << ",packed,,," << fmt(report["memory"]["packed"]["kilobytes_rounded"].get<double>(), 2)
              << ",\n";
    }
    report["wall_seconds"] = seconds_since(t0);
    if (!out_dir.empty()) {
        ensure_dir(out_dir);
        write_text(out_dir / "comparison.csv", table.str());
        write_json(out_dir / "summary.json", report);
    }
    std::cout << table.str();
    return exit_ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Discrete-weight neural network training by coordinate global search"};
    app.require_subcommand(1);
    std::string out_dir;

    auto* pre = app.add_subcommand("pretrain", "backprop pretraining; writes pretrained.wts and a report");
    ExperimentFlags pre_flags;
    pre_flags.attach(pre);
    pre->add_option("--out", out_dir, "output directory")->required();

    auto* train = app.add_subcommand("train", "discretize and run the coordinate search; writes weights.cpk and a report");
    ExperimentFlags train_flags;
    std::string train_weights;
    train_flags.attach(train);
    train->add_option("--weights", train_weights, "start from these pretrained weights instead of pretraining")
        ->check(CLI::ExistingFile);
    train->add_option("--out", out_dir, "output directory")->required();

    auto* eval = app.add_subcommand("evaluate", "error and memory of a weight file");
    ExperimentFlags eval_flags;
    std::string eval_weights;
    bool zero = false;
    eval_flags.attach(eval);
    eval->add_option("--weights", eval_weights, "weights file (.cpk or .wts)")->check(CLI::ExistingFile);
    eval->add_flag("--zero-weights", zero, "evaluate the all-zero parameter vector");
    eval->add_option("--out", out_dir, "output directory for evaluate_report.json");

    auto* red = app.add_subcommand("reduce-qubo", "map a QUBO instance to a binary training instance and check argmin equality");
    std::string qubo_input;
    bool symmetrize_first = false;
    red->add_option("--input", qubo_input, "QUBO text file")->required()->check(CLI::ExistingFile);
    red->add_flag("--symmetrize", symmetrize_first, "symmetrize A before reducing");
    red->add_option("--out", out_dir, "output directory");

    auto* rep = app.add_subcommand("report", "backprop vs coordinate-search comparison table");
    std::vector<std::string> from;
    std::int64_t params = 0;
    unsigned bits = 2;
    rep->add_option("--from", from, "train report.json files")->check(CLI::ExistingFile);
    rep->add_option("--params", params, "memory arithmetic for this parameter count");
    rep->add_option("--bits", bits, "bits per packed parameter")->check(CLI::Range(1u, 64u));
    rep->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        fail_line("usage", e.what());
        return exit_usage;
    }

    try {
        if (*pre) return cmd_pretrain(pre_flags, out_dir);
        if (*train) return cmd_train(train_flags, train_weights, out_dir);
        if (*eval) return cmd_evaluate(eval_flags, eval_weights, zero, out_dir);
        if (*red) return cmd_reduce_qubo(qubo_input, out_dir, symmetrize_first);
        if (*rep) return cmd_report(from, params, bits, out_dir);
    } catch (const Error& e) {
        fail_line(to_string(e.kind()), e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        fail_line("internal", e.what());
        return exit_internal;
    }
    return exit_internal;
}
