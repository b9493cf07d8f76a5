#include "conntra/experiment.hpp"

#include <chrono>
#include <cmath>
#include <set>

#include "conntra/data_io.hpp"
#include "conntra/errors.hpp"
#include "conntra/losses.hpp"

namespace conntra {

using nlohmann::json;

std::string_view to_string(DatasetKind kind) noexcept {
    switch (kind) {
    case DatasetKind::mnist: return "mnist";
    case DatasetKind::iris: return "iris";
    case DatasetKind::synthetic: return "synthetic";
    }
    return "?";
}

DatasetKind parse_dataset_kind(std::string_view text) {
    if (text == "mnist") return DatasetKind::mnist;
    if (text == "iris") return DatasetKind::iris;
    if (text == "synthetic") return DatasetKind::synthetic;
    throw InvalidArgument("unknown dataset '" + std::string(text) + "' (expected mnist, iris or synthetic)");
}

std::uint64_t conntra_seed(std::uint64_t seed) noexcept {
    std::uint64_t z = seed + 0x632be59bd9b4e019ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

PretrainConfig ExperimentConfig::pretrain_config() const {
    PretrainConfig p;
    p.learning_rate = learning_rate;
    p.epochs = epochs;
    p.batch_size = batch_size;
    p.seed = seed;
    p.init_scale = init_scale;
    p.rescale_target = rescale_target;
    return p;
}

ConntraConfig ExperimentConfig::conntra_config() const {
    ConntraConfig c;
    c.iterations_T = iterations_T;
    c.seed = conntra_seed(seed);
    c.search_loss = search_loss;
    c.eval_mode = eval_mode;
    c.record_every = record_every;
    return c;
}

void ExperimentConfig::validate() const {
    DiscreteSet{omega};
    pretrain_config().validate();
    conntra_config().validate();
    if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
        throw InvalidArgument("split_fraction must lie in (0, 1)");
    }
    if (model == ModelKind::cnn_lenet && dataset != DatasetKind::mnist) {
        throw InvalidArgument("the cnn model needs image data (dataset mnist)");
    }
}

ExperimentConfig default_experiment(ModelKind model, DatasetKind dataset) {
    ExperimentConfig cfg;
    cfg.model = model;
    cfg.dataset = dataset;
    cfg.rescale_target = 0.7;
    switch (dataset) {
    case DatasetKind::mnist:
        if (model == ModelKind::cnn_lenet) {
            cfg.learning_rate = 0.05;
            cfg.epochs = 10;
            cfg.batch_size = 20;
            cfg.record_every = 1000;
            cfg.train_subset = 2000;
            cfg.validation_subset = 2000;
        } else {
            cfg.learning_rate = 0.5;
            cfg.epochs = 30;
            cfg.batch_size = 100;
            cfg.record_every = 100;
        }
        break;
    case DatasetKind::iris:
        cfg.learning_rate = 0.1;
        cfg.epochs = 200;
        cfg.batch_size = 10;
        cfg.record_every = 5;
        break;
    case DatasetKind::synthetic:
        cfg.learning_rate = 0.1;
        cfg.epochs = 20;
        cfg.batch_size = 20;
        cfg.record_every = 10;
        break;
    }
    cfg.validate();
    return cfg;
}

json to_json(const ExperimentConfig& cfg) {
    return json{
        {"model", to_string(cfg.model)},
        {"dataset", to_string(cfg.dataset)},
        {"omega", cfg.omega},
        {"seed", cfg.seed},
        {"learning_rate", cfg.learning_rate},
        {"epochs", cfg.epochs},
        {"batch_size", cfg.batch_size},
        {"init_scale", cfg.init_scale},
        {"rescale_target", cfg.rescale_target},
        {"iterations_T", cfg.iterations_T},
        {"search_loss", to_string(cfg.search_loss)},
        {"eval_mode", to_string(cfg.eval_mode)},
        {"record_every", cfg.record_every},
        {"train_subset", cfg.train_subset},
        {"validation_subset", cfg.validation_subset},
        {"subset_seed", cfg.subset_seed},
        {"split_fraction", cfg.split_fraction},
        {"split_seed", cfg.split_seed},
        {"synthetic_n", cfg.synthetic_n},
        {"synthetic_d", cfg.synthetic_d},
        {"synthetic_k", cfg.synthetic_k},
        {"data_dir", cfg.data_dir.string()},
    };
}

namespace {

template <class T>
T get_as(const json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        throw InvalidArgument("config key '" + key + "' has the wrong type");
    }
}

} // namespace

void apply_json(ExperimentConfig& cfg, const json& j) {
    if (!j.is_object()) {
        throw InvalidArgument("config must be a JSON object");
    }
    for (const auto& [key, v] : j.items()) {
        if (key == "model") cfg.model = parse_model_kind(get_as<std::string>(v, key));
        else if (key == "dataset") cfg.dataset = parse_dataset_kind(get_as<std::string>(v, key));
        else if (key == "omega") cfg.omega = get_as<std::vector<double>>(v, key);
        else if (key == "seed") cfg.seed = get_as<std::uint64_t>(v, key);
        else if (key == "learning_rate") cfg.learning_rate = get_as<double>(v, key);
        else if (key == "epochs") cfg.epochs = get_as<std::uint64_t>(v, key);
        else if (key == "batch_size") cfg.batch_size = get_as<std::size_t>(v, key);
        else if (key == "init_scale") cfg.init_scale = get_as<double>(v, key);
        else if (key == "rescale_target") cfg.rescale_target = get_as<double>(v, key);
        else if (key == "iterations_T") cfg.iterations_T = get_as<std::uint64_t>(v, key);
        else if (key == "search_loss") cfg.search_loss = parse_search_loss(get_as<std::string>(v, key));
        else if (key == "eval_mode") cfg.eval_mode = parse_eval_mode(get_as<std::string>(v, key));
        else if (key == "record_every") cfg.record_every = get_as<std::uint64_t>(v, key);
        else if (key == "train_subset") cfg.train_subset = get_as<std::size_t>(v, key);
        else if (key == "validation_subset") cfg.validation_subset = get_as<std::size_t>(v, key);
        else if (key == "subset_seed") cfg.subset_seed = get_as<std::uint64_t>(v, key);
        else if (key == "split_fraction") cfg.split_fraction = get_as<double>(v, key);
        else if (key == "split_seed") cfg.split_seed = get_as<std::uint64_t>(v, key);
        else if (key == "synthetic_n") cfg.synthetic_n = get_as<std::size_t>(v, key);
        else if (key == "synthetic_d") cfg.synthetic_d = get_as<std::size_t>(v, key);
        else if (key == "synthetic_k") cfg.synthetic_k = get_as<std::size_t>(v, key);
        else if (key == "data_dir") cfg.data_dir = get_as<std::string>(v, key);
        else throw InvalidArgument("unknown config key '" + key + "'");
    }
}

namespace {

std::filesystem::path find_idx(const std::filesystem::path& dir, const std::string& stem) {
    for (const char* suffix : {"", ".gz"}) {
        auto p = dir / (stem + suffix);
        if (std::filesystem::exists(p)) return p;
    }
    throw IoError("missing " + (dir / stem).string() + "[.gz]; run scripts/fetch_mnist.sh");
}

LabeledDataset maybe_subset(LabeledDataset data, std::size_t count, std::uint64_t seed) {
    if (count == 0 || count >= data.size()) return data;
    return stratified_subset(data, count, seed);
}

} // namespace

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
    cfg.validate();
    ExperimentData out;
    switch (cfg.dataset) {
    case DatasetKind::mnist: {
        const auto dir = cfg.data_dir / "mnist";
        const auto layout = cfg.model == ModelKind::cnn_lenet ? ImageLayout::image : ImageLayout::flat;
        out.train = load_mnist_idx(find_idx(dir, "train-images-idx3-ubyte"),
                                   find_idx(dir, "train-labels-idx1-ubyte"), layout);
        out.validation = load_mnist_idx(find_idx(dir, "t10k-images-idx3-ubyte"),
                                        find_idx(dir, "t10k-labels-idx1-ubyte"), layout);
        out.source = "mnist train 60000 / t10k 10000";
        break;
    }
    case DatasetKind::iris: {
        auto all = load_iris_csv(cfg.data_dir / "iris.csv");
        std::tie(out.train, out.validation) = split(all, SplitSpec{cfg.split_fraction, cfg.split_seed, true});
        out.source = "iris.csv stratified split";
        break;
    }
    case DatasetKind::synthetic: {
        auto all = synthetic_blobs(cfg.synthetic_n, cfg.synthetic_d, cfg.synthetic_k, cfg.split_seed);
        std::tie(out.train, out.validation) = split(all, SplitSpec{cfg.split_fraction, cfg.split_seed, true});
        out.source = "synthetic blobs";
        break;
    }
    }
    out.train = maybe_subset(std::move(out.train), cfg.train_subset, cfg.subset_seed);
    out.validation = maybe_subset(std::move(out.validation), cfg.validation_subset, cfg.subset_seed ^ 1);
    return out;
}

ModelSpec experiment_model(const ExperimentConfig& cfg, const LabeledDataset& train) {
    switch (cfg.model) {
    case ModelKind::logistic_regression:
        return ModelSpec::logistic(train.feature_dim(), train.class_count());
    case ModelKind::mlp:
        return ModelSpec::mlp({train.feature_dim(), 10, 13, train.class_count()});
    case ModelKind::cnn_lenet: {
        const auto& s = train.sample_shape();
        if (s.size() != 3) {
            throw InvalidArgument("the cnn model needs image-shaped samples");
        }
        return ModelSpec::lenet(s[0], s[1], s[2], train.class_count());
    }
    }
    throw InvalidArgument("unknown model kind");
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const ExperimentData& data,
                                const std::vector<double>* w_pre, const RecordCallback& on_record) {
    cfg.validate();
    const DiscreteSet omega(cfg.omega);
    ModelSpec spec = experiment_model(cfg, data.train);

    PretrainResult pre = [&] {
        if (!w_pre) {
            return pretrain(spec, data.train, cfg.pretrain_config(), &data.validation);
        }
        if (w_pre->size() != param_count(spec)) {
            throw InvalidArgument("pretrained weights have " + std::to_string(w_pre->size()) +
                                  " entries, model needs " + std::to_string(param_count(spec)));
        }
        PretrainResult given{ParamVector(spec, *w_pre), {}};
        given.report.final_params = *w_pre;
        given.report.seed = cfg.seed;
        given.report.memory = memory_account(static_cast<std::int64_t>(w_pre->size()), 64);
        return given;
    }();

    const Network net(spec);
    const double pre_val =
        classification_error(forward(net, pre.params.values(), data.validation), data.validation.labels());

    ConntraResult res =
        conntra_train(spec, data.train, pre.params, omega, cfg.conntra_config(), &data.validation, on_record);
    return {std::move(spec), std::move(pre), std::move(res), pre_val};
}

} // namespace conntra
