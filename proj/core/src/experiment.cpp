#include "tbe/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "tbe/checkpoint.hpp"
#include "tbe/lrp.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace tbe {

std::string fnv1a_hex(const std::string& text) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

std::string default_data_root() {
    const char* env = std::getenv("TBE_DATA_ROOT");
    return env ? env : "data";
}

namespace {

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected an object");
    for (const auto& [key, value] : j.items())
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
            throw ConfigError(context + ": unknown key '" + key + "'");
}

void apply_override(json& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must be key.path=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;  // bare strings allowed
    }
    json* cur = &root;
    std::istringstream ps(path);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ps, part, '.')) parts.push_back(part);
    if (parts.empty()) throw ConfigError("empty override path");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) cur = &(*cur)[parts[i]];
    (*cur)[parts.back()] = value;
}

const std::vector<std::pair<std::string, std::uint32_t>> kMnistFiles = {
    {"train-images-idx3-ubyte", 0xe9f4d8b3u},
    {"train-labels-idx1-ubyte", 0xe0cb4ad2u},
    {"t10k-images-idx3-ubyte", 0x91373bdfu},
    {"t10k-labels-idx1-ubyte", 0x4ab9eff9u},
};

void require_mnist_files(const std::string& dir) {
    for (const auto& [name, crc] : kMnistFiles)
        if (!fs::exists(dir + "/" + name))
            throw ConfigError("dataset file missing: " + dir + "/" + name +
                              " (run `tbe fetch-data` to obtain/verify MNIST)");
}

double parse_positive(const json& j, const std::string& key, double fallback) {
    if (!j.contains(key)) return fallback;
    const double v = j.at(key).get<double>();
    if (v <= 0.0) throw ConfigError("hyper." + key + " must be positive");
    return v;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text,
                                                  const std::vector<std::string>& overrides) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    for (const auto& o : overrides) apply_override(j, o);

    check_keys(j, {"protocol", "model", "methods", "seeds", "hyper", "output_dir"}, "config");

    ExperimentConfig cfg;
    {
        // Where results are written is not part of the experiment's identity.
        json canonical = j;
        canonical.erase("output_dir");
        cfg.config_hash = fnv1a_hex(canonical.dump());
    }

    if (!j.contains("protocol")) throw ConfigError("config: missing 'protocol'");
    const json& p = j.at("protocol");
    check_keys(p,
               {"name", "data_dir", "n_tasks", "groups", "dataset", "classes", "per_class",
                "test_per_class", "dim", "separation"},
               "protocol");
    cfg.protocol = p.value("name", "");
    if (cfg.protocol != "mnist-split" && cfg.protocol != "mnist-permuted" &&
        cfg.protocol != "class-split" && cfg.protocol != "synthetic")
        throw ConfigError("protocol.name must be one of mnist-split, mnist-permuted, "
                          "class-split, synthetic");
    cfg.data_dir = p.value("data_dir", default_data_root() + "/mnist");
    cfg.n_tasks = p.value("n_tasks", cfg.protocol == "mnist-permuted" ? 10 : 0);
    if (p.contains("groups")) cfg.groups = p.at("groups").get<std::vector<std::vector<int>>>();
    cfg.dataset = p.value("dataset", "");
    cfg.syn_classes = p.value("classes", 4);
    cfg.syn_per_class = p.value("per_class", 200);
    cfg.syn_test_per_class = p.value("test_per_class", 100);
    cfg.syn_dim = p.value("dim", 16);
    cfg.syn_separation = p.value("separation", 6.0);

    if (j.contains("model")) {
        const json& m = j.at("model");
        check_keys(m, {"type", "hidden"}, "model");
        cfg.model_type = m.value("type", "mlp");
        if (cfg.model_type != "mlp" && cfg.model_type != "cnn")
            throw ConfigError("model.type must be mlp or cnn");
        if (m.contains("hidden")) cfg.hidden = m.at("hidden").get<std::vector<std::size_t>>();
        if (cfg.hidden.empty()) throw ConfigError("model.hidden must be non-empty");
    }

    if (!j.contains("methods")) throw ConfigError("config: missing 'methods'");
    cfg.methods = j.at("methods").get<std::vector<std::string>>();
    if (cfg.methods.empty()) throw ConfigError("methods must be non-empty");
    for (const auto& m : cfg.methods)
        if (m != "baseline" && m != "tbe" && m != "joint")
            throw ConfigError("unknown method '" + m + "'");

    if (!j.contains("seeds")) throw ConfigError("config: missing 'seeds'");
    cfg.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (cfg.seeds.empty()) throw ConfigError("seeds must be non-empty");

    if (j.contains("hyper")) {
        const json& h = j.at("hyper");
        check_keys(h,
                   {"lr", "beta1", "beta2", "adam_epsilon", "l2", "batch", "epochs",
                    "lrp_epsilon", "ref_per_class", "threshold", "ratio", "lr_frozen",
                    "lr_irrelevant", "train_subset", "plan_eval_max", "plan_on_validation",
                    "positive_only", "seed_true_class"},
                   "hyper");
        TrainHyper& hy = cfg.hyper;
        hy.adam.lr = parse_positive(h, "lr", hy.adam.lr);
        hy.adam.beta1 = h.value("beta1", hy.adam.beta1);
        hy.adam.beta2 = h.value("beta2", hy.adam.beta2);
        hy.adam.epsilon = parse_positive(h, "adam_epsilon", hy.adam.epsilon);
        hy.adam.l2 = h.value("l2", 0.0);
        if (hy.adam.beta1 < 0.0 || hy.adam.beta1 >= 1.0 || hy.adam.beta2 < 0.0 ||
            hy.adam.beta2 >= 1.0)
            throw ConfigError("hyper.beta1/beta2 must lie in [0, 1)");
        hy.batch = h.value("batch", hy.batch);
        if (hy.batch == 0) throw ConfigError("hyper.batch must be >= 1");
        hy.epochs = h.value("epochs", hy.epochs);
        hy.lrp_epsilon = h.value("lrp_epsilon", hy.lrp_epsilon);
        if (hy.lrp_epsilon < 0.0) throw ConfigError("hyper.lrp_epsilon must be >= 0");
        hy.ref_per_class = h.value("ref_per_class", hy.ref_per_class);
        if (hy.ref_per_class < 1) throw ConfigError("hyper.ref_per_class must be >= 1");
        hy.threshold = h.value("threshold", hy.threshold);
        if (hy.threshold < 0.0 || hy.threshold >= 1.0)
            throw ConfigError("hyper.threshold must lie in [0, 1)");
        hy.ratio = h.value("ratio", hy.ratio);
        hy.lr_frozen = h.value("lr_frozen", hy.lr_frozen);
        hy.lr_irrelevant = h.value("lr_irrelevant", hy.lr_irrelevant);
        if (hy.lr_frozen < 0.0 || hy.lr_frozen > 1.0 || hy.lr_irrelevant < 0.0 ||
            hy.lr_irrelevant > 1.0)
            throw ConfigError("hyper.lr_frozen/lr_irrelevant must lie in [0, 1]");
        hy.train_subset = h.value("train_subset", hy.train_subset);
        hy.plan_eval_max = h.value("plan_eval_max", hy.plan_eval_max);
        hy.plan_on_validation = h.value("plan_on_validation", hy.plan_on_validation);
        hy.positive_only = h.value("positive_only", hy.positive_only);
        hy.seed_true_class = h.value("seed_true_class", hy.seed_true_class);
    }

    cfg.output_dir = j.value("output_dir", "");

    // Validation-first: fail before any compute if data is unreachable.
    if (cfg.protocol == "mnist-split" || cfg.protocol == "mnist-permuted") {
        require_mnist_files(cfg.data_dir);
    } else if (cfg.protocol == "class-split") {
        if (cfg.dataset != "cifar10" && cfg.dataset != "cifar100")
            throw ConfigError("class-split needs protocol.dataset = cifar10 or cifar100");
        if (cfg.groups.empty() && cfg.n_tasks < 1)
            throw ConfigError("class-split needs protocol.groups or protocol.n_tasks");
        const std::vector<std::string> needed =
            cfg.dataset == "cifar10"
                ? std::vector<std::string>{"data_batch_1.bin", "data_batch_2.bin",
                                           "data_batch_3.bin", "data_batch_4.bin",
                                           "data_batch_5.bin", "test_batch.bin"}
                : std::vector<std::string>{"train.bin", "test.bin"};
        for (const auto& f : needed)
            if (!fs::exists(cfg.data_dir + "/" + f))
                throw ConfigError("dataset file missing: " + cfg.data_dir + "/" + f);
    } else {  // synthetic
        if (cfg.syn_classes < 2 || cfg.syn_per_class < 1 || cfg.syn_dim < 1)
            throw ConfigError("synthetic protocol needs classes >= 2, per_class >= 1, dim >= 1");
        if (cfg.n_tasks < 1) cfg.n_tasks = 2;
        if (cfg.syn_classes % cfg.n_tasks != 0)
            throw ConfigError("synthetic: n_tasks must divide classes");
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path,
                                        const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return from_json_text(buf.str(), overrides);
}

void write_run_csv(const RunMetrics& m, const std::string& config_hash, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    out << "# config_hash=" << config_hash << "\n";
    out << "seed,stage,task,accuracy,free_capacity,method,protocol\n";
    for (std::size_t stage = 0; stage < m.accuracy.size(); ++stage)
        for (std::size_t task = 0; task < m.accuracy[stage].size(); ++task)
            out << m.seed << "," << stage << "," << task << "," << m.accuracy[stage][task] << ","
                << m.free_capacity[stage] << "," << m.method << "," << m.protocol << "\n";
}

RunFile read_run_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    RunFile rf;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("config_hash=");
            if (pos != std::string::npos) rf.config_hash = line.substr(pos + 12);
            continue;
        }
        if (line.rfind("seed,", 0) == 0) continue;
        std::istringstream ls(line);
        std::string cell;
        MetricRow row;
        std::getline(ls, cell, ',');
        row.seed = std::stoull(cell);
        std::getline(ls, cell, ',');
        row.stage = std::stoi(cell);
        std::getline(ls, cell, ',');
        row.task = std::stoi(cell);
        std::getline(ls, cell, ',');
        row.accuracy = std::stod(cell);
        std::getline(ls, cell, ',');
        row.free_capacity = std::stod(cell);
        std::getline(ls, row.method, ',');
        std::getline(ls, row.protocol, ',');
        rf.rows.push_back(std::move(row));
    }
    return rf;
}

namespace {

struct LoadedData {
    Dataset train;
    Dataset test;
};

LoadedData load_protocol_data(const ExperimentConfig& cfg, std::uint64_t seed) {
    if (cfg.protocol == "mnist-split" || cfg.protocol == "mnist-permuted") {
        auto [train, test] = load_mnist(cfg.data_dir);
        return {std::move(train), std::move(test)};
    }
    if (cfg.protocol == "class-split") {
        if (cfg.dataset == "cifar10") {
            std::vector<std::string> batches;
            for (int i = 1; i <= 5; ++i)
                batches.push_back(cfg.data_dir + "/data_batch_" + std::to_string(i) + ".bin");
            return {load_cifar10(batches, "train"),
                    load_cifar10({cfg.data_dir + "/test_batch.bin"}, "test")};
        }
        return {load_cifar100(cfg.data_dir + "/train.bin", "train"),
                load_cifar100(cfg.data_dir + "/test.bin", "test")};
    }
    // synthetic: per-seed draw, train and test from disjoint streams
    Dataset train = make_synthetic(cfg.syn_classes, cfg.syn_per_class, cfg.syn_dim,
                                   cfg.syn_separation, Rng::derive(seed, 0x747261696e).next_u64());
    train.split = "train";
    Dataset test = make_synthetic(cfg.syn_classes, cfg.syn_test_per_class, cfg.syn_dim,
                                  cfg.syn_separation, Rng::derive(seed, 0x74657374).next_u64());
    test.split = "test";
    return {std::move(train), std::move(test)};
}

TaskStream build_stream(const ExperimentConfig& cfg, const LoadedData& data,
                        std::uint64_t seed) {
    if (cfg.protocol == "mnist-split") return make_mnist_split(data.train, data.test, seed);
    if (cfg.protocol == "mnist-permuted")
        return make_mnist_permuted(data.train, data.test, cfg.n_tasks, seed);
    if (cfg.protocol == "class-split")
        return make_class_split(data.train, data.test, cfg.groups, cfg.n_tasks, seed,
                                "class-split-" + cfg.dataset);
    return make_class_split(data.train, data.test, {}, cfg.n_tasks, seed, "synthetic");
}

Network build_model(const ExperimentConfig& cfg, const LoadedData& data,
                    const TaskStream& stream, std::uint64_t seed) {
    if (cfg.model_type == "cnn") return make_cnn(data.train, stream, seed);
    return make_mlp(data.train, stream, cfg.hidden, seed);
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

int cmd_run(const ExperimentConfig& cfg) {
    if (cfg.output_dir.empty()) throw ConfigError("config: missing 'output_dir'");
    fs::create_directories(cfg.output_dir);

    // MNIST/CIFAR data is seed-independent; load it once.
    const bool shared_data = cfg.protocol != "synthetic";
    LoadedData shared;
    if (shared_data) shared = load_protocol_data(cfg, cfg.seeds.front());

    std::vector<RunMetrics> all_runs;
    for (std::uint64_t seed : cfg.seeds) {
        const LoadedData& data = shared_data
                                     ? shared
                                     : (shared = load_protocol_data(cfg, seed), shared);
        const TaskStream stream = build_stream(cfg, data, seed);
        for (const std::string& method : cfg.methods) {
            Network net = build_model(cfg, data, stream, seed);
            FreezeState freeze = FreezeState::fresh(net);
            RunMetrics m;
            if (method == "joint") {
                m = run_joint_upper_bound(net, stream, cfg.hyper, data.train, data.test, seed);
            } else {
                const Method mm =
                    method == "tbe" ? Method::TrainByExplaining : Method::BaselineFinetune;
                const std::string audit_prefix =
                    method == "tbe"
                        ? cfg.output_dir + "/plan_" + method + "_seed" + std::to_string(seed) + "_"
                        : "";
                m = run_sequential(net, stream, mm, cfg.hyper, data.train, data.test, seed,
                                   audit_prefix, &freeze);
            }
            const std::string tag = method + "_seed" + std::to_string(seed);
            write_run_csv(m, cfg.config_hash, cfg.output_dir + "/run_" + tag + ".csv");
            save_checkpoint(net, freeze, cfg.output_dir + "/ckpt_" + tag + ".tbeckpt");
            double total_s = 0.0;
            for (double s : m.stage_seconds) total_s += s;
            std::cout << "[run] " << cfg.protocol << " " << tag << " final_mean=" << m.final_mean()
                      << " (" << total_s << " s)\n";
            all_runs.push_back(std::move(m));
        }
    }

    // Aggregate mean/std per (method, stage, task) across seeds.
    std::ofstream agg(cfg.output_dir + "/aggregate.csv");
    agg.precision(17);
    agg << "# config_hash=" << cfg.config_hash << "\n";
    agg << "method,stage,task,mean_accuracy,std_accuracy,mean_free_capacity,n_seeds\n";
    for (const std::string& method : cfg.methods) {
        std::map<std::pair<int, int>, std::vector<double>> acc;
        std::map<int, std::vector<double>> capacity;
        for (const RunMetrics& m : all_runs) {
            if (m.method != method) continue;
            for (std::size_t s = 0; s < m.accuracy.size(); ++s) {
                for (std::size_t t = 0; t < m.accuracy[s].size(); ++t)
                    acc[{static_cast<int>(s), static_cast<int>(t)}].push_back(m.accuracy[s][t]);
                capacity[static_cast<int>(s)].push_back(m.free_capacity[s]);
            }
        }
        for (const auto& [key, vals] : acc)
            agg << method << "," << key.first << "," << key.second << "," << mean_of(vals) << ","
                << sample_std(vals) << "," << mean_of(capacity[key.first]) << "," << vals.size()
                << "\n";
    }
    agg.close();

    std::ofstream summary(cfg.output_dir + "/summary.txt");
    summary.precision(6);
    summary << "protocol: " << cfg.protocol << "\nconfig_hash: " << cfg.config_hash << "\n";
    for (const std::string& method : cfg.methods) {
        std::vector<double> finals;
        for (const RunMetrics& m : all_runs)
            if (m.method == method) finals.push_back(m.final_mean());
        summary << method << ": final mean accuracy over tasks = " << mean_of(finals) << " +- "
                << sample_std(finals) << " (" << finals.size() << " seeds)\n";
        summary << method << ": free capacity per stage =";
        std::map<int, std::vector<double>> capacity;
        for (const RunMetrics& m : all_runs)
            if (m.method == method)
                for (std::size_t s = 0; s < m.free_capacity.size(); ++s)
                    capacity[static_cast<int>(s)].push_back(m.free_capacity[s]);
        for (const auto& [s, vals] : capacity) summary << " " << mean_of(vals);
        summary << "\n";
    }
    return 0;
}

int cmd_report(const std::string& run_dir) {
    std::vector<std::string> files;
    if (fs::is_directory(run_dir))
        for (const auto& e : fs::directory_iterator(run_dir)) {
            const std::string name = e.path().filename().string();
            if (name.rfind("run_", 0) == 0 && name.size() > 4 &&
                name.substr(name.size() - 4) == ".csv")
                files.push_back(e.path().string());
        }
    if (files.empty()) throw ConfigError("no run CSVs found in " + run_dir);
    std::sort(files.begin(), files.end());

    std::string hash, protocol;
    std::vector<MetricRow> rows;
    for (const auto& f : files) {
        RunFile rf = read_run_csv(f);
        if (rf.rows.empty()) continue;
        if (hash.empty()) hash = rf.config_hash;
        if (rf.config_hash != hash)
            throw ConfigError("config hash mismatch in " + f + " (refusing to aggregate)");
        for (const auto& r : rf.rows) {
            if (protocol.empty()) protocol = r.protocol;
            if (r.protocol != protocol)
                throw ConfigError("mixed protocols in " + run_dir + " (refusing to aggregate)");
            rows.push_back(r);
        }
    }

    // Headline numbers: per-method mean accuracy over all tasks at the final
    // stage, and the free-capacity trajectory.
    std::map<std::string, int> final_stage;
    for (const auto& r : rows)
        final_stage[r.method] = std::max(final_stage[r.method], r.stage);

    std::map<std::string, std::vector<double>> final_acc;
    std::map<std::string, std::map<int, std::vector<double>>> capacity;
    for (const auto& r : rows) {
        if (r.stage == final_stage[r.method]) final_acc[r.method].push_back(r.accuracy);
        capacity[r.method][r.stage].push_back(r.free_capacity);
    }

    std::ofstream txt(run_dir + "/report.txt");
    std::ofstream csv(run_dir + "/report.csv");
    txt.precision(6);
    csv.precision(17);
    txt << "protocol: " << protocol << "\nconfig_hash: " << hash << "\n";
    csv << "method,final_mean_accuracy,final_std_accuracy,stage,mean_free_capacity\n";
    for (const auto& [method, vals] : final_acc) {
        txt << method << ": final mean accuracy = " << mean_of(vals) << " +- "
            << sample_std(vals) << "\n";
        txt << method << ": free capacity trajectory =";
        for (const auto& [stage, caps] : capacity[method]) {
            txt << " " << mean_of(caps);
            csv << method << "," << mean_of(vals) << "," << sample_std(vals) << "," << stage << ","
                << mean_of(caps) << "\n";
        }
        txt << "\n";
        std::cout << method << ": final mean accuracy = " << mean_of(vals) << " +- "
                  << sample_std(vals) << " (" << protocol << ")\n";
    }
    return 0;
}

int cmd_heatmap(const std::string& checkpoint_path, const std::string& mnist_dir,
                std::size_t sample_index, const std::string& head, std::size_t target_class,
                const std::string& out_prefix, double epsilon) {
    Checkpoint ckpt = load_checkpoint(checkpoint_path);
    auto [train, test] = load_mnist(mnist_dir);
    if (sample_index >= test.size())
        throw ConfigError("sample index " + std::to_string(sample_index) + " out of range (" +
                          std::to_string(test.size()) + " test samples)");
    if (!ckpt.net.has_head(head)) throw HeadNotFoundError("head not found: " + head);
    if (target_class >= ckpt.net.head_out_dim(head))
        throw ConfigError("target class out of range for head " + head);

    const std::size_t d = test.sample_size();
    Tensor x(ckpt.net.input_shape());
    std::copy_n(test.images.data() + sample_index * d, d, x.data());

    RuleConfig rules;
    rules.epsilon = epsilon;
    const RelevanceMap map = attribute(ckpt.net, x, head, target_class, rules);

    const std::size_t side = static_cast<std::size_t>(std::lround(std::sqrt(double(d))));
    write_heatmap_ppm(map.input_relevance, side, side, out_prefix + ".ppm");
    write_relevance_csv(map.input_relevance, side, side, out_prefix + ".csv");
    std::cout << "wrote " << out_prefix << ".ppm and " << out_prefix << ".csv\n";
    return 0;
}

int cmd_fetch_data(const std::string& data_dir, const std::string& from_dir) {
    fs::create_directories(data_dir);
    bool all_ok = true;
    for (const auto& [name, crc] : kMnistFiles) {
        const std::string dst = data_dir + "/" + name;
        if (!from_dir.empty() && fs::exists(from_dir + "/" + name))
            fs::copy_file(from_dir + "/" + name, dst, fs::copy_options::overwrite_existing);
        if (!fs::exists(dst)) {
            std::cout << "[missing] " << dst << "\n";
            all_ok = false;
            continue;
        }
        const std::uint32_t got = file_crc32(dst);
        if (got == crc) {
            std::cout << "[ok] " << dst << " crc32=" << std::hex << got << std::dec << "\n";
        } else {
            std::cout << "[bad-crc] " << dst << " expected " << std::hex << crc << " got " << got
                      << std::dec << "\n";
            all_ok = false;
        }
    }
    if (!all_ok) {
        std::cout << "\nMNIST is the standard 4-file IDX distribution (decompressed). Obtain\n"
                     "the .gz files from a mirror, e.g.\n"
                     "  https://ossci-datasets.s3.amazonaws.com/mnist/\n"
                     "gunzip them into " << data_dir << " and re-run `tbe fetch-data`,\n"
                     "or point --from at a directory that already holds them.\n";
    }
    return all_ok ? 0 : 1;
}

}  // namespace tbe
