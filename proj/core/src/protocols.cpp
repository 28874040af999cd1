#include "tbe/protocols.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace tbe {

int TaskSpec::head_local_label(int original) const {
    for (std::size_t i = 0; i < class_list.size(); ++i)
        if (class_list[i] == original) return static_cast<int>(i);
    throw Error("label " + std::to_string(original) + " not part of task " +
                std::to_string(task_index));
}

double RunMetrics::mean_seen(std::size_t stage) const {
    const auto& row = accuracy.at(stage);
    return std::accumulate(row.begin(), row.end(), 0.0) / static_cast<double>(row.size());
}

std::string method_name(Method m) {
    return m == Method::BaselineFinetune ? "baseline" : "tbe";
}

namespace {

std::vector<std::size_t> indices_with_labels(const Dataset& ds, const std::vector<int>& classes) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ds.size(); ++i)
        if (std::find(classes.begin(), classes.end(), ds.labels[i]) != classes.end())
            out.push_back(i);
    return out;
}

std::vector<std::size_t> all_indices(const Dataset& ds) {
    std::vector<std::size_t> out(ds.size());
    std::iota(out.begin(), out.end(), 0);
    return out;
}

// Copy selected samples into a batch tensor, applying the task permutation,
// and map labels to head-local indices.
void gather(const Dataset& ds, const TaskSpec& task, const std::vector<std::size_t>& idx,
            std::size_t begin, std::size_t end, Tensor& x, std::vector<int>& labels) {
    const std::size_t d = ds.sample_size();
    const std::size_t n = end - begin;
    x = Tensor({n, d});
    labels.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        const std::size_t src = idx[begin + r];
        const double* in = ds.images.data() + src * d;
        double* out = x.data() + r * d;
        if (task.permutation.empty()) {
            std::copy_n(in, d, out);
        } else {
            for (std::size_t j = 0; j < d; ++j) out[j] = in[task.permutation[j]];
        }
        labels[r] = task.head_local_label(ds.labels[src]);
    }
}

// Cross-entropy gradient wrt logits: (softmax - onehot) / denom.
Tensor softmax_ce_grad(const Tensor& logits, const std::vector<int>& labels, double denom) {
    const std::size_t n = logits.dim(0), k = logits.dim(1);
    Tensor g(logits.shape());
    for (std::size_t i = 0; i < n; ++i) {
        const double* z = logits.data() + i * k;
        double zmax = z[0];
        for (std::size_t j = 1; j < k; ++j) zmax = std::max(zmax, z[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < k; ++j) sum += std::exp(z[j] - zmax);
        double* gi = g.data() + i * k;
        for (std::size_t j = 0; j < k; ++j) gi[j] = std::exp(z[j] - zmax) / sum / denom;
        gi[static_cast<std::size_t>(labels[i])] -= 1.0 / denom;
    }
    return g;
}

std::size_t argmax_row(const Tensor& logits, std::size_t row) {
    const std::size_t k = logits.dim(1);
    const double* z = logits.data() + row * k;
    return static_cast<std::size_t>(std::max_element(z, z + k) - z);
}

}  // namespace

TaskStream make_mnist_split(const Dataset& train, const Dataset& test, std::uint64_t seed) {
    TaskStream stream;
    stream.protocol = "mnist-split";
    stream.seed = seed;
    for (int t = 0; t < 5; ++t) {
        TaskSpec task;
        task.task_index = t;
        task.head_id = "task" + std::to_string(t);
        task.class_list = {2 * t, 2 * t + 1};
        task.train_indices = indices_with_labels(train, task.class_list);
        task.test_indices = indices_with_labels(test, task.class_list);
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

TaskStream make_mnist_permuted(const Dataset& train, const Dataset& test, int n_tasks,
                               std::uint64_t seed) {
    if (n_tasks < 1) throw ConfigError("mnist-permuted needs n_tasks >= 1");
    TaskStream stream;
    stream.protocol = "mnist-permuted";
    stream.seed = seed;
    const std::size_t d = train.sample_size();
    for (int t = 0; t < n_tasks; ++t) {
        TaskSpec task;
        task.task_index = t;
        task.head_id = "task" + std::to_string(t);
        task.class_list.resize(static_cast<std::size_t>(train.num_classes));
        std::iota(task.class_list.begin(), task.class_list.end(), 0);
        if (t > 0) {
            task.permutation.resize(d);
            std::iota(task.permutation.begin(), task.permutation.end(), std::size_t{0});
            Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(t), 0x7065726d);
            rng.shuffle(task.permutation);
        }
        task.train_indices = all_indices(train);
        task.test_indices = all_indices(test);
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

TaskStream make_class_split(const Dataset& train, const Dataset& test,
                            const std::vector<std::vector<int>>& groups, int n_tasks,
                            std::uint64_t seed, const std::string& protocol_name) {
    std::vector<std::vector<int>> final_groups = groups;
    if (final_groups.empty()) {
        if (n_tasks < 1 || train.num_classes % n_tasks != 0)
            throw ConfigError("n_tasks must divide the class count (" +
                              std::to_string(train.num_classes) + ")");
        std::vector<int> classes(static_cast<std::size_t>(train.num_classes));
        std::iota(classes.begin(), classes.end(), 0);
        Rng rng = Rng::derive(seed, 0x73706c69);
        rng.shuffle(classes);
        const std::size_t per = classes.size() / static_cast<std::size_t>(n_tasks);
        for (int t = 0; t < n_tasks; ++t)
            final_groups.emplace_back(classes.begin() + t * static_cast<int>(per),
                                      classes.begin() + (t + 1) * static_cast<int>(per));
    } else {
        std::set<int> seen;
        std::size_t total = 0;
        for (const auto& g : final_groups) {
            for (int c : g) {
                if (c < 0 || c >= train.num_classes || !seen.insert(c).second)
                    throw ConfigError("class groups must partition the label set");
            }
            total += g.size();
        }
        if (total != static_cast<std::size_t>(train.num_classes))
            throw ConfigError("class groups must cover every class exactly once");
    }

    TaskStream stream;
    stream.protocol = protocol_name;
    stream.seed = seed;
    for (std::size_t t = 0; t < final_groups.size(); ++t) {
        TaskSpec task;
        task.task_index = static_cast<int>(t);
        task.head_id = "task" + std::to_string(t);
        task.class_list = final_groups[t];
        task.train_indices = indices_with_labels(train, task.class_list);
        task.test_indices = indices_with_labels(test, task.class_list);
        stream.tasks.push_back(std::move(task));
    }
    return stream;
}

Network make_mlp(const Dataset& train, const TaskStream& stream,
                 const std::vector<std::size_t>& hidden, std::uint64_t seed) {
    const std::size_t in = train.sample_size();
    std::vector<LayerSpec> layers;
    std::size_t cur = in;
    for (std::size_t h : hidden) {
        layers.push_back(LayerSpec::dense(cur, h));
        layers.push_back(LayerSpec::relu());
        cur = h;
    }
    std::vector<std::pair<std::string, std::size_t>> heads;
    for (const TaskSpec& t : stream.tasks) heads.emplace_back(t.head_id, t.class_list.size());
    layers.push_back(LayerSpec::head_group(cur, std::move(heads)));
    Network net({in}, std::move(layers));
    Rng rng = Rng::derive(seed, 0x696e6974);
    net.init_params(rng);
    return net;
}

Network make_cnn(const Dataset& train, const TaskStream& stream, std::uint64_t seed) {
    const auto shape = train.sample_shape();
    if (shape.size() != 3) throw ConfigError("cnn model needs (C,H,W) inputs");
    std::vector<LayerSpec> layers;
    layers.push_back(LayerSpec::conv2d(shape[0], 16, 3, 3, 2, 1));
    layers.push_back(LayerSpec::relu());
    layers.push_back(LayerSpec::conv2d(16, 32, 3, 3, 2, 1));
    layers.push_back(LayerSpec::relu());
    layers.push_back(LayerSpec::flatten());
    const std::size_t h2 = (shape[1] + 1) / 2, w2 = (shape[2] + 1) / 2;
    const std::size_t flat = 32 * ((h2 + 1) / 2) * ((w2 + 1) / 2);
    layers.push_back(LayerSpec::dense(flat, 256));
    layers.push_back(LayerSpec::relu());
    std::vector<std::pair<std::string, std::size_t>> heads;
    for (const TaskSpec& t : stream.tasks) heads.emplace_back(t.head_id, t.class_list.size());
    layers.push_back(LayerSpec::head_group(256, std::move(heads)));
    Network net(shape, std::move(layers));
    Rng rng = Rng::derive(seed, 0x696e6974);
    net.init_params(rng);
    return net;
}

double evaluate_task(const Network& net, const Dataset& ds, const TaskSpec& task,
                     const std::vector<std::size_t>& indices, std::size_t batch) {
    if (indices.empty()) throw Error("evaluate_task: empty index set");
    std::size_t correct = 0;
    Tensor x;
    std::vector<int> labels;
    for (std::size_t begin = 0; begin < indices.size(); begin += batch) {
        const std::size_t end = std::min(indices.size(), begin + batch);
        gather(ds, task, indices, begin, end, x, labels);
        if (net.input_shape().size() > 1) {
            std::vector<std::size_t> s{end - begin};
            auto rest = net.input_shape();
            s.insert(s.end(), rest.begin(), rest.end());
            x = x.reshaped(s);
        }
        const Tensor logits = forward(net, x, task.head_id);
        for (std::size_t r = 0; r < end - begin; ++r)
            if (argmax_row(logits, r) == static_cast<std::size_t>(labels[r])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(indices.size());
}

namespace {

struct TaskData {
    std::vector<std::size_t> train;  // effective training indices
    std::vector<std::size_t> plan_eval;
};

// Resolve per-task training and planning-eval index sets from the hyper
// settings (subset cap, validation holdout, planning-eval cap).
TaskData resolve_task_data(const TaskSpec& task, const TrainHyper& hyper, std::uint64_t seed) {
    TaskData td;
    td.train = task.train_indices;
    if (hyper.plan_on_validation) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(task.task_index), 0x76616c);
        rng.shuffle(td.train);
        const std::size_t holdout = std::max<std::size_t>(1, td.train.size() / 10);
        td.plan_eval.assign(td.train.end() - static_cast<std::ptrdiff_t>(holdout), td.train.end());
        td.train.resize(td.train.size() - holdout);
    } else {
        td.plan_eval = task.test_indices;
    }
    if (hyper.train_subset && td.train.size() > hyper.train_subset) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(task.task_index), 0x737562);
        rng.shuffle(td.train);
        td.train.resize(hyper.train_subset);
        std::sort(td.train.begin(), td.train.end());
    }
    if (hyper.plan_eval_max && td.plan_eval.size() > hyper.plan_eval_max) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(task.task_index), 0x6576616c);
        rng.shuffle(td.plan_eval);
        td.plan_eval.resize(hyper.plan_eval_max);
        std::sort(td.plan_eval.begin(), td.plan_eval.end());
    }
    return td;
}

void train_task_epochs(Network& net, const Dataset& train, const TaskSpec& task,
                       const std::vector<std::size_t>& train_idx, const TrainHyper& hyper,
                       const FreezeState& freeze, std::uint64_t seed) {
    AdamState adam(net, hyper.adam);
    std::vector<std::size_t> order = train_idx;
    Tensor x;
    std::vector<int> labels;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        Rng rng = Rng::derive(seed, static_cast<std::uint64_t>(task.task_index) * 1000 + epoch,
                              0x65706f63);
        rng.shuffle(order);
        for (std::size_t begin = 0; begin < order.size(); begin += hyper.batch) {
            const std::size_t end = std::min(order.size(), begin + hyper.batch);
            gather(train, task, order, begin, end, x, labels);
            if (net.input_shape().size() > 1) {
                std::vector<std::size_t> s{end - begin};
                auto rest = net.input_shape();
                s.insert(s.end(), rest.begin(), rest.end());
                x = x.reshaped(s);
            }
            ForwardTrace trace;
            const Tensor logits = forward(net, x, task.head_id, &trace);
            const Tensor g = softmax_ce_grad(logits, labels, static_cast<double>(end - begin));
            const Gradients grads = backward(net, trace, g);
            step(net, grads, adam, freeze);
        }
    }
}

ReferenceSet task_reference(const Dataset& train, const TaskSpec& task,
                            const std::vector<std::size_t>& train_idx, const TrainHyper& hyper,
                            std::uint64_t seed) {
    ReferenceSet refs = sample_reference(
        train, hyper.ref_per_class,
        Rng::derive(seed, static_cast<std::uint64_t>(task.task_index), 0x726566).next_u64(),
        train_idx, task.class_list);
    if (!task.permutation.empty()) {
        const std::size_t d = train.sample_size();
        Tensor permuted(refs.images.shape());
        for (std::size_t r = 0; r < refs.labels.size(); ++r)
            for (std::size_t j = 0; j < d; ++j)
                permuted[r * d + j] = refs.images[r * d + task.permutation[j]];
        refs.images = std::move(permuted);
    }
    return refs;
}

}  // namespace

RunMetrics run_sequential(Network& net, const TaskStream& stream, Method method,
                          const TrainHyper& hyper, const Dataset& train, const Dataset& test,
                          std::uint64_t seed, const std::string& audit_prefix,
                          FreezeState* freeze_out) {
    for (const TaskSpec& t : stream.tasks)
        if (!net.has_head(t.head_id))
            throw HeadNotFoundError("network lacks head for task " + std::to_string(t.task_index));

    RunMetrics metrics;
    metrics.protocol = stream.protocol;
    metrics.method = method_name(method);
    metrics.seed = seed;

    FreezeState freeze = FreezeState::fresh(net);
    RuleConfig rules;
    rules.epsilon = hyper.lrp_epsilon;
    rules.positive_only = hyper.positive_only;
    rules.seed_true_class = hyper.seed_true_class;

    for (std::size_t stage = 0; stage < stream.tasks.size(); ++stage) {
        const TaskSpec& task = stream.tasks[stage];
        const auto t0 = std::chrono::steady_clock::now();
        const TaskData td = resolve_task_data(task, hyper, seed);

        train_task_epochs(net, train, task, td.train, hyper, freeze, seed);

        if (method == Method::TrainByExplaining) {
            const ReferenceSet refs = task_reference(train, task, td.train, hyper, seed);
            const RelevanceReport report = unit_importance(
                net, refs.images, refs.labels, task.head_id, rules, task.task_index);

            PruneConfig cfg;
            cfg.threshold = hyper.threshold;
            cfg.ratio = hyper.ratio;
            const Dataset& eval_ds = hyper.plan_on_validation ? train : test;
            EvalFn eval = [&](const Network& n) {
                return evaluate_task(n, eval_ds, task, td.plan_eval);
            };

            std::ofstream audit;
            if (!audit_prefix.empty())
                audit.open(audit_prefix + "task" + std::to_string(task.task_index) + ".csv");
            const PlanResult plan =
                plan_freeze(net, report, freeze, cfg, eval, audit.is_open() ? &audit : nullptr);
            apply_freeze(plan, freeze, hyper.lr_frozen, hyper.lr_irrelevant, task.task_index);
        }

        std::vector<double> row;
        for (std::size_t t = 0; t <= stage; ++t)
            row.push_back(100.0 * evaluate_task(net, test, stream.tasks[t],
                                                stream.tasks[t].test_indices));
        metrics.accuracy.push_back(std::move(row));
        metrics.free_capacity.push_back(free_capacity(freeze));
        metrics.stage_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }
    if (freeze_out) *freeze_out = freeze;
    return metrics;
}

RunMetrics run_joint_upper_bound(Network& net, const TaskStream& stream, const TrainHyper& hyper,
                                 const Dataset& train, const Dataset& test, std::uint64_t seed) {
    RunMetrics metrics;
    metrics.protocol = stream.protocol;
    metrics.method = "joint";
    metrics.seed = seed;

    const FreezeState freeze = FreezeState::fresh(net);
    AdamState adam(net, hyper.adam);

    // Merged pool of (task, sample) pairs; every sample routes through its
    // task's head.
    std::vector<std::pair<std::size_t, std::size_t>> pool;
    for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
        TaskData td = resolve_task_data(stream.tasks[t], hyper, seed);
        for (std::size_t i : td.train) pool.emplace_back(t, i);
    }

    const auto t0 = std::chrono::steady_clock::now();
    Tensor x;
    std::vector<int> labels;
    for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
        Rng rng = Rng::derive(seed, epoch, 0x6a6f696e);
        rng.shuffle(pool);
        for (std::size_t begin = 0; begin < pool.size(); begin += hyper.batch) {
            const std::size_t end = std::min(pool.size(), begin + hyper.batch);
            const double denom = static_cast<double>(end - begin);

            // Partition the batch by task, accumulate gradients, step once.
            Gradients total;
            for (const ParamKey& k : net.param_keys())
                total.by_param[k] = Tensor(net.param(k.first, k.second).shape());
            for (std::size_t t = 0; t < stream.tasks.size(); ++t) {
                std::vector<std::size_t> idx;
                for (std::size_t i = begin; i < end; ++i)
                    if (pool[i].first == t) idx.push_back(pool[i].second);
                if (idx.empty()) continue;
                gather(train, stream.tasks[t], idx, 0, idx.size(), x, labels);
                if (net.input_shape().size() > 1) {
                    std::vector<std::size_t> s{idx.size()};
                    auto rest = net.input_shape();
                    s.insert(s.end(), rest.begin(), rest.end());
                    x = x.reshaped(s);
                }
                ForwardTrace trace;
                const Tensor logits = forward(net, x, stream.tasks[t].head_id, &trace);
                const Tensor g = softmax_ce_grad(logits, labels, denom);
                const Gradients grads = backward(net, trace, g);
                for (auto& [k, tensor] : total.by_param) {
                    const Tensor& add = grads.by_param.at(k);
                    for (std::size_t i = 0; i < tensor.size(); ++i) tensor[i] += add[i];
                }
            }
            step(net, total, adam, freeze);
        }
    }

    std::vector<double> row;
    for (const TaskSpec& t : stream.tasks)
        row.push_back(100.0 * evaluate_task(net, test, t, t.test_indices));
    metrics.accuracy.push_back(std::move(row));
    metrics.free_capacity.push_back(free_capacity(freeze));
    metrics.stage_seconds.push_back(
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    return metrics;
}

}  // namespace tbe
