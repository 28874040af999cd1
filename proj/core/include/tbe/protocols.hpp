#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tbe/data.hpp"
#include "tbe/freeze_planner.hpp"
#include "tbe/network.hpp"
#include "tbe/optim.hpp"

namespace tbe {

/// One task of a task-incremental stream: a subset of classes mapped to
/// head-local labels, an optional fixed pixel permutation, and train/test
/// index sets into the underlying datasets.
struct TaskSpec {
    int task_index = 0;
    std::string head_id;
    std::vector<int> class_list;           // original labels; position = head-local label
    std::vector<std::size_t> permutation;  // empty = identity
    std::vector<std::size_t> train_indices;
    std::vector<std::size_t> test_indices;

    int head_local_label(int original) const;
};

struct TaskStream {
    std::vector<TaskSpec> tasks;
    std::string protocol;
    std::uint64_t seed = 0;
};

/// Accuracy matrix over (training stage, task): after stage s every task
/// 0..s has been evaluated through its own head. Percentages in [0, 100].
struct RunMetrics {
    std::string protocol;
    std::string method;
    std::uint64_t seed = 0;
    std::vector<std::vector<double>> accuracy;  // accuracy[stage][task], task <= stage
    std::vector<double> free_capacity;          // after each stage
    std::vector<double> stage_seconds;

    double mean_seen(std::size_t stage) const;
    double final_mean() const { return mean_seen(accuracy.size() - 1); }
};

enum class Method { BaselineFinetune, TrainByExplaining };

std::string method_name(Method m);

struct TrainHyper {
    AdamConfig adam;
    std::size_t batch = 128;
    std::size_t epochs = 4;
    double lrp_epsilon = 1e-6;
    int ref_per_class = 10;
    double threshold = 0.02;
    std::size_t ratio = 0;  // 0 = max(1, 1% of active units)
    double lr_frozen = 0.0;
    double lr_irrelevant = 1.0;
    std::size_t train_subset = 0;    // cap on train samples per task (0 = all)
    std::size_t plan_eval_max = 0;   // cap on eval samples during planning (0 = all)
    bool plan_on_validation = false; // plan on a held-out 10% of train instead of test
    bool positive_only = true;
    bool seed_true_class = true;
};

/// Five binary tasks: task i holds digits {2i, 2i+1} with head-local labels
/// {0, 1} and its own head.
TaskStream make_mnist_split(const Dataset& train, const Dataset& test, std::uint64_t seed);

/// Task 0 is the unpermuted data; tasks 1..n-1 apply independent uniform
/// pixel permutations. All tasks are full 10-class problems with own heads.
TaskStream make_mnist_permuted(const Dataset& train, const Dataset& test, int n_tasks,
                               std::uint64_t seed);

/// Generic class split: explicit semantic groups, or `n_tasks` random chunks
/// of the shuffled class set when `groups` is empty.
TaskStream make_class_split(const Dataset& train, const Dataset& test,
                            const std::vector<std::vector<int>>& groups, int n_tasks,
                            std::uint64_t seed, const std::string& protocol_name);

/// Network sized for a stream: MLP hidden widths (flat inputs), one head per
/// task, deterministic He init from the seed.
Network make_mlp(const Dataset& train, const TaskStream& stream,
                 const std::vector<std::size_t>& hidden, std::uint64_t seed);

/// Small CNN for (C,H,W) inputs: two conv blocks then a dense layer.
Network make_cnn(const Dataset& train, const TaskStream& stream, std::uint64_t seed);

/// Accuracy (fraction) of `net` on the given task's index set.
double evaluate_task(const Network& net, const Dataset& ds, const TaskSpec& task,
                     const std::vector<std::size_t>& indices, std::size_t batch = 512);

/// Sequential training over the stream. With TrainByExplaining, each task is
/// followed by importance computation, the pruning sweep and freezing. Plan
/// audit CSVs are written to `audit_prefix`task<k>.csv when non-empty.
RunMetrics run_sequential(Network& net, const TaskStream& stream, Method method,
                          const TrainHyper& hyper, const Dataset& train, const Dataset& test,
                          std::uint64_t seed, const std::string& audit_prefix = "",
                          FreezeState* freeze_out = nullptr);

/// Joint upper bound: all tasks' data merged and trained as one stage, each
/// sample routed through its task's head; evaluated per task.
RunMetrics run_joint_upper_bound(Network& net, const TaskStream& stream,
                                 const TrainHyper& hyper, const Dataset& train,
                                 const Dataset& test, std::uint64_t seed);

}  // namespace tbe
