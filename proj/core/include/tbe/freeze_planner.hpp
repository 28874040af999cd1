#pragma once

#include <functional>
#include <ostream>
#include <vector>

#include "tbe/lrp.hpp"
#include "tbe/optim.hpp"

namespace tbe {

enum class StopCriterion { AccuracyDrop, CapacityFloor };

struct PruneConfig {
    // Tolerated accuracy drop, as a fraction in (0, 1). 0 is allowed and
    // makes every unit relevant on the first loss.
    double threshold = 0.02;
    // Units zeroed per iteration; 0 means max(1, 1% of active units).
    std::size_t ratio = 0;
    StopCriterion criterion = StopCriterion::AccuracyDrop;
    // Minimum number of units left unfrozen under CapacityFloor.
    std::size_t capacity_floor = 0;
};

struct PlanResult {
    std::vector<UnitId> relevant_units;    // to be frozen
    std::vector<UnitId> irrelevant_units;  // stay plastic
    double baseline_accuracy = 0.0;
    double final_accuracy_at_stop = 0.0;
    std::size_t iterations = 0;
};

/// Accuracy of the (transiently modified) network on the current task's
/// evaluation split, as a fraction in [0, 1].
using EvalFn = std::function<double(const Network&)>;

/// Selection loop: zero units in ascending importance order, r per
/// iteration, until the stop criterion fires; the boundary iteration is
/// rolled back. Units frozen by earlier tasks are never candidates. All
/// connections are restored bit-exactly before returning. When `audit` is
/// non-null a CSV row is written per iteration.
PlanResult plan_freeze(Network& net, const RelevanceReport& report, const FreezeState& freeze,
                       const PruneConfig& cfg, const EvalFn& eval, std::ostream* audit = nullptr);

/// Lower multipliers per the plan: relevant units to lr_frozen (recording
/// the freezing task), irrelevant units to lr_irrelevant. Previously frozen
/// units are untouched.
void apply_freeze(const PlanResult& plan, FreezeState& freeze, double lr_frozen,
                  double lr_irrelevant, int task_index);

/// Percentage of non-head units still plastic.
double free_capacity(const FreezeState& freeze);

}  // namespace tbe
