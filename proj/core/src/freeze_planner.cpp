#include "tbe/freeze_planner.hpp"

#include <algorithm>

namespace tbe {

PlanResult plan_freeze(Network& net, const RelevanceReport& report, const FreezeState& freeze,
                       const PruneConfig& cfg, const EvalFn& eval, std::ostream* audit) {
    if (cfg.threshold < 0.0 || cfg.threshold >= 1.0)
        throw ConfigError("pruning threshold must lie in [0, 1)");

    // Candidates: units still plastic. Frozen units are never zeroed and are
    // counted as kept implicitly (they appear in neither result set).
    std::vector<UnitId> candidates;
    for (UnitId u : net.units()) {
        if (!freeze.has(u))
            throw Error("freeze state does not cover unit (layer " +
                        std::to_string(u.layer_index) + ", index " +
                        std::to_string(u.unit_index) + ")");
        if (!report.scores.count(u))
            throw Error("relevance report does not cover unit (layer " +
                        std::to_string(u.layer_index) + ", index " +
                        std::to_string(u.unit_index) + ")");
        if (freeze.multiplier(u) > 0.0) candidates.push_back(u);
    }

    // Ascending score, ties by (layer_index, unit_index): a total order.
    std::stable_sort(candidates.begin(), candidates.end(), [&](UnitId a, UnitId b) {
        const double sa = report.scores.at(a), sb = report.scores.at(b);
        if (sa != sb) return sa < sb;
        return a < b;
    });

    const std::size_t r = cfg.ratio ? cfg.ratio : std::max<std::size_t>(1, candidates.size() / 100);

    PlanResult plan;
    plan.baseline_accuracy = eval(net);
    plan.final_accuracy_at_stop = plan.baseline_accuracy;

    if (audit) *audit << "iteration,units_zeroed,cumulative_zeroed,accuracy\n";

    const std::size_t zero_target = cfg.criterion == StopCriterion::CapacityFloor
                                        ? std::min(cfg.capacity_floor, candidates.size())
                                        : candidates.size();

    std::vector<UndoRecord> undos;
    std::size_t pos = 0;
    while (pos < zero_target) {
        const std::size_t take = std::min(r, zero_target - pos);
        for (std::size_t i = 0; i < take; ++i)
            undos.push_back(zero_unit_outgoing(net, candidates[pos + i]));
        const double acc = eval(net);
        ++plan.iterations;
        if (audit)
            *audit << plan.iterations << "," << take << "," << (pos + take) << "," << acc << "\n";

        if (cfg.criterion == StopCriterion::AccuracyDrop &&
            plan.baseline_accuracy - acc > cfg.threshold) {
            // Boundary iteration violated the threshold: its units (and all
            // remaining ones) are relevant.
            break;
        }
        plan.final_accuracy_at_stop = acc;
        pos += take;
    }

    plan.irrelevant_units.assign(candidates.begin(), candidates.begin() + pos);
    plan.relevant_units.assign(candidates.begin() + pos, candidates.end());
    std::sort(plan.irrelevant_units.begin(), plan.irrelevant_units.end());
    std::sort(plan.relevant_units.begin(), plan.relevant_units.end());

    for (auto it = undos.rbegin(); it != undos.rend(); ++it) restore_units(net, *it);
    return plan;
}

void apply_freeze(const PlanResult& plan, FreezeState& freeze, double lr_frozen,
                  double lr_irrelevant, int task_index) {
    for (UnitId u : plan.relevant_units) freeze.set_multiplier(u, lr_frozen, task_index);
    for (UnitId u : plan.irrelevant_units) freeze.set_multiplier(u, lr_irrelevant);
}

double free_capacity(const FreezeState& freeze) {
    if (freeze.total_units() == 0) return 100.0;
    return 100.0 * static_cast<double>(freeze.unfrozen_units()) /
           static_cast<double>(freeze.total_units());
}

}  // namespace tbe
