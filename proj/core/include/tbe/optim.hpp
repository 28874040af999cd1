#pragma once

#include <map>
#include <optional>

#include "tbe/network.hpp"

namespace tbe {

/// Per-unit learning-rate multipliers. 1.0 = fully plastic, 0.0 = frozen.
/// Multipliers only ever decrease over the lifetime of a run.
class FreezeState {
public:
    FreezeState() = default;

    /// Every Dense/Conv2D non-head unit starts fully plastic.
    static FreezeState fresh(const Network& net) {
        FreezeState fs;
        for (UnitId u : net.units()) fs.mult_[u] = 1.0;
        return fs;
    }

    double multiplier(UnitId u) const {
        auto it = mult_.find(u);
        if (it == mult_.end())
            throw IncompleteFreezeStateError("no multiplier for unit (layer " +
                                             std::to_string(u.layer_index) + ", index " +
                                             std::to_string(u.unit_index) + ")");
        return it->second;
    }

    bool has(UnitId u) const { return mult_.count(u) != 0; }
    bool is_frozen(UnitId u) const { return multiplier(u) == 0.0; }

    /// Lower a unit's multiplier. Raising is a monotonicity violation.
    void set_multiplier(UnitId u, double m, std::optional<int> frozen_by_task = std::nullopt) {
        if (m < 0.0) throw MonotonicityError("multiplier must be non-negative");
        const double cur = multiplier(u);
        if (m > cur)
            throw MonotonicityError("multiplier may not be raised (unit layer " +
                                    std::to_string(u.layer_index) + ", index " +
                                    std::to_string(u.unit_index) + ": " + std::to_string(cur) +
                                    " -> " + std::to_string(m) + ")");
        mult_[u] = m;
        if (frozen_by_task) frozen_by_[u] = *frozen_by_task;
    }

    std::optional<int> frozen_by(UnitId u) const {
        auto it = frozen_by_.find(u);
        if (it == frozen_by_.end()) return std::nullopt;
        return it->second;
    }

    const std::map<UnitId, double>& multipliers() const { return mult_; }

    std::size_t total_units() const { return mult_.size(); }
    std::size_t unfrozen_units() const {
        std::size_t n = 0;
        for (const auto& [u, m] : mult_)
            if (m > 0.0) ++n;
        return n;
    }

private:
    std::map<UnitId, double> mult_;
    std::map<UnitId, int> frozen_by_;
};

struct AdamConfig {
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double l2 = 0.0;  // optional weight decay, off by default
};

/// Adam moment buffers plus step counter. Frozen units' elements are skipped
/// entirely: neither parameters nor moments change while the multiplier is 0.
class AdamState {
public:
    AdamState() = default;
    AdamState(const Network& net, AdamConfig cfg);

    const AdamConfig& config() const { return cfg_; }
    std::uint64_t step_count() const { return t_; }
    const Tensor& first_moment(const ParamKey& k) const { return m_.at(k); }
    const Tensor& second_moment(const ParamKey& k) const { return v_.at(k); }

    friend void step(Network&, const Gradients&, AdamState&, const FreezeState&);

private:
    AdamConfig cfg_;
    std::map<ParamKey, Tensor> m_;
    std::map<ParamKey, Tensor> v_;
    std::uint64_t t_ = 0;
};

/// One Adam update over every parameter, scaled per element by the owning
/// unit's multiplier. Head parameters are always fully plastic.
void step(Network& net, const Gradients& grads, AdamState& adam, const FreezeState& freeze);

/// Unit owning a parameter element: a unit owns its incoming weights and
/// bias. Returns nullopt for head parameters (always-plastic pseudo-unit).
std::optional<UnitId> owner_unit(const Network& net, int layer_index, const std::string& param,
                                 std::size_t flat_index);

}  // namespace tbe
