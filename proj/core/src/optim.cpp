#include "tbe/optim.hpp"

#include <cmath>

namespace tbe {

AdamState::AdamState(const Network& net, AdamConfig cfg) : cfg_(cfg) {
    for (const ParamKey& k : net.param_keys()) {
        const Tensor& p = net.param(k.first, k.second);
        m_[k] = Tensor(p.shape());
        v_[k] = Tensor(p.shape());
    }
}

std::optional<UnitId> owner_unit(const Network& net, int layer_index, const std::string& param,
                                 std::size_t flat_index) {
    const Layer& l = net.layer(static_cast<std::size_t>(layer_index));
    switch (l.spec.kind) {
        case LayerKind::Dense: {
            const auto& d = l.spec.as_dense();
            // Weight column k and bias k belong to unit (l, k).
            const std::size_t k = param == "b" ? flat_index : flat_index % d.out_dim;
            return UnitId{layer_index, static_cast<int>(k)};
        }
        case LayerKind::Conv2D: {
            const auto& c = l.spec.as_conv();
            const std::size_t per_channel = c.in_channels * c.kernel_h * c.kernel_w;
            const std::size_t ch = param == "b" ? flat_index : flat_index / per_channel;
            return UnitId{layer_index, static_cast<int>(ch)};
        }
        default:
            return std::nullopt;  // head parameters: always-plastic pseudo-unit
    }
}

void step(Network& net, const Gradients& grads, AdamState& adam, const FreezeState& freeze) {
    const AdamConfig& cfg = adam.cfg_;
    adam.t_ += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(adam.t_));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(adam.t_));

    for (const ParamKey& key : net.param_keys()) {
        auto git = grads.by_param.find(key);
        if (git == grads.by_param.end())
            throw Error("missing gradient for parameter (" + std::to_string(key.first) + ", " +
                        key.second + ")");
        Tensor& p = net.param(key.first, key.second);
        const Tensor& g = git->second;
        if (!g.same_shape(p))
            throw ShapeError("gradient shape mismatch for (" + std::to_string(key.first) + ", " +
                             key.second + ")");
        Tensor& m = adam.m_[key];
        Tensor& v = adam.v_[key];
        const Layer& l = net.layer(static_cast<std::size_t>(key.first));

        // Multiplier per element. Dense weights cycle over columns; conv
        // weights are contiguous per output channel; everything else is
        // a single lookup per element via owner_unit.
        auto mult_of = [&](std::size_t i) -> double {
            auto u = owner_unit(net, key.first, key.second, i);
            return u ? freeze.multiplier(*u) : 1.0;
        };

        if (l.spec.kind == LayerKind::Dense && key.second == "w") {
            const auto& d = l.spec.as_dense();
            std::vector<double> colmult(d.out_dim);
            for (std::size_t k = 0; k < d.out_dim; ++k)
                colmult[k] = freeze.multiplier(UnitId{key.first, static_cast<int>(k)});
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double mu = colmult[i % d.out_dim];
                if (mu == 0.0) continue;
                const double gi = g[i] + cfg.l2 * p[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                p[i] -= cfg.lr * mu * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.epsilon);
            }
        } else {
            for (std::size_t i = 0; i < p.size(); ++i) {
                const double mu = mult_of(i);
                if (mu == 0.0) continue;
                const double gi = g[i] + cfg.l2 * p[i];
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
                p[i] -= cfg.lr * mu * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.epsilon);
            }
        }
    }
    net.bump_param_version();
}

}  // namespace tbe
