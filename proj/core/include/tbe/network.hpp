#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "tbe/rng.hpp"
#include "tbe/tensor.hpp"

namespace tbe {

enum class LayerKind { Dense, Conv2D, ReLU, Flatten, HeadGroup };

struct DenseSpec {
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
};

struct Conv2DSpec {
    std::size_t in_channels = 0;
    std::size_t out_channels = 0;
    std::size_t kernel_h = 0;
    std::size_t kernel_w = 0;
    std::size_t stride = 1;
    std::size_t padding = 0;
};

struct ReLUSpec {};
struct FlattenSpec {};

struct HeadGroupSpec {
    std::size_t shared_in_dim = 0;
    // head id -> output dimension; order preserved as given.
    std::vector<std::pair<std::string, std::size_t>> heads;
};

struct LayerSpec {
    LayerKind kind;
    std::variant<DenseSpec, Conv2DSpec, ReLUSpec, FlattenSpec, HeadGroupSpec> spec;

    static LayerSpec dense(std::size_t in, std::size_t out) {
        return {LayerKind::Dense, DenseSpec{in, out}};
    }
    static LayerSpec conv2d(std::size_t ic, std::size_t oc, std::size_t kh, std::size_t kw,
                            std::size_t stride = 1, std::size_t padding = 0) {
        return {LayerKind::Conv2D, Conv2DSpec{ic, oc, kh, kw, stride, padding}};
    }
    static LayerSpec relu() { return {LayerKind::ReLU, ReLUSpec{}}; }
    static LayerSpec flatten() { return {LayerKind::Flatten, FlattenSpec{}}; }
    static LayerSpec head_group(std::size_t in,
                                std::vector<std::pair<std::string, std::size_t>> heads) {
        return {LayerKind::HeadGroup, HeadGroupSpec{in, std::move(heads)}};
    }

    const DenseSpec& as_dense() const { return std::get<DenseSpec>(spec); }
    const Conv2DSpec& as_conv() const { return std::get<Conv2DSpec>(spec); }
    const HeadGroupSpec& as_heads() const { return std::get<HeadGroupSpec>(spec); }
};

/// Addresses a neuron (Dense) or output channel (Conv2D) of a non-head layer.
struct UnitId {
    int layer_index = 0;
    int unit_index = 0;

    auto operator<=>(const UnitId&) const = default;
};

struct Layer {
    LayerSpec spec;
    // Parameters by name: Dense/Conv2D use "w","b"; HeadGroup uses
    // "w:<head_id>","b:<head_id>".
    std::map<std::string, Tensor> params;
};

using ParamKey = std::pair<int, std::string>;  // (layer_index, parameter_name)

struct Gradients {
    std::map<ParamKey, Tensor> by_param;
};

/// Per-layer activations recorded during one forward pass. outputs[i] is the
/// post-layer value of layer i (for Dense/Conv2D that is the pre-activation,
/// since nonlinearities are separate layers).
struct ForwardTrace {
    Tensor input;
    std::vector<Tensor> outputs;
    std::string head;
    std::uint64_t param_version = 0;
};

/// Undo log for zero_unit_outgoing; holds the exact overwritten values.
struct UndoRecord {
    struct Entry {
        int layer_index;
        std::string param;
        std::size_t flat_index;
        double old_value;
    };
    std::vector<Entry> entries;
    bool restored = false;

    bool empty() const { return entries.empty(); }
};

/// Ordered layer stack with named parameters, per-unit addressing and
/// multiple task heads (exactly one HeadGroup, as the final layer).
class Network {
public:
    Network(std::vector<std::size_t> input_shape, std::vector<LayerSpec> layers);

    std::size_t layer_count() const { return layers_.size(); }
    const Layer& layer(std::size_t i) const { return layers_[i]; }
    Layer& layer(std::size_t i) { return layers_[i]; }
    const std::vector<std::size_t>& input_shape() const { return input_shape_; }
    /// Output shape of layer i for a single sample (no batch dimension).
    const std::vector<std::size_t>& output_shape(std::size_t i) const { return out_shapes_[i]; }
    std::size_t head_layer_index() const { return layers_.size() - 1; }
    const HeadGroupSpec& head_group() const { return layers_.back().spec.as_heads(); }
    bool has_head(const std::string& head_id) const;
    std::size_t head_out_dim(const std::string& head_id) const;

    std::uint64_t param_version() const { return param_version_; }
    void bump_param_version() { ++param_version_; }

    Tensor& param(int layer_index, const std::string& name);
    const Tensor& param(int layer_index, const std::string& name) const;

    /// All (layer, name) parameter keys in deterministic order.
    std::vector<ParamKey> param_keys() const;

    /// All prunable/freezable units: Dense and Conv2D layers outside the head.
    std::vector<UnitId> units() const;
    bool is_valid_unit(UnitId u) const;

    /// He-style normal initialization for all weights, zero biases.
    void init_params(Rng& rng);

private:
    std::vector<std::size_t> input_shape_;
    std::vector<Layer> layers_;
    std::vector<std::vector<std::size_t>> out_shapes_;
    std::uint64_t param_version_ = 0;
};

/// Forward pass through the network routing the final layer through `head`.
/// Returns logits of shape (batch, head_out_dim). When `trace` is non-null it
/// is filled with every layer's output for backward/LRP consumption.
Tensor forward(const Network& net, const Tensor& x, const std::string& head,
               ForwardTrace* trace = nullptr);

/// Reverse-mode gradients for every parameter. loss_grad has the logits'
/// shape. Heads other than the traced one receive zero gradients.
Gradients backward(const Network& net, const ForwardTrace& trace, const Tensor& loss_grad);

/// Zero all weights consuming `unit`'s output (the next parameterized
/// layer's rows / input-channel slices, including every head). Returns the
/// overwritten values for bit-exact restoration.
UndoRecord zero_unit_outgoing(Network& net, UnitId unit);

/// Restore every weight overwritten by a zero_unit_outgoing call, bit-exactly.
void restore_units(Network& net, UndoRecord& undo);

}  // namespace tbe
