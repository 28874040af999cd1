#include "tbe/network.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace tbe {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using MapConstMat = Eigen::Map<const RowMat>;

MapConstMat as_mat(const Tensor& t, std::size_t rows, std::size_t cols) {
    return MapConstMat(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

MapMat as_mat(Tensor& t, std::size_t rows, std::size_t cols) {
    return MapMat(t.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

std::size_t conv_out_dim(std::size_t in, std::size_t k, std::size_t stride, std::size_t pad) {
    const std::size_t padded = in + 2 * pad;
    if (padded < k) throw ShapeError("conv kernel larger than padded input");
    return (padded - k) / stride + 1;
}

}  // namespace

Network::Network(std::vector<std::size_t> input_shape, std::vector<LayerSpec> layers)
    : input_shape_(std::move(input_shape)) {
    if (layers.empty()) throw ShapeError("network needs at least one layer");

    std::vector<std::size_t> cur = input_shape_;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& ls = layers[i];
        const std::string where = "layer " + std::to_string(i);
        switch (ls.kind) {
            case LayerKind::Dense: {
                const auto& d = ls.as_dense();
                if (cur.size() != 1 || cur[0] != d.in_dim)
                    throw ShapeError(where + " (Dense): expects input (" +
                                     std::to_string(d.in_dim) + "), got " + shape_str(cur));
                cur = {d.out_dim};
                break;
            }
            case LayerKind::Conv2D: {
                const auto& c = ls.as_conv();
                if (cur.size() != 3 || cur[0] != c.in_channels)
                    throw ShapeError(where + " (Conv2D): expects input (C=" +
                                     std::to_string(c.in_channels) + ",H,W), got " +
                                     shape_str(cur));
                if (c.stride == 0) throw ShapeError(where + " (Conv2D): stride must be positive");
                cur = {c.out_channels, conv_out_dim(cur[1], c.kernel_h, c.stride, c.padding),
                       conv_out_dim(cur[2], c.kernel_w, c.stride, c.padding)};
                break;
            }
            case LayerKind::ReLU:
                break;
            case LayerKind::Flatten:
                cur = {Tensor::count(cur)};
                break;
            case LayerKind::HeadGroup: {
                if (i + 1 != layers.size())
                    throw ShapeError(where + ": HeadGroup must be the final layer");
                const auto& h = ls.as_heads();
                if (h.heads.empty()) throw ShapeError(where + ": HeadGroup needs >= 1 head");
                if (cur.size() != 1 || cur[0] != h.shared_in_dim)
                    throw ShapeError(where + " (HeadGroup): expects input (" +
                                     std::to_string(h.shared_in_dim) + "), got " +
                                     shape_str(cur));
                break;
            }
        }
        Layer layer{ls, {}};
        layers_.push_back(std::move(layer));
        out_shapes_.push_back(cur);
    }
    if (layers_.back().spec.kind != LayerKind::HeadGroup)
        throw ShapeError("network must end with exactly one HeadGroup layer");
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i)
        if (layers_[i].spec.kind == LayerKind::HeadGroup)
            throw ShapeError("HeadGroup allowed only as the final layer");

    // Allocate parameters (zero-initialized; see init_params).
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        Layer& l = layers_[i];
        switch (l.spec.kind) {
            case LayerKind::Dense: {
                const auto& d = l.spec.as_dense();
                l.params["w"] = Tensor({d.in_dim, d.out_dim});
                l.params["b"] = Tensor({d.out_dim});
                break;
            }
            case LayerKind::Conv2D: {
                const auto& c = l.spec.as_conv();
                l.params["w"] = Tensor({c.out_channels, c.in_channels, c.kernel_h, c.kernel_w});
                l.params["b"] = Tensor({c.out_channels});
                break;
            }
            case LayerKind::HeadGroup: {
                const auto& h = l.spec.as_heads();
                for (const auto& [id, out] : h.heads) {
                    l.params["w:" + id] = Tensor({h.shared_in_dim, out});
                    l.params["b:" + id] = Tensor({out});
                }
                break;
            }
            default:
                break;
        }
    }
}

bool Network::has_head(const std::string& head_id) const {
    for (const auto& [id, out] : head_group().heads)
        if (id == head_id) return true;
    return false;
}

std::size_t Network::head_out_dim(const std::string& head_id) const {
    for (const auto& [id, out] : head_group().heads)
        if (id == head_id) return out;
    throw HeadNotFoundError("head not found: " + head_id);
}

Tensor& Network::param(int layer_index, const std::string& name) {
    auto& p = layers_.at(static_cast<std::size_t>(layer_index)).params;
    auto it = p.find(name);
    if (it == p.end())
        throw Error("no parameter '" + name + "' on layer " + std::to_string(layer_index));
    return it->second;
}

const Tensor& Network::param(int layer_index, const std::string& name) const {
    return const_cast<Network*>(this)->param(layer_index, name);
}

std::vector<ParamKey> Network::param_keys() const {
    std::vector<ParamKey> keys;
    for (std::size_t i = 0; i < layers_.size(); ++i)
        for (const auto& [name, t] : layers_[i].params)
            keys.emplace_back(static_cast<int>(i), name);
    return keys;
}

std::vector<UnitId> Network::units() const {
    std::vector<UnitId> out;
    for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
        const Layer& l = layers_[i];
        std::size_t n = 0;
        if (l.spec.kind == LayerKind::Dense)
            n = l.spec.as_dense().out_dim;
        else if (l.spec.kind == LayerKind::Conv2D)
            n = l.spec.as_conv().out_channels;
        for (std::size_t u = 0; u < n; ++u)
            out.push_back({static_cast<int>(i), static_cast<int>(u)});
    }
    return out;
}

bool Network::is_valid_unit(UnitId u) const {
    if (u.layer_index < 0 || static_cast<std::size_t>(u.layer_index) + 1 >= layers_.size())
        return false;
    const Layer& l = layers_[static_cast<std::size_t>(u.layer_index)];
    if (u.unit_index < 0) return false;
    if (l.spec.kind == LayerKind::Dense)
        return static_cast<std::size_t>(u.unit_index) < l.spec.as_dense().out_dim;
    if (l.spec.kind == LayerKind::Conv2D)
        return static_cast<std::size_t>(u.unit_index) < l.spec.as_conv().out_channels;
    return false;
}

void Network::init_params(Rng& rng) {
    for (Layer& l : layers_) {
        for (auto& [name, t] : l.params) {
            if (name[0] != 'w') continue;
            std::size_t fan_in = 0;
            if (l.spec.kind == LayerKind::Dense)
                fan_in = l.spec.as_dense().in_dim;
            else if (l.spec.kind == LayerKind::Conv2D) {
                const auto& c = l.spec.as_conv();
                fan_in = c.in_channels * c.kernel_h * c.kernel_w;
            } else
                fan_in = l.spec.as_heads().shared_in_dim;
            const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (double& v : t.values()) v = scale * rng.next_normal();
        }
    }
    ++param_version_;
}

namespace {

void conv_forward(const Conv2DSpec& c, const Tensor& x, const Tensor& w, const Tensor& b,
                  Tensor& y) {
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t OC = y.dim(1), OH = y.dim(2), OW = y.dim(3);
    const std::size_t KH = c.kernel_h, KW = c.kernel_w;
    for (std::size_t n = 0; n < B; ++n)
        for (std::size_t oc = 0; oc < OC; ++oc)
            for (std::size_t oy = 0; oy < OH; ++oy)
                for (std::size_t ox = 0; ox < OW; ++ox) {
                    double acc = b[oc];
                    for (std::size_t ic = 0; ic < C; ++ic)
                        for (std::size_t ky = 0; ky < KH; ++ky) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * c.stride + ky) -
                                static_cast<std::ptrdiff_t>(c.padding);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                            for (std::size_t kx = 0; kx < KW; ++kx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * c.stride + kx) -
                                    static_cast<std::ptrdiff_t>(c.padding);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                                acc += x.data()[((n * C + ic) * H + iy) * W + ix] *
                                       w.data()[((oc * C + ic) * KH + ky) * KW + kx];
                            }
                        }
                    y.data()[((n * OC + oc) * OH + oy) * OW + ox] = acc;
                }
}

void conv_backward(const Conv2DSpec& c, const Tensor& x, const Tensor& w, const Tensor& dy,
                   Tensor& dw, Tensor& db, Tensor& dx) {
    const std::size_t B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    const std::size_t OC = dy.dim(1), OH = dy.dim(2), OW = dy.dim(3);
    const std::size_t KH = c.kernel_h, KW = c.kernel_w;
    for (std::size_t n = 0; n < B; ++n)
        for (std::size_t oc = 0; oc < OC; ++oc)
            for (std::size_t oy = 0; oy < OH; ++oy)
                for (std::size_t ox = 0; ox < OW; ++ox) {
                    const double g = dy.data()[((n * OC + oc) * OH + oy) * OW + ox];
                    if (g == 0.0) continue;
                    db[oc] += g;
                    for (std::size_t ic = 0; ic < C; ++ic)
                        for (std::size_t ky = 0; ky < KH; ++ky) {
                            const std::ptrdiff_t iy =
                                static_cast<std::ptrdiff_t>(oy * c.stride + ky) -
                                static_cast<std::ptrdiff_t>(c.padding);
                            if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                            for (std::size_t kx = 0; kx < KW; ++kx) {
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * c.stride + kx) -
                                    static_cast<std::ptrdiff_t>(c.padding);
                                if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                                const std::size_t xi = ((n * C + ic) * H + iy) * W + ix;
                                const std::size_t wi = ((oc * C + ic) * KH + ky) * KW + kx;
                                dw.data()[wi] += g * x.data()[xi];
                                dx.data()[xi] += g * w.data()[wi];
                            }
                        }
                }
}

std::vector<std::size_t> with_batch(std::size_t batch, const std::vector<std::size_t>& rest) {
    std::vector<std::size_t> s{batch};
    s.insert(s.end(), rest.begin(), rest.end());
    return s;
}

}  // namespace

Tensor forward(const Network& net, const Tensor& x, const std::string& head,
               ForwardTrace* trace) {
    if (x.rank() < 2)
        throw ShapeError("forward input must carry a batch dimension, got " +
                         shape_str(x.shape()));
    const std::size_t batch = x.dim(0);
    {
        std::vector<std::size_t> rest(x.shape().begin() + 1, x.shape().end());
        if (rest != net.input_shape())
            throw ShapeError("layer 0: input sample shape " + shape_str(rest) +
                             " does not match network input " + shape_str(net.input_shape()));
    }
    if (!net.has_head(head)) throw HeadNotFoundError("head not found: " + head);

    if (trace) {
        trace->input = x;
        trace->outputs.clear();
        trace->outputs.reserve(net.layer_count());
        trace->head = head;
        trace->param_version = net.param_version();
    }

    Tensor cur = x;
    for (std::size_t i = 0; i < net.layer_count(); ++i) {
        const Layer& l = net.layer(i);
        Tensor next;
        switch (l.spec.kind) {
            case LayerKind::Dense: {
                const auto& d = l.spec.as_dense();
                next = Tensor(with_batch(batch, {d.out_dim}));
                auto X = as_mat(cur, batch, d.in_dim);
                auto W = as_mat(l.params.at("w"), d.in_dim, d.out_dim);
                auto Y = as_mat(next, batch, d.out_dim);
                Y.noalias() = X * W;
                const Tensor& b = l.params.at("b");
                Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(
                    b.data(), static_cast<Eigen::Index>(d.out_dim));
                break;
            }
            case LayerKind::Conv2D: {
                next = Tensor(with_batch(batch, net.output_shape(i)));
                conv_forward(l.spec.as_conv(), cur, l.params.at("w"), l.params.at("b"), next);
                break;
            }
            case LayerKind::ReLU: {
                next = cur;
                for (double& v : next.values())
                    if (v < 0.0) v = 0.0;
                break;
            }
            case LayerKind::Flatten: {
                next = cur.reshaped(with_batch(batch, net.output_shape(i)));
                break;
            }
            case LayerKind::HeadGroup: {
                const auto& h = l.spec.as_heads();
                const std::size_t out = net.head_out_dim(head);
                next = Tensor(with_batch(batch, {out}));
                auto X = as_mat(cur, batch, h.shared_in_dim);
                auto W = as_mat(l.params.at("w:" + head), h.shared_in_dim, out);
                auto Y = as_mat(next, batch, out);
                Y.noalias() = X * W;
                const Tensor& b = l.params.at("b:" + head);
                Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(
                    b.data(), static_cast<Eigen::Index>(out));
                break;
            }
        }
        if (trace) trace->outputs.push_back(next);
        cur = std::move(next);
    }
    return cur;
}

Gradients backward(const Network& net, const ForwardTrace& trace, const Tensor& loss_grad) {
    if (trace.param_version != net.param_version())
        throw StaleTraceError("forward trace was produced under different parameter values");
    if (trace.outputs.size() != net.layer_count())
        throw StaleTraceError("trace layer count does not match network");

    const std::size_t batch = trace.input.dim(0);
    Gradients grads;
    for (const ParamKey& k : net.param_keys())
        grads.by_param[k] = Tensor(net.param(k.first, k.second).shape());

    Tensor dcur = loss_grad;
    for (std::size_t ri = net.layer_count(); ri-- > 0;) {
        const Layer& l = net.layer(ri);
        const Tensor& in = ri == 0 ? trace.input : trace.outputs[ri - 1];
        Tensor dprev;
        switch (l.spec.kind) {
            case LayerKind::Dense: {
                const auto& d = l.spec.as_dense();
                if (dcur.dim(1) != d.out_dim)
                    throw ShapeError("backward: gradient shape mismatch at layer " +
                                     std::to_string(ri));
                dprev = Tensor(with_batch(batch, {d.in_dim}));
                auto X = as_mat(in, batch, d.in_dim);
                auto dY = as_mat(dcur, batch, d.out_dim);
                auto dW = as_mat(grads.by_param[{static_cast<int>(ri), "w"}], d.in_dim, d.out_dim);
                dW.noalias() = X.transpose() * dY;
                Eigen::Map<Eigen::RowVectorXd>(
                    grads.by_param[{static_cast<int>(ri), "b"}].data(),
                    static_cast<Eigen::Index>(d.out_dim)) = dY.colwise().sum();
                auto W = as_mat(l.params.at("w"), d.in_dim, d.out_dim);
                as_mat(dprev, batch, d.in_dim).noalias() = dY * W.transpose();
                break;
            }
            case LayerKind::Conv2D: {
                dprev = Tensor(in.shape());
                conv_backward(l.spec.as_conv(), in, l.params.at("w"), dcur,
                              grads.by_param[{static_cast<int>(ri), "w"}],
                              grads.by_param[{static_cast<int>(ri), "b"}], dprev);
                break;
            }
            case LayerKind::ReLU: {
                dprev = dcur;
                const Tensor& y = trace.outputs[ri];
                for (std::size_t i = 0; i < dprev.size(); ++i)
                    if (y[i] <= 0.0) dprev[i] = 0.0;
                break;
            }
            case LayerKind::Flatten: {
                dprev = dcur.reshaped(in.shape());
                break;
            }
            case LayerKind::HeadGroup: {
                const auto& h = l.spec.as_heads();
                const std::size_t out = net.head_out_dim(trace.head);
                dprev = Tensor(with_batch(batch, {h.shared_in_dim}));
                auto X = as_mat(in, batch, h.shared_in_dim);
                auto dY = as_mat(dcur, batch, out);
                auto dW = as_mat(grads.by_param[{static_cast<int>(ri), "w:" + trace.head}],
                                 h.shared_in_dim, out);
                dW.noalias() = X.transpose() * dY;
                Eigen::Map<Eigen::RowVectorXd>(
                    grads.by_param[{static_cast<int>(ri), "b:" + trace.head}].data(),
                    static_cast<Eigen::Index>(out)) = dY.colwise().sum();
                auto W = as_mat(l.params.at("w:" + trace.head), h.shared_in_dim, out);
                as_mat(dprev, batch, h.shared_in_dim).noalias() = dY * W.transpose();
                break;
            }
        }
        dcur = std::move(dprev);
    }
    return grads;
}

namespace {

// Flat row range in the next dense/head weight matrix fed by `unit`'s output.
// Dense units own one row; Conv2D channels own a contiguous block of rows
// after Flatten (row-major (C,H,W) layout).
std::pair<std::size_t, std::size_t> outgoing_rows(const Network& net, UnitId unit) {
    const Layer& l = net.layer(static_cast<std::size_t>(unit.layer_index));
    if (l.spec.kind == LayerKind::Dense)
        return {static_cast<std::size_t>(unit.unit_index),
                static_cast<std::size_t>(unit.unit_index) + 1};
    const auto& shape = net.output_shape(static_cast<std::size_t>(unit.layer_index));
    const std::size_t plane = shape[1] * shape[2];
    return {static_cast<std::size_t>(unit.unit_index) * plane,
            (static_cast<std::size_t>(unit.unit_index) + 1) * plane};
}

void zero_rows(Tensor& w, std::size_t row_begin, std::size_t row_end, int layer_index,
               const std::string& name, UndoRecord& undo) {
    const std::size_t cols = w.dim(1);
    for (std::size_t r = row_begin; r < row_end; ++r)
        for (std::size_t c = 0; c < cols; ++c) {
            const std::size_t idx = r * cols + c;
            if (w[idx] != 0.0) {
                undo.entries.push_back({layer_index, name, idx, w[idx]});
                w[idx] = 0.0;
            }
        }
}

}  // namespace

UndoRecord zero_unit_outgoing(Network& net, UnitId unit) {
    if (!net.is_valid_unit(unit))
        throw InvalidUnitError("not a prunable unit: layer " + std::to_string(unit.layer_index) +
                               ", index " + std::to_string(unit.unit_index));
    UndoRecord undo;

    // Next parameterized layer, skipping ReLU/Flatten.
    std::size_t j = static_cast<std::size_t>(unit.layer_index) + 1;
    while (j < net.layer_count() && (net.layer(j).spec.kind == LayerKind::ReLU ||
                                     net.layer(j).spec.kind == LayerKind::Flatten))
        ++j;
    Layer& consumer = net.layer(j);
    const int ci = static_cast<int>(j);

    switch (consumer.spec.kind) {
        case LayerKind::Dense: {
            auto [r0, r1] = outgoing_rows(net, unit);
            zero_rows(consumer.params.at("w"), r0, r1, ci, "w", undo);
            break;
        }
        case LayerKind::HeadGroup: {
            auto [r0, r1] = outgoing_rows(net, unit);
            for (const auto& [id, out] : consumer.spec.as_heads().heads)
                zero_rows(consumer.params.at("w:" + id), r0, r1, ci, "w:" + id, undo);
            break;
        }
        case LayerKind::Conv2D: {
            const auto& c = consumer.spec.as_conv();
            Tensor& w = consumer.params.at("w");
            const std::size_t ic = static_cast<std::size_t>(unit.unit_index);
            const std::size_t ksz = c.kernel_h * c.kernel_w;
            for (std::size_t oc = 0; oc < c.out_channels; ++oc)
                for (std::size_t k = 0; k < ksz; ++k) {
                    const std::size_t idx = (oc * c.in_channels + ic) * ksz + k;
                    if (w[idx] != 0.0) {
                        undo.entries.push_back({ci, "w", idx, w[idx]});
                        w[idx] = 0.0;
                    }
                }
            break;
        }
        default:
            throw InvalidUnitError("unit has no parameterized consumer layer");
    }
    net.bump_param_version();
    return undo;
}

void restore_units(Network& net, UndoRecord& undo) {
    if (undo.restored) throw AlreadyRestoredError("undo record was already restored");
    for (const auto& e : undo.entries)
        net.param(e.layer_index, e.param)[e.flat_index] = e.old_value;
    undo.restored = true;
    if (!undo.entries.empty()) net.bump_param_version();
}

}  // namespace tbe
