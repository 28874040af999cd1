#include "tbe/lrp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace tbe {

namespace {

double signed_stabilizer(double z, double epsilon) {
    // sign(0) = +1 so the stabilizer never shrinks the denominator.
    return z + (z < 0.0 ? -epsilon : epsilon);
}

}  // namespace

Tensor init_relevance(const Tensor& logits, std::size_t target_class) {
    if (target_class >= logits.size())
        throw Error("target class " + std::to_string(target_class) + " out of range for " +
                    std::to_string(logits.size()) + " logits");
    Tensor r(logits.shape());
    r[target_class] = logits[target_class];
    return r;
}

Tensor lrp_epsilon_dense(const Tensor& a, const Tensor& w, const Tensor& z,
                         const Tensor& r_upper, double epsilon) {
    const std::size_t in = a.size(), out = z.size();
    if (w.size() != in * out || r_upper.size() != out)
        throw ShapeError("lrp_epsilon_dense: inconsistent shapes");
    std::vector<double> factor(out);
    for (std::size_t k = 0; k < out; ++k) {
        const double denom = signed_stabilizer(z[k], epsilon);
        if (denom == 0.0)
            throw DegenerateDenominatorError(
                "epsilon rule: zero denominator at output " + std::to_string(k) +
                " with epsilon = 0");
        factor[k] = r_upper[k] / denom;
    }
    Tensor r_lower(a.shape());
    for (std::size_t j = 0; j < in; ++j) {
        double acc = 0.0;
        const double* wj = w.data() + j * out;
        for (std::size_t k = 0; k < out; ++k) acc += wj[k] * factor[k];
        r_lower[j] = a[j] * acc;
    }
    return r_lower;
}

Tensor lrp_zplus_dense(const Tensor& a, const Tensor& w, const Tensor& r_upper,
                       std::size_t* dropped) {
    const std::size_t in = a.size(), out = r_upper.size();
    if (w.size() != in * out) throw ShapeError("lrp_zplus_dense: inconsistent shapes");
    std::vector<double> zp(out, 0.0);
    for (std::size_t j = 0; j < in; ++j) {
        const double* wj = w.data() + j * out;
        for (std::size_t k = 0; k < out; ++k)
            if (wj[k] > 0.0) zp[k] += a[j] * wj[k];
    }
    std::vector<double> factor(out, 0.0);
    for (std::size_t k = 0; k < out; ++k) {
        if (zp[k] == 0.0) {
            if (dropped && r_upper[k] != 0.0) ++*dropped;
        } else {
            factor[k] = r_upper[k] / zp[k];
        }
    }
    Tensor r_lower(a.shape());
    for (std::size_t j = 0; j < in; ++j) {
        double acc = 0.0;
        const double* wj = w.data() + j * out;
        for (std::size_t k = 0; k < out; ++k)
            if (wj[k] > 0.0) acc += wj[k] * factor[k];
        r_lower[j] = a[j] * acc;
    }
    return r_lower;
}

namespace {

// Shared receptive-field walk for the conv rules. For every output position
// the callback receives the contributing input/weight index pairs.
template <typename PerOutput>
void conv_fields(const Conv2DSpec& c, const std::vector<std::size_t>& in_shape,
                 const std::vector<std::size_t>& out_shape, PerOutput&& per_output) {
    const std::size_t C = in_shape[0], H = in_shape[1], W = in_shape[2];
    const std::size_t OC = out_shape[0], OH = out_shape[1], OW = out_shape[2];
    std::vector<std::pair<std::size_t, std::size_t>> field;
    for (std::size_t oc = 0; oc < OC; ++oc)
        for (std::size_t oy = 0; oy < OH; ++oy)
            for (std::size_t ox = 0; ox < OW; ++ox) {
                field.clear();
                for (std::size_t ic = 0; ic < C; ++ic)
                    for (std::size_t ky = 0; ky < c.kernel_h; ++ky) {
                        const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * c.stride + ky) -
                                                  static_cast<std::ptrdiff_t>(c.padding);
                        if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(H)) continue;
                        for (std::size_t kx = 0; kx < c.kernel_w; ++kx) {
                            const std::ptrdiff_t ix =
                                static_cast<std::ptrdiff_t>(ox * c.stride + kx) -
                                static_cast<std::ptrdiff_t>(c.padding);
                            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(W)) continue;
                            field.emplace_back(
                                (ic * H + static_cast<std::size_t>(iy)) * W +
                                    static_cast<std::size_t>(ix),
                                ((oc * C + ic) * c.kernel_h + ky) * c.kernel_w + kx);
                        }
                    }
                per_output((oc * OH + oy) * OW + ox, oc, field);
            }
}

}  // namespace

Tensor lrp_zplus_conv(const Conv2DSpec& c, const Tensor& a, const Tensor& w,
                      const Tensor& r_upper, std::size_t* dropped) {
    const std::vector<std::size_t> in_shape(a.shape());
    const std::vector<std::size_t> out_shape(r_upper.shape());
    Tensor r_lower(a.shape());
    conv_fields(c, in_shape, out_shape,
                [&](std::size_t out_idx, std::size_t, const auto& field) {
                    const double rk = r_upper[out_idx];
                    double zp = 0.0;
                    for (const auto& [ai, wi] : field)
                        if (w[wi] > 0.0) zp += a[ai] * w[wi];
                    if (zp == 0.0) {
                        if (dropped && rk != 0.0) ++*dropped;
                        return;
                    }
                    const double f = rk / zp;
                    for (const auto& [ai, wi] : field)
                        if (w[wi] > 0.0) r_lower[ai] += a[ai] * w[wi] * f;
                });
    return r_lower;
}

Tensor lrp_epsilon_conv(const Conv2DSpec& c, const Tensor& a, const Tensor& w, const Tensor& b,
                        const Tensor& r_upper, double epsilon) {
    const std::vector<std::size_t> in_shape(a.shape());
    const std::vector<std::size_t> out_shape(r_upper.shape());
    Tensor r_lower(a.shape());
    conv_fields(c, in_shape, out_shape,
                [&](std::size_t out_idx, std::size_t oc, const auto& field) {
                    double z = b[oc];
                    for (const auto& [ai, wi] : field) z += a[ai] * w[wi];
                    const double denom = signed_stabilizer(z, epsilon);
                    if (denom == 0.0)
                        throw DegenerateDenominatorError(
                            "epsilon rule: zero denominator at conv output " +
                            std::to_string(out_idx) + " with epsilon = 0");
                    const double f = r_upper[out_idx] / denom;
                    for (const auto& [ai, wi] : field) r_lower[ai] += a[ai] * w[wi] * f;
                });
    return r_lower;
}

RelevanceMap attribute(const Network& net, const Tensor& x, const std::string& head,
                       std::size_t target_class, const RuleConfig& rules) {
    if (x.shape() != net.input_shape())
        throw ShapeError("attribute expects a single sample of shape " +
                         shape_str(net.input_shape()) + ", got " + shape_str(x.shape()));

    std::vector<std::size_t> batched{1};
    batched.insert(batched.end(), x.shape().begin(), x.shape().end());
    ForwardTrace trace;
    const Tensor logits = forward(net, x.reshaped(batched), head, &trace);

    RelevanceMap map;
    map.layer_relevance.resize(net.layer_count());

    // Strip the batch dimension from a traced layer output.
    auto sample = [&](std::size_t layer) {
        return trace.outputs[layer].reshaped(net.output_shape(layer));
    };
    auto layer_input = [&](std::size_t layer) {
        return layer == 0 ? x : sample(layer - 1);
    };

    Tensor r = init_relevance(logits.reshaped({net.head_out_dim(head)}), target_class);
    map.layer_relevance[net.layer_count() - 1] = r;

    for (std::size_t i = net.layer_count(); i-- > 0;) {
        const Layer& l = net.layer(i);
        const Tensor a = layer_input(i);
        Tensor r_lower;
        switch (l.spec.kind) {
            case LayerKind::HeadGroup: {
                const Tensor& w = l.params.at("w:" + head);
                if (rules.dense_rule == LrpRule::Epsilon) {
                    // output_shape() is head-independent; use the routed logits.
                    r_lower = lrp_epsilon_dense(
                        a, w, logits.reshaped({net.head_out_dim(head)}), r, rules.epsilon);
                } else {
                    r_lower = lrp_zplus_dense(a, w, r, &map.dropped_outputs);
                }
                break;
            }
            case LayerKind::Dense: {
                const Tensor& w = l.params.at("w");
                if (rules.dense_rule == LrpRule::Epsilon) {
                    r_lower = lrp_epsilon_dense(a, w, sample(i), r, rules.epsilon);
                } else {
                    r_lower = lrp_zplus_dense(a, w, r, &map.dropped_outputs);
                }
                break;
            }
            case LayerKind::Conv2D: {
                const auto& c = l.spec.as_conv();
                if (rules.conv_rule == LrpRule::ZPlus) {
                    r_lower = lrp_zplus_conv(c, a, l.params.at("w"), r, &map.dropped_outputs);
                } else {
                    r_lower =
                        lrp_epsilon_conv(c, a, l.params.at("w"), l.params.at("b"), r,
                                         rules.epsilon);
                }
                break;
            }
            case LayerKind::ReLU:
                r_lower = r;  // relevance follows the recorded activation pattern
                break;
            case LayerKind::Flatten:
                r_lower = r.reshaped(a.shape());
                break;
        }
        if (i > 0) map.layer_relevance[i - 1] = r_lower;
        r = std::move(r_lower);
    }
    map.input_relevance = std::move(r);
    return map;
}

RelevanceReport unit_importance(const Network& net, const Tensor& ref_images,
                                const std::vector<int>& ref_labels, const std::string& head,
                                const RuleConfig& rules, int task_index) {
    if (ref_images.empty() || ref_labels.empty())
        throw Error("unit_importance: empty reference set");
    const std::size_t n = ref_images.dim(0);
    if (n != ref_labels.size())
        throw ShapeError("unit_importance: image/label count mismatch");

    RelevanceReport report;
    report.task_index = task_index;
    report.reference_sample_count = n;
    report.rules = rules;
    for (UnitId u : net.units()) report.scores[u] = 0.0;

    const std::size_t sample_sz = ref_images.size() / n;
    for (std::size_t s = 0; s < n; ++s) {
        Tensor x(net.input_shape());
        std::copy_n(ref_images.data() + s * sample_sz, sample_sz, x.data());

        std::size_t target = static_cast<std::size_t>(ref_labels[s]);
        if (!rules.seed_true_class) {
            std::vector<std::size_t> b{1};
            b.insert(b.end(), x.shape().begin(), x.shape().end());
            const Tensor logits = forward(net, x.reshaped(b), head);
            target = static_cast<std::size_t>(
                std::max_element(logits.data(), logits.data() + logits.size()) - logits.data());
        }

        const RelevanceMap map = attribute(net, x, head, target, rules);
        for (auto& [u, score] : report.scores) {
            const Tensor& lr = map.layer_relevance[static_cast<std::size_t>(u.layer_index)];
            const auto& shape = net.output_shape(static_cast<std::size_t>(u.layer_index));
            const std::size_t plane = shape.size() == 3 ? shape[1] * shape[2] : 1;
            const std::size_t base = static_cast<std::size_t>(u.unit_index) * plane;
            for (std::size_t p = 0; p < plane; ++p) {
                const double rv = lr[base + p];
                score += rules.positive_only ? std::max(rv, 0.0) : rv;
            }
        }
    }
    return report;
}

void write_heatmap_ppm(const Tensor& relevance, std::size_t height, std::size_t width,
                       const std::string& path) {
    if (relevance.size() != height * width)
        throw ShapeError("heatmap: relevance size does not match " + std::to_string(height) +
                         "x" + std::to_string(width));
    double maxabs = 0.0;
    for (double v : relevance.values()) maxabs = std::max(maxabs, std::fabs(v));

    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "P3\n" << width << " " << height << "\n255\n";
    for (std::size_t i = 0; i < height * width; ++i) {
        const double v = maxabs > 0.0 ? relevance[i] / maxabs : 0.0;
        int rr = 255, gg = 255, bb = 255;
        if (v >= 0.0) {
            gg = bb = static_cast<int>(std::lround(255.0 * (1.0 - v)));
        } else {
            rr = gg = static_cast<int>(std::lround(255.0 * (1.0 + v)));
        }
        out << rr << " " << gg << " " << bb << (i % width + 1 == width ? "\n" : " ");
    }
}

void write_relevance_csv(const Tensor& relevance, std::size_t height, std::size_t width,
                         const std::string& path) {
    if (relevance.size() != height * width)
        throw ShapeError("relevance csv: size does not match grid");
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out.precision(17);
    for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x)
            out << relevance[y * width + x] << (x + 1 == width ? "\n" : ",");
    }
}

}  // namespace tbe
