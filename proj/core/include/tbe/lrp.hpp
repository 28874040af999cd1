#pragma once

#include <map>
#include <string>
#include <vector>

#include "tbe/network.hpp"

namespace tbe {

enum class LrpRule { Epsilon, ZPlus };

struct RuleConfig {
    LrpRule dense_rule = LrpRule::Epsilon;
    LrpRule conv_rule = LrpRule::ZPlus;
    double epsilon = 1e-6;
    // Unit scores aggregate max(R, 0) by default; signed sum when false.
    bool positive_only = true;
    // Relevance is seeded at the true-class logit; predicted class when false.
    bool seed_true_class = true;
};

/// Per-layer relevance for one sample, shaped like each layer's output
/// activations (no batch dimension), plus the input-pixel relevance.
struct RelevanceMap {
    Tensor input_relevance;
    std::vector<Tensor> layer_relevance;
    // Outputs whose z+ denominator was zero while carrying relevance; their
    // relevance is dropped rather than redistributed.
    std::size_t dropped_outputs = 0;
};

/// Per-unit global importance over a reference dataset.
struct RelevanceReport {
    std::map<UnitId, double> scores;
    int task_index = 0;
    std::size_t reference_sample_count = 0;
    RuleConfig rules;
};

/// Relevance seeded at one logit: target entry keeps its value, rest are 0.
Tensor init_relevance(const Tensor& logits, std::size_t target_class);

/// LRP-epsilon for a dense mapping z = a*W + b. The denominator is the full
/// pre-activation (bias included) plus a signed stabilizer; relevance
/// proportional to the bias is absorbed.
Tensor lrp_epsilon_dense(const Tensor& a, const Tensor& w, const Tensor& z,
                         const Tensor& r_upper, double epsilon);

/// LRP-z+ for a dense mapping: only positive weight contributions, biases
/// ignored. Outputs with zero positive denominator drop their relevance.
Tensor lrp_zplus_dense(const Tensor& a, const Tensor& w, const Tensor& r_upper,
                       std::size_t* dropped = nullptr);

/// LRP-z+ applied per convolution receptive field.
Tensor lrp_zplus_conv(const Conv2DSpec& spec, const Tensor& a, const Tensor& w,
                      const Tensor& r_upper, std::size_t* dropped = nullptr);

/// LRP-epsilon applied per convolution receptive field (bias in denominator).
Tensor lrp_epsilon_conv(const Conv2DSpec& spec, const Tensor& a, const Tensor& w,
                        const Tensor& b, const Tensor& r_upper, double epsilon);

/// Full backward relevance pass for one sample (shape = network input shape,
/// no batch dimension), seeded at `target_class` of `head`.
RelevanceMap attribute(const Network& net, const Tensor& x, const std::string& head,
                       std::size_t target_class, const RuleConfig& rules);

/// Aggregated per-unit importance over labeled reference samples routed
/// through one task head. Labels are head-local.
RelevanceReport unit_importance(const Network& net, const Tensor& ref_images,
                                const std::vector<int>& ref_labels, const std::string& head,
                                const RuleConfig& rules, int task_index = 0);

/// Plain PPM (P3) heatmap: red = positive, blue = negative relevance,
/// symmetric normalization by max |R|.
void write_heatmap_ppm(const Tensor& relevance, std::size_t height, std::size_t width,
                       const std::string& path);

/// Raw relevance values as CSV, one row per image row.
void write_relevance_csv(const Tensor& relevance, std::size_t height, std::size_t width,
                         const std::string& path);

}  // namespace tbe
