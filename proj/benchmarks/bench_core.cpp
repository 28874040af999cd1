#include <benchmark/benchmark.h>

#include "tbe/lrp.hpp"
#include "tbe/network.hpp"
#include "tbe/optim.hpp"

namespace {

tbe::Network make_net() {
    std::vector<tbe::LayerSpec> layers;
    layers.push_back(tbe::LayerSpec::dense(784, 400));
    layers.push_back(tbe::LayerSpec::relu());
    layers.push_back(tbe::LayerSpec::dense(400, 400));
    layers.push_back(tbe::LayerSpec::relu());
    layers.push_back(tbe::LayerSpec::head_group(400, {{"task0", 2}}));
    tbe::Network net({784}, std::move(layers));
    tbe::Rng rng(42);
    net.init_params(rng);
    return net;
}

tbe::Tensor make_batch(std::size_t n) {
    tbe::Tensor x({n, 784});
    tbe::Rng rng(7);
    for (std::size_t i = 0; i < x.size(); ++i) x.data()[i] = rng.next_double();
    return x;
}

void BM_Forward(benchmark::State& state) {
    const auto net = make_net();
    const auto x = make_batch(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) {
        auto y = tbe::forward(net, x, "task0");
        benchmark::DoNotOptimize(y.data());
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Backward(benchmark::State& state) {
    const auto net = make_net();
    const auto x = make_batch(static_cast<std::size_t>(state.range(0)));
    tbe::ForwardTrace trace;
    auto y = tbe::forward(net, x, "task0", &trace);
    tbe::Tensor g(y.shape(), 1.0);
    for (auto _ : state) {
        auto grads = tbe::backward(net, trace, g);
        benchmark::DoNotOptimize(grads.by_param);
    }
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_Attribute(benchmark::State& state) {
    const auto net = make_net();
    const auto batch = make_batch(1);
    tbe::Tensor x({784});
    std::copy_n(batch.data(), 784, x.data());
    tbe::RuleConfig rules;
    for (auto _ : state) {
        auto map = tbe::attribute(net, x, "task0", 0, rules);
        benchmark::DoNotOptimize(map.input_relevance.data());
    }
    state.SetItemsProcessed(state.iterations());
}

}  // namespace

BENCHMARK(BM_Forward)->Arg(1)->Arg(128);
BENCHMARK(BM_Backward)->Arg(1)->Arg(128);
BENCHMARK(BM_Attribute);

BENCHMARK_MAIN();
