#include <benchmark/benchmark.h>

#include <msc/cache.hpp>
#include <msc/mediator.hpp>
#include <msc/null_calibration.hpp>
#include <msc/qk_twist.hpp>
#include <msc/rng.hpp>
#include <msc/safety.hpp>
#include <msc/subspace.hpp>
#include <msc/synthetic.hpp>
#include <msc/task_model.hpp>

#include <cmath>
#include <memory>
#include <vector>

using namespace msc;

static void BM_PrincipalAngles(benchmark::State& st) {
    const int d = static_cast<int>(st.range(0)), k = static_cast<int>(st.range(1));
    const Subspace a = haar_sample(d, k, 1), b = haar_sample(d, k, 2);
    for (auto _ : st) benchmark::DoNotOptimize(principal_angles(a, b).mean_angle);
}
BENCHMARK(BM_PrincipalAngles)->Args({256, 4})->Args({2304, 4})->Args({2304, 16});

static void BM_HaarSample(benchmark::State& st) {
    const int d = static_cast<int>(st.range(0)), k = static_cast<int>(st.range(1));
    std::uint64_t j = 0;
    for (auto _ : st) benchmark::DoNotOptimize(haar_sample(d, k, mix(3, j++)));
}
BENCHMARK(BM_HaarSample)->Args({2304, 2})->Args({2304, 16});

// Draws per second of the Monte-Carlo angle null.
static void BM_MonteCarloNull(benchmark::State& st) {
    const int draws = 1000;
    for (auto _ : st) benchmark::DoNotOptimize(monte_carlo_null(2304, 4, 4, draws, 5).mean_angle.size());
    st.SetItemsProcessed(st.iterations() * draws);
}
BENCHMARK(BM_MonteCarloNull)->Unit(benchmark::kMillisecond);

class SuiteFixture : public benchmark::Fixture {
public:
    void SetUp(const benchmark::State&) override {
        if (model) return;
        SyntheticSuiteSpec spec;
        spec.n_heads = 1;
        spec.n_queries = 0;
        const auto cache = generate_synthetic_suite(spec);
        data = load_dataset(cache);
        means = cache.get("doy_means").to_matrix();
        heads = load_heads(cache);
        model = std::make_unique<SyntheticMediatorModel>(SyntheticMediatorModel::from_cache(cache));
    }

    Dataset data;
    Eigen::MatrixXd means;
    std::vector<HeadTensors> heads;
    std::unique_ptr<SyntheticMediatorModel> model;
};

BENCHMARK_DEFINE_F(SuiteFixture, DasFit)(benchmark::State& st) {
    DasConfig cfg;
    cfg.steps = static_cast<int>(st.range(0));
    for (auto _ : st) benchmark::DoNotOptimize(das_fit(*model, data.X, data.labels, cfg).final_objective);
    st.SetItemsProcessed(st.iterations() * cfg.steps);
}
BENCHMARK_REGISTER_F(SuiteFixture, DasFit)->Arg(200)->Unit(benchmark::kMillisecond);

BENCHMARK_DEFINE_F(SuiteFixture, OffsetProfile)(benchmark::State& st) {
    for (auto _ : st) benchmark::DoNotOptimize(offset_profile(means, heads.front()).c_star);
}
BENCHMARK_REGISTER_F(SuiteFixture, OffsetProfile)->Unit(benchmark::kMicrosecond);

BENCHMARK_DEFINE_F(SuiteFixture, ProfileFromMatrix)(benchmark::State& st) {
    const Eigen::MatrixXd M = qk_matrix(means, heads.front());
    for (auto _ : st) benchmark::DoNotOptimize(profile_from_matrix(M).peak_z);
}
BENCHMARK_REGISTER_F(SuiteFixture, ProfileFromMatrix)->Unit(benchmark::kMicrosecond);

static void BM_Ksg(benchmark::State& st) {
    const auto n = static_cast<std::size_t>(st.range(0));
    Rng rng(9);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = rng.normal();
        b[i] = 0.9 * a[i] + std::sqrt(1 - 0.81) * rng.normal();
    }
    for (auto _ : st) benchmark::DoNotOptimize(ksg_mutual_information(a, b, 3).mi_nats);
    st.SetComplexityN(st.range(0));
}
BENCHMARK(BM_Ksg)->RangeMultiplier(4)->Range(500, 32000)->Complexity()->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
