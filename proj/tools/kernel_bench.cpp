// Times the OpenMP row-parallel kernels against the serial references and
// checks that both produce identical bits. Row order inside a MAC never
// changes, so thread count must not change a single output value.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "lstmq/lstm.hpp"
#include "lstmq/pwl.hpp"
#include "lstmq/rng.hpp"

using namespace lstmq;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

GateParams random_gate(SplitMix64& rng, int hidden, int padded) {
    GateParams g;
    g.activation = Nonlin::Sigmoid;
    g.w_combined = QMatrix(hidden, padded + hidden + 1);
    for (auto& q : g.w_combined.data) q = encode(rng.next_range(-0.5, 0.5));
    return g;
}

}  // namespace

int main(int argc, char** argv) {
    bool quick = argc > 1 && std::strcmp(argv[1], "--quick") == 0;
    // 256 sits above the parallel grain, so even quick mode checks the
    // OpenMP path against the serial one
    std::vector<int> sizes = quick ? std::vector<int>{128, 256} : std::vector<int>{128, 256, 512, 1024};
    const int reps = quick ? 3 : 20;

#ifdef _OPENMP
    std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
    std::printf("openmp: not enabled, parallel path runs serial\n");
#endif
    std::printf("%8s %14s %14s %10s %8s\n", "H", "serial ms", "parallel ms", "speedup", "match");

    PwlTables tables = build_tables();
    SplitMix64 rng(2024);
    bool all_match = true;
    for (int h : sizes) {
        GateParams g = random_gate(rng, h, h);
        std::vector<Q88> x(static_cast<std::size_t>(h));
        std::vector<Q88> hp(static_cast<std::size_t>(h));
        for (auto& q : x) q = encode(rng.next_range(-1.0, 1.0));
        for (auto& q : hp) q = encode(rng.next_range(-1.0, 1.0));

        auto ser = serial::gate_eval(g, x, hp, tables.sigmoid_t);
        auto par = gate_eval(g, x, hp, tables.sigmoid_t);
        bool match = ser == par;
        all_match = all_match && match;

        double ts = time_ms([&] { serial::gate_eval(g, x, hp, tables.sigmoid_t); }, reps);
        double tp = time_ms([&] { gate_eval(g, x, hp, tables.sigmoid_t); }, reps);
        std::printf("%8d %14.4f %14.4f %9.2fx %8s\n", h, ts, tp, ts / tp,
                    match ? "yes" : "NO");
    }

    // element-wise stage at a large H to give the parallel loop some work
    {
        int h = quick ? 4096 : 1 << 20;
        std::vector<Q88> i(h), f(h), o(h), ct(h), cp(h);
        for (auto* v : {&i, &f, &o, &ct, &cp}) {
            for (auto& q : *v) q = encode(rng.next_range(-1.0, 1.0));
        }
        auto ser = serial::ewise_stage(i, f, o, ct, cp, tables.tanh_t);
        auto par = ewise_stage(i, f, o, ct, cp, tables.tanh_t);
        bool match = ser == par;
        all_match = all_match && match;
        double ts = time_ms([&] { serial::ewise_stage(i, f, o, ct, cp, tables.tanh_t); }, reps);
        double tp = time_ms([&] { ewise_stage(i, f, o, ct, cp, tables.tanh_t); }, reps);
        std::printf("%7dE %14.4f %14.4f %9.2fx %8s\n", h, ts, tp, ts / tp,
                    match ? "yes" : "NO");
    }

    if (!all_match) {
        std::fprintf(stderr, "serial and parallel kernels disagree\n");
        return 1;
    }
    return 0;
}
