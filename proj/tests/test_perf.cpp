#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "lstmq/perf.hpp"
#include "testgen.hpp"

using namespace lstmq;

TEST_CASE("mac op counts") {
    CHECK(mac_ops_per_layer(1, 1) == 12);     // 4 gates x 1 row x 3 columns
    CHECK(mac_ops_per_layer(2, 3) == 48);     // 4 x 2 x (3+2+1)
    CHECK(mac_ops_per_layer(128, 128) == 131584);
}

TEST_CASE("headline ops include the element-wise stage") {
    CHECK(ewise_ops_per_layer(128) == 512);
    CHECK(ops_per_layer(128, 128) == 132096);  // 132.1 K-ops
    CHECK(total_ops(128, 128, 2, 1000) == 264192000);  // 264.4 M-ops headline
    CHECK(total_ops(128, 128, 1, 1) == ops_per_layer(128, 128));
    CHECK(total_ops(128, 128, 3, 10) == 30 * ops_per_layer(128, 128));
}

TEST_CASE("headline figures stay within 0.25% of the platform-quoted values") {
    CHECK(std::abs(static_cast<double>(ops_per_layer(128, 128)) - 132.1e3) / 132.1e3 < 0.0025);
    CHECK(std::abs(static_cast<double>(total_ops(128, 128, 2, 1000)) - 264.4e6) / 264.4e6 < 0.0025);
}

TEST_CASE("report identities") {
    PerfReport r = analytic_report(128, 128, 2, 1000, kDefaultClockHz, 16);
    CHECK(r.modeled_time_s == doctest::Approx(static_cast<double>(r.modeled_cycles) /
                                              static_cast<double>(kDefaultClockHz)));
    CHECK(r.throughput_ops_s ==
          doctest::Approx(static_cast<double>(r.total_ops_count) / r.modeled_time_s));
    CHECK(r.total_ops_count == 264192000);
    CHECK(r.modeled_cycles == 2000ull * cycles_per_layer_step(128, 128, 16));
}

TEST_CASE("doubling the clock halves modeled time") {
    PerfReport a = analytic_report(128, 128, 2, 100, kDefaultClockHz, 16);
    PerfReport b = analytic_report(128, 128, 2, 100, 2 * kDefaultClockHz, 16);
    CHECK(b.modeled_time_s == doctest::Approx(a.modeled_time_s / 2));
    CHECK(b.throughput_ops_s == doctest::Approx(2 * a.throughput_ops_s));
}

TEST_CASE("bandwidth stays under the port ceiling") {
    PerfReport r = analytic_report(128, 128, 2, 1000, kDefaultClockHz, 16);
    CHECK(r.port_ceiling_bps == doctest::Approx(4.0 * 4.0 * 142e6));  // 2.272 GB/s
    CHECK(r.peak_bw_in_bps <= r.port_ceiling_bps);
    CHECK(r.peak_bw_out_bps <= r.port_ceiling_bps);
    CHECK(r.peak_bw_in_bps > 0.0);
}

TEST_CASE("modeled throughput bounds the measured figure from below") {
    PerfReport r = analytic_report(128, 128, 2, 1000, kDefaultClockHz, 16);
    CHECK(r.throughput_ops_s >= kZynqMeasuredOpsPerSec);
    CHECK(r.throughput_ops_s <= 2.0 * kZynqMeasuredOpsPerSec);
}

TEST_CASE("timing_model rejects zero cycles") {
    EngineConfig cfg;
    cfg.hidden = 4;
    cfg.padded_input = 4;
    CHECK_THROWS_AS(timing_model(cfg, PerfCounters{}), std::invalid_argument);
}

TEST_CASE("analytic counters equal an instrumented engine run") {
    SplitMix64 rng(73);
    LayerParams lp = testgen::random_layer(rng, 65, 128);
    PackedLayer packed = pack_weights(lp);
    EngineConfig cfg;
    cfg.hidden = 128;
    cfg.padded_input = lp.padded_input;
    Engine engine(cfg);
    LstmState st(128);
    for (int t = 0; t < 2; ++t) {
        engine.run_timestep(packed, testgen::random_q88_vector(rng, 65), st);
    }
    PerfCounters expect = analytic_counters(128, lp.padded_input, 1, 2, cfg.pipeline_latency);
    expect.timesteps = 0;
    CHECK(engine.counters() == expect);
    CHECK(engine.counters().mac_ops == 2 * mac_ops_per_layer(128, lp.padded_input));
}
