#pragma once

#include <cstdint>
#include <iosfwd>

#include "lstmq/dataflow.hpp"

// Operations / bandwidth / timing accounting.
//
// Op convention: one MAC over the bias-folded combined matrix is one op,
// 4H(P+H+1) per layer timestep, plus the 4H element-wise ops (f*c, i*c~,
// the add, o*tanh). The sum is the headline ops/layer figure; projection
// ops are tracked separately and excluded from it. For H=P=128 this gives
// 132096 ops/layer and 264192000 for the 2-layer, 1000-step workload.

namespace lstmq {

// Reference figures measured on the Zynq 7020 platform, printed alongside
// the modeled numbers. The measured throughput includes host overhead the
// model excludes, so the modeled value upper-bounds it.
inline constexpr double kZynqMeasuredOpsPerSec = 388.8e6;
inline constexpr double kZynqReportedPeakBwBps = 1.236e9;
inline constexpr std::uint64_t kDefaultClockHz = 142'000'000;

std::uint64_t mac_ops_per_layer(int hidden, int padded_input);
std::uint64_t ewise_ops_per_layer(int hidden);
std::uint64_t ops_per_layer(int hidden, int padded_input);
std::uint64_t total_ops(int hidden, int padded_input, int layers, int timesteps);

// One layer timestep: two gate stages of H*max(P, H+1) cycles, one ewise
// stage of H cycles, plus the fixed latency per stage.
std::uint64_t cycles_per_layer_step(int hidden, int padded_input, std::uint64_t latency);

// Counters a fault-free engine run produces for this workload (no
// projection, no start delays). Must agree exactly with an instrumented
// run; tested both ways.
PerfCounters analytic_counters(int hidden, int padded_input, int layers, int timesteps,
                               std::uint64_t latency);

struct PerfReport {
    int hidden = 0;
    int padded_input = 0;
    std::uint64_t clock_hz = kDefaultClockHz;

    std::uint64_t mac_ops_layer = 0;
    std::uint64_t ewise_ops_layer = 0;
    std::uint64_t ops_layer = 0;  // headline: mac + ewise

    std::uint64_t total_mac_ops = 0;
    std::uint64_t total_ewise_ops = 0;
    std::uint64_t total_proj_ops = 0;
    std::uint64_t total_ops_count = 0;  // headline ops over the whole run

    std::uint64_t modeled_cycles = 0;
    double modeled_time_s = 0.0;
    double throughput_ops_s = 0.0;  // total_ops_count / modeled_time_s

    double peak_bw_in_bps = 0.0;   // max per-direction stream demand over stages
    double peak_bw_out_bps = 0.0;
    double port_ceiling_bps = 0.0;  // ports * 4 B * clock, per direction

    double measured_ops_s = kZynqMeasuredOpsPerSec;
    double reported_peak_bw_bps = kZynqReportedPeakBwBps;

    std::uint64_t cycles_stage1 = 0, cycles_stage2 = 0, cycles_stage3 = 0,
                  cycles_projection = 0;
    std::uint64_t stage12_bytes_in = 0, stage3_bytes_in = 0, stage3_bytes_out = 0,
                  proj_bytes_in = 0, proj_bytes_out = 0;
    std::uint64_t layer_steps = 0, timesteps = 0;
};

// Builds the report from a completed run's counters. Throws on zero total
// cycles.
PerfReport timing_model(const EngineConfig& cfg, const PerfCounters& counters);

// Purely analytic report for a layers x timesteps workload.
PerfReport analytic_report(int hidden, int padded_input, int layers, int timesteps,
                           std::uint64_t clock_hz, std::uint64_t latency);

void print_report(std::ostream& os, const PerfReport& r);

}  // namespace lstmq
