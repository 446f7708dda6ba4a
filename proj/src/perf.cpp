#include "lstmq/perf.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

namespace lstmq {

namespace {

std::uint64_t u64(int v) { return static_cast<std::uint64_t>(v); }

std::uint64_t row_cycles(int hidden, int padded_input) {
    return std::max(u64(padded_input), u64(hidden) + 1);
}

}  // namespace

std::uint64_t mac_ops_per_layer(int hidden, int padded_input) {
    return 4 * u64(hidden) * (u64(padded_input) + u64(hidden) + 1);
}

std::uint64_t ewise_ops_per_layer(int hidden) { return 4 * u64(hidden); }

std::uint64_t ops_per_layer(int hidden, int padded_input) {
    return mac_ops_per_layer(hidden, padded_input) + ewise_ops_per_layer(hidden);
}

std::uint64_t total_ops(int hidden, int padded_input, int layers, int timesteps) {
    return ops_per_layer(hidden, padded_input) * u64(layers) * u64(timesteps);
}

std::uint64_t cycles_per_layer_step(int hidden, int padded_input, std::uint64_t latency) {
    return 2 * (u64(hidden) * row_cycles(hidden, padded_input) + latency) +
           (u64(hidden) + latency);
}

PerfCounters analytic_counters(int hidden, int padded_input, int layers, int timesteps,
                               std::uint64_t latency) {
    const std::uint64_t h = u64(hidden);
    const std::uint64_t cols = u64(padded_input) + h + 1;
    const std::uint64_t m_row = row_cycles(hidden, padded_input);
    const std::uint64_t steps = u64(layers) * u64(timesteps);

    const std::uint64_t weight_beats = (h * cols + 1) / 2;  // per gate

    PerfCounters c;
    c.cycles_stage1 = steps * (h * m_row + latency);
    c.cycles_stage2 = c.cycles_stage1;
    c.cycles_stage3 = steps * (h + latency);
    c.mac_ops = steps * mac_ops_per_layer(hidden, padded_input);
    c.ewise_ops = steps * ewise_ops_per_layer(hidden);
    c.bytes_in[0] = steps * 2 * weight_beats * 4;  // two gate stages per step
    c.bytes_in[1] = c.bytes_in[0];
    c.bytes_in[2] = steps * (2 * m_row * 4 + ((h + 1) / 2) * 4);
    c.bytes_out[3] = steps * h * 4;
    c.stage12_bytes_in = steps * 2 * (2 * weight_beats * 4 + m_row * 4);
    c.stage3_bytes_in = steps * ((h + 1) / 2) * 4;
    c.stage3_bytes_out = steps * h * 4;
    c.layer_steps = steps;
    c.timesteps = u64(timesteps);
    return c;
}

PerfReport timing_model(const EngineConfig& cfg, const PerfCounters& counters) {
    if (counters.total_cycles() == 0) throw std::invalid_argument("timing_model: zero cycles");

    PerfReport r;
    r.hidden = cfg.hidden;
    r.padded_input = cfg.padded_input;
    r.clock_hz = cfg.clock_hz;
    r.mac_ops_layer = mac_ops_per_layer(cfg.hidden, cfg.padded_input);
    r.ewise_ops_layer = ewise_ops_per_layer(cfg.hidden);
    r.ops_layer = ops_per_layer(cfg.hidden, cfg.padded_input);
    r.total_mac_ops = counters.mac_ops;
    r.total_ewise_ops = counters.ewise_ops;
    r.total_proj_ops = counters.proj_ops;
    r.total_ops_count = counters.mac_ops + counters.ewise_ops;
    r.modeled_cycles = counters.total_cycles();
    r.modeled_time_s = static_cast<double>(r.modeled_cycles) / static_cast<double>(cfg.clock_hz);
    r.throughput_ops_s = static_cast<double>(r.total_ops_count) / r.modeled_time_s;
    r.port_ceiling_bps = static_cast<double>(cfg.port_count) * 4.0 * static_cast<double>(cfg.clock_hz);

    auto rate = [&](std::uint64_t bytes, std::uint64_t cycles) {
        if (cycles == 0 || bytes == 0) return 0.0;
        return static_cast<double>(bytes) / (static_cast<double>(cycles) / static_cast<double>(cfg.clock_hz));
    };
    const std::uint64_t c12 = counters.cycles_stage1 + counters.cycles_stage2;
    r.peak_bw_in_bps = std::max({rate(counters.stage12_bytes_in, c12),
                                 rate(counters.stage3_bytes_in, counters.cycles_stage3),
                                 rate(counters.proj_bytes_in, counters.cycles_projection)});
    r.peak_bw_out_bps = std::max(rate(counters.stage3_bytes_out, counters.cycles_stage3),
                                 rate(counters.proj_bytes_out, counters.cycles_projection));

    r.cycles_stage1 = counters.cycles_stage1;
    r.cycles_stage2 = counters.cycles_stage2;
    r.cycles_stage3 = counters.cycles_stage3;
    r.cycles_projection = counters.cycles_projection;
    r.stage12_bytes_in = counters.stage12_bytes_in;
    r.stage3_bytes_in = counters.stage3_bytes_in;
    r.stage3_bytes_out = counters.stage3_bytes_out;
    r.proj_bytes_in = counters.proj_bytes_in;
    r.proj_bytes_out = counters.proj_bytes_out;
    r.layer_steps = counters.layer_steps;
    r.timesteps = counters.timesteps;
    return r;
}

PerfReport analytic_report(int hidden, int padded_input, int layers, int timesteps,
                           std::uint64_t clock_hz, std::uint64_t latency) {
    EngineConfig cfg;
    cfg.hidden = hidden;
    cfg.padded_input = padded_input;
    cfg.clock_hz = clock_hz;
    cfg.pipeline_latency = latency;
    return timing_model(cfg, analytic_counters(hidden, padded_input, layers, timesteps, latency));
}

void print_report(std::ostream& os, const PerfReport& r) {
    os << "hidden " << r.hidden << "  padded input " << r.padded_input << "  clock "
       << r.clock_hz << " Hz\n";
    os << "ops/layer          " << r.ops_layer << "  (mac " << r.mac_ops_layer << " + ewise "
       << r.ewise_ops_layer << ")\n";
    os << "total ops          " << r.total_ops_count;
    if (r.total_proj_ops != 0) os << "  (+ projection " << r.total_proj_ops << ")";
    os << "\n";
    os << "modeled cycles     " << r.modeled_cycles << "\n";
    os << "modeled time       " << r.modeled_time_s << " s\n";
    os << "throughput         " << r.throughput_ops_s / 1e6 << " M-ops/s (modeled, ideal)\n";
    os << "                   " << r.measured_ops_s / 1e6
       << " M-ops/s measured on the hardware platform; the gap is host overhead the model excludes\n";
    os << "peak bandwidth in  " << r.peak_bw_in_bps / 1e9 << " GB/s\n";
    os << "peak bandwidth out " << r.peak_bw_out_bps / 1e9 << " GB/s\n";
    os << "port ceiling       " << r.port_ceiling_bps / 1e9
       << " GB/s per direction (4 ports x 32 bit)\n";
    os << "                   " << r.reported_peak_bw_bps / 1e9
       << " GB/s peak reported for the hardware platform, for comparison\n";
}

}  // namespace lstmq
