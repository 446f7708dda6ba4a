#include "lstmq/dataflow.hpp"

#include <algorithm>

namespace lstmq {

std::vector<Beat32> pack_values(std::span<const Q88> values) {
    std::vector<Beat32> beats((values.size() + 1) / 2);
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (k % 2 == 0) {
            beats[k / 2].lane_lo = values[k];
        } else {
            beats[k / 2].lane_hi = values[k];
        }
    }
    return beats;
}

std::vector<Beat32> pack_lane_pair(std::span<const Q88> lo, std::span<const Q88> hi,
                                   std::size_t len) {
    std::vector<Beat32> beats(len);
    for (std::size_t j = 0; j < len; ++j) {
        beats[j].lane_lo = j < lo.size() ? lo[j] : Q88{};
        beats[j].lane_hi = j < hi.size() ? hi[j] : Q88{};
    }
    return beats;
}

namespace {

PackedGate pack_gate(const GateParams& g) {
    PackedGate out;
    out.value_count = g.w_combined.data.size();
    out.beats = pack_values(g.w_combined.data);
    return out;
}

// Pops ceil(count/2) beats and rebuilds the value stream, dropping the
// final pad lane by count. Faults if the port holds the wrong beat count.
std::vector<Q88> unpack_stream(StreamPort& port, std::size_t count, std::uint64_t& bytes) {
    std::vector<Q88> values;
    values.reserve(count);
    while (values.size() < count) {
        Beat32 b = port.pop();
        bytes += 4;
        values.push_back(b.lane_lo);
        if (values.size() < count) values.push_back(b.lane_hi);
    }
    if (port.remaining() != 0) throw SimFault("stream packing fault: leftover beats");
    return values;
}

}  // namespace

PackedLayer pack_weights(const LayerParams& layer) {
    PackedLayer out;
    out.gate_i = pack_gate(layer.gate_i);
    out.gate_f = pack_gate(layer.gate_f);
    out.gate_o = pack_gate(layer.gate_o);
    out.gate_c = pack_gate(layer.gate_c);
    out.input_size = layer.input_size;
    out.padded_input = layer.padded_input;
    out.hidden = layer.hidden;
    return out;
}

PackedProjection pack_projection(const ProjectionParams& proj) {
    PackedProjection out;
    out.w.value_count = proj.w.data.size();
    out.w.beats = pack_values(proj.w.data);
    out.vocab = proj.w.rows;
    out.hidden = proj.w.cols - 1;
    return out;
}

Engine::Engine(EngineConfig cfg) : cfg_(cfg), tables_(build_tables()) {
    fifo_i_.set_capacity(static_cast<std::size_t>(cfg_.hidden));
    fifo_f_.set_capacity(static_cast<std::size_t>(cfg_.hidden));
    fifo_o_.set_capacity(static_cast<std::size_t>(cfg_.hidden));
    fifo_c_.set_capacity(static_cast<std::size_t>(cfg_.hidden));
}

void Engine::run_gate_stage(int stage_id, const PackedGate& gate_a, const PackedGate& gate_b,
                            const PwlTable& pwl_a, const PwlTable& pwl_b,
                            std::span<const Q88> x_pad, std::span<const Q88> h_prev,
                            StageFifo& fifo_a, StageFifo& fifo_b, int padded_input, int hidden) {
    const std::size_t p = static_cast<std::size_t>(padded_input);
    const std::size_t h = static_cast<std::size_t>(hidden);
    const std::size_t row_cols = p + h + 1;
    const std::size_t row_cycles = std::max(p, h + 1);
    const std::size_t expect = h * row_cols;
    if (gate_a.value_count != expect || gate_b.value_count != expect) {
        throw SimFault("weight image size does not match layer dims");
    }

    // h lane carries [h_prev | unity]; both lanes pad to the row length.
    std::vector<Q88> h_ext(h_prev.begin(), h_prev.end());
    h_ext.push_back(q88_one);

    ports_[0].load(gate_a.beats, cfg_.start_delay[0]);
    ports_[1].load(gate_b.beats, cfg_.start_delay[1]);
    ports_[2].load(pack_lane_pair(x_pad, h_ext, row_cycles), cfg_.start_delay[2]);

    SyncBlock sync;
    sync.arm({&ports_[0], &ports_[1], &ports_[2]});

    std::uint64_t stage_bytes = 0;
    std::vector<Q88> wa = unpack_stream(ports_[0], expect, stage_bytes);
    counters_.bytes_in[0] += stage_bytes;
    std::uint64_t b1 = 0;
    std::vector<Q88> wb = unpack_stream(ports_[1], expect, b1);
    counters_.bytes_in[1] += b1;
    stage_bytes += b1;

    // The vector stream moves once; the sync buffer replays it per row.
    std::vector<Q88> x_lane(row_cycles), h_lane(row_cycles);
    std::uint64_t b2 = 0;
    for (std::size_t j = 0; j < row_cycles; ++j) {
        Beat32 beat = ports_[2].pop();
        b2 += 4;
        x_lane[j] = beat.lane_lo;
        h_lane[j] = beat.lane_hi;
    }
    counters_.bytes_in[2] += b2;
    stage_bytes += b2;
    counters_.stage12_bytes_in += stage_bytes;

    GateUnit unit_a{.pwl = &pwl_a};
    GateUnit unit_b{.pwl = &pwl_b};
    std::uint64_t cycles = 0;
    std::uint64_t macs = 0;
    for (std::size_t r = 0; r < h; ++r) {
        const std::size_t base = r * row_cols;
        for (std::size_t j = 0; j < row_cycles; ++j, ++cycles) {
            // MAC over the x lane and the [h | 1] lane in lockstep; pad
            // cycles multiply zeros and are not counted as ops.
            if (j < p) {
                unit_a.mac_x = acc_add(unit_a.mac_x, mul(wa[base + j], x_lane[j]));
                unit_b.mac_x = acc_add(unit_b.mac_x, mul(wb[base + j], x_lane[j]));
                macs += 2;
            }
            if (j < h + 1) {
                unit_a.mac_h = acc_add(unit_a.mac_h, mul(wa[base + p + j], h_lane[j]));
                unit_b.mac_h = acc_add(unit_b.mac_h, mul(wb[base + p + j], h_lane[j]));
                macs += 2;
            }
        }
        fifo_a.push(unit_a.finish_row());
        fifo_b.push(unit_b.finish_row());
    }

    const std::uint64_t stage_cycles = sync.start_cycle + cycles + cfg_.pipeline_latency;
    if (stage_id == 1) {
        counters_.cycles_stage1 += stage_cycles;
    } else {
        counters_.cycles_stage2 += stage_cycles;
    }
    counters_.mac_ops += macs;
}

void Engine::run_ewise_stage(LstmState& state, int hidden) {
    const std::size_t h = static_cast<std::size_t>(hidden);

    ports_[2].load(pack_values(state.c), cfg_.start_delay[2]);
    std::uint64_t b2 = 0;
    std::vector<Q88> c_prev = unpack_stream(ports_[2], h, b2);
    counters_.bytes_in[2] += b2;
    counters_.stage3_bytes_in += b2;

    std::vector<Beat32> writeback;
    writeback.reserve(h);
    for (std::size_t k = 0; k < h; ++k) {
        Q88 gi = fifo_i_.pop();
        Q88 gf = fifo_f_.pop();
        Q88 go = fifo_o_.pop();
        Q88 gc = fifo_c_.pop();
        Q88 c = rescale(acc_add(mul(gf, c_prev[k]), mul(gi, gc)));
        Q88 hv = rescale(mul(go, eval(tables_.tanh_t, c)));
        state.c[k] = c;
        state.h[k] = hv;
        writeback.push_back(Beat32{c, hv});
        counters_.ewise_ops += 4;
    }
    if (!fifo_i_.empty() || !fifo_f_.empty() || !fifo_o_.empty() || !fifo_c_.empty()) {
        throw SimFault("stage fifo not drained");
    }
    fifo_i_.clear();
    fifo_f_.clear();
    fifo_o_.clear();
    fifo_c_.clear();

    counters_.bytes_out[3] += 4 * h;
    counters_.stage3_bytes_out += 4 * h;
    counters_.cycles_stage3 += cfg_.start_delay[2] + h + cfg_.pipeline_latency;
    last_writeback_ = std::move(writeback);
}

void Engine::run_timestep(const PackedLayer& layer, std::span<const Q88> x, LstmState& state) {
    if (layer.hidden != cfg_.hidden) throw std::invalid_argument("run_timestep: hidden mismatch");
    if (static_cast<int>(x.size()) > layer.padded_input) {
        throw std::invalid_argument("run_timestep: input exceeds padded size");
    }
    if (static_cast<int>(state.c.size()) != layer.hidden ||
        static_cast<int>(state.h.size()) != layer.hidden) {
        throw std::invalid_argument("run_timestep: state size mismatch");
    }

    std::vector<Q88> x_pad = zero_pad(x, layer.padded_input);
    run_gate_stage(1, layer.gate_i, layer.gate_c, tables_.sigmoid_t, tables_.tanh_t, x_pad,
                   state.h, fifo_i_, fifo_c_, layer.padded_input, layer.hidden);
    run_gate_stage(2, layer.gate_f, layer.gate_o, tables_.sigmoid_t, tables_.sigmoid_t, x_pad,
                   state.h, fifo_f_, fifo_o_, layer.padded_input, layer.hidden);
    run_ewise_stage(state, layer.hidden);
    counters_.layer_steps += 1;
}

std::vector<Acc32> Engine::run_projection(const PackedProjection& proj, std::span<const Q88> h) {
    if (static_cast<int>(h.size()) != proj.hidden) {
        throw std::invalid_argument("run_projection: hidden mismatch");
    }
    const std::size_t cols = static_cast<std::size_t>(proj.hidden) + 1;
    const std::size_t expect = static_cast<std::size_t>(proj.vocab) * cols;
    if (proj.w.value_count != expect) throw SimFault("projection image size mismatch");

    std::vector<Q88> v(h.begin(), h.end());
    v.push_back(q88_one);

    ports_[0].load(proj.w.beats, cfg_.start_delay[0]);
    ports_[2].load(pack_values(v), cfg_.start_delay[2]);
    SyncBlock sync;
    sync.arm({&ports_[0], &ports_[2]});

    std::uint64_t bytes = 0;
    std::vector<Q88> w = unpack_stream(ports_[0], expect, bytes);
    counters_.bytes_in[0] += bytes;
    std::uint64_t b2 = 0;
    std::vector<Q88> vec = unpack_stream(ports_[2], cols, b2);
    counters_.bytes_in[2] += b2;
    counters_.proj_bytes_in += bytes + b2;

    // Single MAC, one element per cycle, accumulator reset per output row.
    std::vector<Acc32> logits(proj.vocab);
    for (int r = 0; r < proj.vocab; ++r) {
        Acc32 acc{};
        for (std::size_t j = 0; j < cols; ++j) {
            acc = acc_add(acc, mul(w[static_cast<std::size_t>(r) * cols + j], vec[j]));
        }
        logits[r] = acc;
    }
    counters_.proj_ops += expect;
    counters_.cycles_projection += sync.start_cycle + expect + cfg_.pipeline_latency;
    counters_.bytes_out[3] += 4 * static_cast<std::uint64_t>(proj.vocab);
    counters_.proj_bytes_out += 4 * static_cast<std::uint64_t>(proj.vocab);
    return logits;
}

SequenceResult Engine::run_sequence(std::span<const PackedLayer> layers,
                                    const PackedProjection* proj,
                                    const std::vector<std::vector<Q88>>& x_seq,
                                    std::vector<LstmState>& states) {
    if (states.size() != layers.size()) {
        throw std::invalid_argument("run_sequence: one state per layer required");
    }
    SequenceResult out;
    out.h_history.reserve(x_seq.size());
    for (const auto& x : x_seq) {
        std::span<const Q88> v{x};
        for (std::size_t l = 0; l < layers.size(); ++l) {
            run_timestep(layers[l], v, states[l]);
            v = states[l].h;  // previous layer h becomes next layer x
        }
        out.h_history.emplace_back(v.begin(), v.end());
        if (proj != nullptr) {
            out.logits_history.push_back(run_projection(*proj, v));
        }
        counters_.timesteps += 1;
    }
    return out;
}

}  // namespace lstmq
