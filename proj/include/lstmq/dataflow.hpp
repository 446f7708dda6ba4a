#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "lstmq/lstm.hpp"

// Streaming engine model: DMA ports with valid/ready handshake, a sync
// block that aligns independently started streams, two-MAC gate units,
// inter-stage FIFOs and the three-stage state machine. Outputs are bit
// equal to the functional layer; counters give first-order timing.
//
// Port assignment (one concrete realization):
//   port 0  weight stream, first gate of the stage (also projection)
//   port 1  weight stream, second gate of the stage
//   port 2  vector lanes: (x, h_prev) pairs in stages 1-2, c_prev in
//           stage 3, the [h | 1] vector in the projection pass
//   port 3  write-back: (c, h) pairs, or one 32-bit logit per beat
//
// Schedule: per stage, one aligned element tuple per cycle once every
// port has started. A gate row takes max(P, H+1) cycles: the two MACs
// consume the x-part and the [h | 1]-part lanes in lockstep, the shorter
// lane zero padded. Stage 3 and the projection run one element per cycle.
// A fixed configurable latency per stage covers sync fill and pipeline
// depth.

namespace lstmq {

// One 32-bit DMA word carrying two 16-bit lanes, lane_lo first.
struct Beat32 {
    Q88 lane_lo;
    Q88 lane_hi;
    friend constexpr bool operator==(Beat32, Beat32) = default;
};

constexpr std::uint32_t beat_bits(Beat32 b) {
    return static_cast<std::uint16_t>(b.lane_lo.raw) |
           (static_cast<std::uint32_t>(static_cast<std::uint16_t>(b.lane_hi.raw)) << 16);
}

// Sequential pairing: values[0] -> lane_lo of beat 0, values[1] -> lane_hi,
// and so on; a zero lane pads an odd tail.
std::vector<Beat32> pack_values(std::span<const Q88> values);

// Lane pairing: beat j = (lo[j], hi[j]), zero padded up to len.
std::vector<Beat32> pack_lane_pair(std::span<const Q88> lo, std::span<const Q88> hi,
                                   std::size_t len);

struct PackedGate {
    std::vector<Beat32> beats;
    std::size_t value_count = 0;  // real values; the unpacker drops the pad by count
};

struct PackedLayer {
    PackedGate gate_i, gate_f, gate_o, gate_c;
    int input_size = 0;
    int padded_input = 0;
    int hidden = 0;
};

struct PackedProjection {
    PackedGate w;
    int vocab = 0;
    int hidden = 0;
};

// Row-major stream of each gate's combined [W_x | W_h | bias] matrix,
// paired two values per beat.
PackedLayer pack_weights(const LayerParams& layer);
PackedProjection pack_projection(const ProjectionParams& proj);

struct SimFault : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class StreamPort {
public:
    void load(std::vector<Beat32> beats, std::uint64_t start_delay) {
        queue_ = std::move(beats);
        head_ = 0;
        start_delay_ = start_delay;
    }
    bool started(std::uint64_t cycle) const { return cycle >= start_delay_; }
    std::uint64_t start_delay() const { return start_delay_; }
    std::size_t remaining() const { return queue_.size() - head_; }
    Beat32 pop() {
        if (head_ >= queue_.size()) throw SimFault("stream underrun: port exhausted");
        return queue_[head_++];
    }

private:
    std::vector<Beat32> queue_;
    std::size_t head_ = 0;
    std::uint64_t start_delay_ = 0;
};

// Elastic buffering reduced to its observable effect: nothing moves until
// the slowest port has started streaming.
struct SyncBlock {
    std::uint64_t start_cycle = 0;
    void arm(std::initializer_list<const StreamPort*> ports) {
        start_cycle = 0;
        for (const auto* p : ports) {
            if (p->start_delay() > start_cycle) start_cycle = p->start_delay();
        }
    }
};

// Two accumulators per gate, reset at every row boundary.
struct GateUnit {
    Acc32 mac_x{};
    Acc32 mac_h{};
    const PwlTable* pwl = nullptr;
    int row = 0;
    void reset_row() { mac_x = Acc32{}; mac_h = Acc32{}; }
    Q88 finish_row() {
        Q88 y = eval(*pwl, rescale(acc_add(mac_x, mac_h)));
        reset_row();
        ++row;
        return y;
    }
};

class StageFifo {
public:
    explicit StageFifo(std::size_t capacity = 0) : capacity_(capacity) {}
    void set_capacity(std::size_t c) { capacity_ = c; }
    void push(Q88 v) {
        if (data_.size() >= capacity_) throw SimFault("stage fifo overflow");
        data_.push_back(v);
    }
    Q88 pop() {
        if (head_ >= data_.size()) throw SimFault("stage fifo underrun");
        return data_[head_++];
    }
    bool empty() const { return head_ == data_.size(); }
    void clear() {
        data_.clear();
        head_ = 0;
    }

private:
    std::vector<Q88> data_;
    std::size_t head_ = 0;
    std::size_t capacity_ = 0;
};

struct EngineConfig {
    int hidden = 0;
    int padded_input = 0;  // nominal first-layer P; per-layer dims come from the pack
    std::uint64_t clock_hz = 142'000'000;
    int port_count = 4;
    std::uint64_t pipeline_latency = 16;
    std::array<std::uint64_t, 4> start_delay{};  // per port, for sync experiments
};

struct PerfCounters {
    std::uint64_t cycles_stage1 = 0;
    std::uint64_t cycles_stage2 = 0;
    std::uint64_t cycles_stage3 = 0;
    std::uint64_t cycles_projection = 0;
    std::uint64_t mac_ops = 0;    // gate MACs over real (unpadded) elements
    std::uint64_t ewise_ops = 0;  // 4 per element: f*c, i*c~, add, o*tanh
    std::uint64_t proj_ops = 0;
    std::array<std::uint64_t, 4> bytes_in{};
    std::array<std::uint64_t, 4> bytes_out{};
    // per-direction bytes grouped by stage kind, for bandwidth accounting
    std::uint64_t stage12_bytes_in = 0;
    std::uint64_t stage3_bytes_in = 0;
    std::uint64_t stage3_bytes_out = 0;
    std::uint64_t proj_bytes_in = 0;
    std::uint64_t proj_bytes_out = 0;
    std::uint64_t layer_steps = 0;
    std::uint64_t timesteps = 0;

    std::uint64_t total_cycles() const {
        return cycles_stage1 + cycles_stage2 + cycles_stage3 + cycles_projection;
    }

    friend bool operator==(const PerfCounters&, const PerfCounters&) = default;
};

struct SequenceResult {
    std::vector<std::vector<Q88>> h_history;       // last layer h per timestep
    std::vector<std::vector<Acc32>> logits_history;  // one entry per timestep if projecting
};

class Engine {
public:
    explicit Engine(EngineConfig cfg);

    const EngineConfig& config() const { return cfg_; }
    const PerfCounters& counters() const { return counters_; }
    const PwlTables& tables() const { return tables_; }

    // One layer timestep; state is overwritten in place.
    void run_timestep(const PackedLayer& layer, std::span<const Q88> x, LstmState& state);

    std::vector<Acc32> run_projection(const PackedProjection& proj, std::span<const Q88> h);

    // All layers per timestep, projection after the last layer when given.
    SequenceResult run_sequence(std::span<const PackedLayer> layers,
                                const PackedProjection* proj,
                                const std::vector<std::vector<Q88>>& x_seq,
                                std::vector<LstmState>& states);

    // (c, h) beats written back by the most recent ewise stage.
    const std::vector<Beat32>& last_writeback() const { return last_writeback_; }

private:
    void run_gate_stage(int stage_id, const PackedGate& gate_a, const PackedGate& gate_b,
                        const PwlTable& pwl_a, const PwlTable& pwl_b,
                        std::span<const Q88> x_pad, std::span<const Q88> h_prev,
                        StageFifo& fifo_a, StageFifo& fifo_b, int padded_input, int hidden);
    void run_ewise_stage(LstmState& state, int hidden);

    EngineConfig cfg_;
    PerfCounters counters_;
    PwlTables tables_;
    std::array<StreamPort, 4> ports_;
    StageFifo fifo_i_, fifo_f_, fifo_o_, fifo_c_;
    std::vector<Beat32> last_writeback_;
};

}  // namespace lstmq
