#pragma once

#include <span>
#include <utility>
#include <vector>

#include "lstmq/fixq.hpp"
#include "lstmq/pwl.hpp"

// Functional fixed-point LSTM layer: the golden reference the streaming
// engine must match bit for bit. Weight layout per gate is one combined
// H x (P+H+1) matrix [W_x padded to P | W_h | bias]; the vector side gets
// a unity element appended so the MAC adds the bias implicitly.
//
// Row kernels are data parallel (OpenMP over output rows); lstmq::serial
// holds the plain-loop references used by tests and the kernel benchmark.

namespace lstmq {

struct QMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<Q88> data;  // row-major

    QMatrix() = default;
    QMatrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c) {}

    Q88& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    Q88 at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::span<const Q88> row(int r) const {
        return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)};
    }
};

struct GateParams {
    QMatrix w_combined;  // H x (P+H+1)
    Nonlin activation = Nonlin::Sigmoid;
};

struct LayerParams {
    GateParams gate_i, gate_f, gate_o, gate_c;  // sigmoid, sigmoid, sigmoid, tanh
    int input_size = 0;    // true input width
    int padded_input = 0;  // P = max(input_size, hidden)
    int hidden = 0;        // H
};

struct LstmState {
    std::vector<Q88> c;
    std::vector<Q88> h;

    explicit LstmState(int hidden = 0) : c(hidden), h(hidden) {}
};

struct ProjectionParams {
    QMatrix w;  // V x (H+1), bias folded into the last column
};

// Gate outputs of one step, for range checks and diagnostics.
struct StepTrace {
    std::int16_t sigmoid_min = 32767, sigmoid_max = -32768;  // i, f, o
    std::int16_t tanh_min = 32767, tanh_max = -32768;        // c~ and tanh(c)
    void note(Nonlin kind, std::span<const Q88> v);
};

// One output row of a gate: MAC over the x part, MAC over the [h | 1]
// part (bias last), then one saturating add -- the accumulation order the
// hardware uses. w_row has P + H + 1 elements.
Acc32 gate_row_acc(std::span<const Q88> w_row, std::span<const Q88> x_pad,
                   std::span<const Q88> h_prev);

// w is R x (N+1), v has N elements; a unity element is appended to v and
// the accumulator is reset per row.
std::vector<Acc32> matvec_bias(const QMatrix& w, std::span<const Q88> v);

std::vector<Q88> gate_eval(const GateParams& g, std::span<const Q88> x_pad,
                           std::span<const Q88> h_prev, const PwlTable& pwl);

// c[k] = rescale(f[k]*c_prev[k] + i[k]*ctilde[k]);
// h[k] = rescale(o[k] * tanh(c[k])).
std::pair<std::vector<Q88>, std::vector<Q88>> ewise_stage(
    std::span<const Q88> i, std::span<const Q88> f, std::span<const Q88> o,
    std::span<const Q88> ctilde, std::span<const Q88> c_prev, const PwlTable& tanh_table);

// Zero-pads x to P, runs the three stages, overwrites state in place.
void lstm_step(const LayerParams& params, std::span<const Q88> x, LstmState& state,
               const PwlTables& tables, StepTrace* trace = nullptr);

// Full-precision logits.
std::vector<Acc32> projection(const ProjectionParams& p, std::span<const Q88> h);

std::vector<Q88> zero_pad(std::span<const Q88> x, int padded_size);

namespace serial {
std::vector<Acc32> matvec_bias(const QMatrix& w, std::span<const Q88> v);
std::vector<Q88> gate_eval(const GateParams& g, std::span<const Q88> x_pad,
                           std::span<const Q88> h_prev, const PwlTable& pwl);
std::pair<std::vector<Q88>, std::vector<Q88>> ewise_stage(
    std::span<const Q88> i, std::span<const Q88> f, std::span<const Q88> o,
    std::span<const Q88> ctilde, std::span<const Q88> c_prev, const PwlTable& tanh_table);
}  // namespace serial

// ---- double-precision oracle ------------------------------------------

struct FloatGate {
    std::vector<double> wx;  // H x input, row-major
    std::vector<double> wh;  // H x H
    std::vector<double> b;   // H
};

struct FloatLayer {
    FloatGate gate_i, gate_f, gate_o, gate_c;
    int input_size = 0;
    int hidden = 0;
};

struct FloatState {
    std::vector<double> c;
    std::vector<double> h;

    explicit FloatState(int hidden = 0) : c(hidden), h(hidden) {}
};

void float_oracle_step(const FloatLayer& layer, std::span<const double> x, FloatState& state);

// ---- error metrics ------------------------------------------------------

// Per timestep: mean_k |decode(fixed[k]) - ref[k]| normalized by
// max(mean_k |ref[k]|, 1e-6), as a percentage.
struct ErrorSeries {
    std::vector<double> per_step;
    double mean = 0.0;
    double best = 0.0;   // min over timesteps
    double worst = 0.0;  // max over timesteps
};

ErrorSeries avg_pct_error(const std::vector<std::vector<Q88>>& fixed_seq,
                          const std::vector<std::vector<double>>& float_seq);

}  // namespace lstmq
