#include "lstmq/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace lstmq {

namespace {

// Below this many MAC terms the OpenMP fork costs more than the loop;
// crossover measured with the kernel benchmark (H=256 is the first win).
constexpr long kParallelGrain = 131072;

void check(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
}

Acc32 dot_bias_row(std::span<const Q88> w_row, std::span<const Q88> v) {
    Acc32 acc{};
    for (std::size_t j = 0; j < v.size(); ++j) {
        acc = acc_add(acc, mul(w_row[j], v[j]));
    }
    return acc_add(acc, widen(w_row[v.size()]));  // unity element
}

}  // namespace

void StepTrace::note(Nonlin kind, std::span<const Q88> v) {
    auto& lo = kind == Nonlin::Sigmoid ? sigmoid_min : tanh_min;
    auto& hi = kind == Nonlin::Sigmoid ? sigmoid_max : tanh_max;
    for (Q88 q : v) {
        lo = std::min(lo, q.raw);
        hi = std::max(hi, q.raw);
    }
}

Acc32 gate_row_acc(std::span<const Q88> w_row, std::span<const Q88> x_pad,
                   std::span<const Q88> h_prev) {
    const std::size_t p = x_pad.size();
    Acc32 mac_x{};
    for (std::size_t j = 0; j < p; ++j) {
        mac_x = acc_add(mac_x, mul(w_row[j], x_pad[j]));
    }
    Acc32 mac_h{};
    for (std::size_t j = 0; j < h_prev.size(); ++j) {
        mac_h = acc_add(mac_h, mul(w_row[p + j], h_prev[j]));
    }
    mac_h = acc_add(mac_h, widen(w_row[p + h_prev.size()]));
    return acc_add(mac_x, mac_h);
}

std::vector<Acc32> matvec_bias(const QMatrix& w, std::span<const Q88> v) {
    check(w.cols == static_cast<int>(v.size()) + 1, "matvec_bias: vector width mismatch");
    if (static_cast<long>(w.rows) * w.cols < kParallelGrain) return serial::matvec_bias(w, v);
    std::vector<Acc32> out(w.rows);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < w.rows; ++r) {
        out[r] = dot_bias_row(w.row(r), v);
    }
    return out;
}

std::vector<Q88> gate_eval(const GateParams& g, std::span<const Q88> x_pad,
                           std::span<const Q88> h_prev, const PwlTable& pwl) {
    check(pwl.kind == g.activation, "gate_eval: table kind mismatch");
    check(g.w_combined.cols == static_cast<int>(x_pad.size() + h_prev.size()) + 1,
          "gate_eval: combined width mismatch");
    check(g.w_combined.rows == static_cast<int>(h_prev.size()), "gate_eval: hidden size mismatch");
    if (static_cast<long>(g.w_combined.rows) * g.w_combined.cols < kParallelGrain) {
        return serial::gate_eval(g, x_pad, h_prev, pwl);
    }
    std::vector<Q88> out(g.w_combined.rows);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < g.w_combined.rows; ++r) {
        out[r] = eval(pwl, rescale(gate_row_acc(g.w_combined.row(r), x_pad, h_prev)));
    }
    return out;
}

std::pair<std::vector<Q88>, std::vector<Q88>> ewise_stage(
    std::span<const Q88> i, std::span<const Q88> f, std::span<const Q88> o,
    std::span<const Q88> ctilde, std::span<const Q88> c_prev, const PwlTable& tanh_table) {
    const std::size_t h_size = i.size();
    check(f.size() == h_size && o.size() == h_size && ctilde.size() == h_size &&
              c_prev.size() == h_size,
          "ewise_stage: length mismatch");
    if (static_cast<long>(h_size) * 8 < kParallelGrain) {
        return serial::ewise_stage(i, f, o, ctilde, c_prev, tanh_table);
    }
    std::vector<Q88> c(h_size), h(h_size);
#pragma omp parallel for schedule(static)
    for (std::size_t k = 0; k < h_size; ++k) {
        c[k] = rescale(acc_add(mul(f[k], c_prev[k]), mul(i[k], ctilde[k])));
        h[k] = rescale(mul(o[k], eval(tanh_table, c[k])));
    }
    return {std::move(c), std::move(h)};
}

std::vector<Q88> zero_pad(std::span<const Q88> x, int padded_size) {
    check(static_cast<int>(x.size()) <= padded_size, "zero_pad: input longer than padded size");
    std::vector<Q88> out(padded_size);
    std::copy(x.begin(), x.end(), out.begin());
    return out;
}

void lstm_step(const LayerParams& params, std::span<const Q88> x, LstmState& state,
               const PwlTables& tables, StepTrace* trace) {
    check(static_cast<int>(state.c.size()) == params.hidden &&
              static_cast<int>(state.h.size()) == params.hidden,
          "lstm_step: state size mismatch");
    std::vector<Q88> x_pad = zero_pad(x, params.padded_input);

    auto i = gate_eval(params.gate_i, x_pad, state.h, tables.sigmoid_t);
    auto ctilde = gate_eval(params.gate_c, x_pad, state.h, tables.tanh_t);
    auto f = gate_eval(params.gate_f, x_pad, state.h, tables.sigmoid_t);
    auto o = gate_eval(params.gate_o, x_pad, state.h, tables.sigmoid_t);
    if (trace != nullptr) {
        trace->note(Nonlin::Sigmoid, i);
        trace->note(Nonlin::Sigmoid, f);
        trace->note(Nonlin::Sigmoid, o);
        trace->note(Nonlin::Tanh, ctilde);
    }

    auto [c, h] = ewise_stage(i, f, o, ctilde, state.c, tables.tanh_t);
    state.c = std::move(c);
    state.h = std::move(h);
}

std::vector<Acc32> projection(const ProjectionParams& p, std::span<const Q88> h) {
    return matvec_bias(p.w, h);
}

namespace serial {

std::vector<Acc32> matvec_bias(const QMatrix& w, std::span<const Q88> v) {
    check(w.cols == static_cast<int>(v.size()) + 1, "matvec_bias: vector width mismatch");
    std::vector<Acc32> out(w.rows);
    for (int r = 0; r < w.rows; ++r) {
        out[r] = dot_bias_row(w.row(r), v);
    }
    return out;
}

std::vector<Q88> gate_eval(const GateParams& g, std::span<const Q88> x_pad,
                           std::span<const Q88> h_prev, const PwlTable& pwl) {
    std::vector<Q88> out(g.w_combined.rows);
    for (int r = 0; r < g.w_combined.rows; ++r) {
        out[r] = eval(pwl, rescale(gate_row_acc(g.w_combined.row(r), x_pad, h_prev)));
    }
    return out;
}

std::pair<std::vector<Q88>, std::vector<Q88>> ewise_stage(
    std::span<const Q88> i, std::span<const Q88> f, std::span<const Q88> o,
    std::span<const Q88> ctilde, std::span<const Q88> c_prev, const PwlTable& tanh_table) {
    const std::size_t h_size = i.size();
    std::vector<Q88> c(h_size), h(h_size);
    for (std::size_t k = 0; k < h_size; ++k) {
        c[k] = rescale(acc_add(mul(f[k], c_prev[k]), mul(i[k], ctilde[k])));
        h[k] = rescale(mul(o[k], eval(tanh_table, c[k])));
    }
    return {std::move(c), std::move(h)};
}

}  // namespace serial

void float_oracle_step(const FloatLayer& layer, std::span<const double> x, FloatState& state) {
    const int h_size = layer.hidden;
    const int in_size = layer.input_size;
    if (static_cast<int>(x.size()) != in_size) {
        throw std::invalid_argument("float_oracle_step: input size mismatch");
    }

    auto gate = [&](const FloatGate& g, bool is_tanh) {
        std::vector<double> out(h_size);
        for (int r = 0; r < h_size; ++r) {
            double s = g.b[r];
            for (int j = 0; j < in_size; ++j) s += g.wx[static_cast<std::size_t>(r) * in_size + j] * x[j];
            for (int j = 0; j < h_size; ++j) s += g.wh[static_cast<std::size_t>(r) * h_size + j] * state.h[j];
            out[r] = is_tanh ? std::tanh(s) : 1.0 / (1.0 + std::exp(-s));
        }
        return out;
    };

    auto i = gate(layer.gate_i, false);
    auto f = gate(layer.gate_f, false);
    auto o = gate(layer.gate_o, false);
    auto ctilde = gate(layer.gate_c, true);
    for (int k = 0; k < h_size; ++k) {
        state.c[k] = f[k] * state.c[k] + i[k] * ctilde[k];
        state.h[k] = o[k] * std::tanh(state.c[k]);
    }
}

ErrorSeries avg_pct_error(const std::vector<std::vector<Q88>>& fixed_seq,
                          const std::vector<std::vector<double>>& float_seq) {
    if (fixed_seq.empty() || fixed_seq.size() != float_seq.size()) {
        throw std::invalid_argument("avg_pct_error: empty or mismatched sequences");
    }
    constexpr double kEps = 1e-6;
    ErrorSeries out;
    out.per_step.reserve(fixed_seq.size());
    for (std::size_t t = 0; t < fixed_seq.size(); ++t) {
        const auto& fx = fixed_seq[t];
        const auto& fl = float_seq[t];
        if (fx.size() != fl.size() || fx.empty()) {
            throw std::invalid_argument("avg_pct_error: vector size mismatch");
        }
        double abs_err = 0.0, abs_ref = 0.0;
        for (std::size_t k = 0; k < fx.size(); ++k) {
            abs_err += std::abs(decode(fx[k]) - fl[k]);
            abs_ref += std::abs(fl[k]);
        }
        abs_err /= static_cast<double>(fx.size());
        abs_ref /= static_cast<double>(fx.size());
        out.per_step.push_back(abs_err / std::max(abs_ref, kEps) * 100.0);
    }
    out.best = *std::min_element(out.per_step.begin(), out.per_step.end());
    out.worst = *std::max_element(out.per_step.begin(), out.per_step.end());
    double sum = 0.0;
    for (double e : out.per_step) sum += e;
    out.mean = sum / static_cast<double>(out.per_step.size());
    return out;
}

}  // namespace lstmq
