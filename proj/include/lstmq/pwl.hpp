#pragma once

#include <array>

#include "lstmq/fixq.hpp"

// Piecewise-linear tanh / logistic sigmoid, 13 chord segments over a fixed
// input window (tanh: [-4,4], sigmoid: [-6,6]), clamped to the asymptotes
// outside it. Coefficients and breakpoints live in Q8.8; evaluation uses
// only fixq operations, mirroring the pipelined line-segment modules.

namespace lstmq {

enum class Nonlin { Tanh, Sigmoid };

struct LineSegment {
    Q88 a;     // slope
    Q88 b;     // intercept
    Q88 x_lo;  // half-open input range [x_lo, x_hi)
    Q88 x_hi;
};

inline constexpr int kPwlSegments = 13;

struct PwlTable {
    Nonlin kind = Nonlin::Tanh;
    std::array<LineSegment, kPwlSegments> segments{};
    Q88 clamp_lo;  // output below segments[0].x_lo
    Q88 clamp_hi;  // output at/above segments[12].x_hi
};

// Both tables, built once and shared by the layer code.
struct PwlTables {
    PwlTable tanh_t;
    PwlTable sigmoid_t;
    const PwlTable& for_kind(Nonlin k) const {
        return k == Nonlin::Tanh ? tanh_t : sigmoid_t;
    }
};

PwlTable build_table(Nonlin kind);
PwlTables build_tables();

// First segment containing x computes rescale(a*x + b), b widened to
// Q16.16; inputs outside the window return the clamp values.
Q88 eval(const PwlTable& table, Q88 x);

// Exact reference in double precision.
double nonlin_reference(Nonlin kind, double x);

// Max |decode(eval(x)) - f(decode(x))| over all 65536 inputs.
double max_abs_error(const PwlTable& table);

namespace serial {
double max_abs_error(const PwlTable& table);
}

}  // namespace lstmq
