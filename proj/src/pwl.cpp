#include "lstmq/pwl.hpp"

#include <algorithm>
#include <cmath>

namespace lstmq {

double nonlin_reference(Nonlin kind, double x) {
    if (kind == Nonlin::Tanh) return std::tanh(x);
    return 1.0 / (1.0 + std::exp(-x));
}

namespace {

// Chord value at the raw input, as produced by the fixed-point eval path.
std::int32_t segment_value_raw(const LineSegment& s, std::int16_t x_raw) {
    Acc32 acc = acc_add(mul(s.a, Q88{x_raw}), widen(s.b));
    return rescale(acc).raw;
}

}  // namespace

PwlTable build_table(Nonlin kind) {
    const double window = (kind == Nonlin::Tanh) ? 4.0 : 6.0;
    PwlTable t;
    t.kind = kind;
    t.clamp_lo = (kind == Nonlin::Tanh) ? encode(-1.0) : encode(0.0);
    t.clamp_hi = encode(1.0);

    // Quantized breakpoints on a uniform grid; reused as x_hi of one
    // segment and x_lo of the next, so contiguity is structural.
    std::array<Q88, kPwlSegments + 1> bp;
    for (int i = 0; i <= kPwlSegments; ++i) {
        bp[i] = encode(-window + 2.0 * window * i / kPwlSegments);
    }

    for (int i = 0; i < kPwlSegments; ++i) {
        double x0 = decode(bp[i]);
        double x1 = decode(bp[i + 1]);
        double slope = (nonlin_reference(kind, x1) - nonlin_reference(kind, x0)) / (x1 - x0);
        Q88 a = encode(slope);
        // Anchor the intercept at the left endpoint using the quantized
        // slope, so slope quantization error stays bounded by the segment
        // width rather than |x|.
        Q88 b = encode(nonlin_reference(kind, x0) - decode(a) * x0);
        t.segments[i] = LineSegment{a, b, bp[i], bp[i + 1]};
    }

    // Quantization can leave a 1-2 LSB downward step at a boundary. Lift
    // intercepts left to right until each segment starts no lower than the
    // previous one ended; keeps eval monotone for monotone functions.
    std::int32_t prev_end = t.clamp_lo.raw;
    for (auto& s : t.segments) {
        std::int32_t start = segment_value_raw(s, s.x_lo.raw);
        if (start < prev_end) {
            s.b = Q88{static_cast<std::int16_t>(s.b.raw + (prev_end - start))};
        }
        prev_end = segment_value_raw(s, static_cast<std::int16_t>(s.x_hi.raw - 1));
    }

    return t;
}

PwlTables build_tables() { return PwlTables{build_table(Nonlin::Tanh), build_table(Nonlin::Sigmoid)}; }

Q88 eval(const PwlTable& table, Q88 x) {
    if (x.raw < table.segments.front().x_lo.raw) return table.clamp_lo;
    if (x.raw >= table.segments.back().x_hi.raw) return table.clamp_hi;
    for (const auto& s : table.segments) {
        if (s.x_lo.raw <= x.raw && x.raw < s.x_hi.raw) {
            return Q88{static_cast<std::int16_t>(segment_value_raw(s, x.raw))};
        }
    }
    return table.clamp_hi;  // unreachable: segments cover the window
}

namespace serial {

double max_abs_error(const PwlTable& table) {
    double worst = 0.0;
    for (int r = -32768; r <= 32767; ++r) {
        Q88 x{static_cast<std::int16_t>(r)};
        double err = std::abs(decode(eval(table, x)) - nonlin_reference(table.kind, decode(x)));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace serial

double max_abs_error(const PwlTable& table) {
    double worst = 0.0;
#pragma omp parallel for reduction(max : worst) schedule(static)
    for (int r = -32768; r <= 32767; ++r) {
        Q88 x{static_cast<std::int16_t>(r)};
        double err = std::abs(decode(eval(table, x)) - nonlin_reference(table.kind, decode(x)));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace lstmq
