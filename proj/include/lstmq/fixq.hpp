#pragma once

#include <cstdint>
#include <cmath>

// Q8.8 scalar arithmetic with 32-bit accumulation.
//
// Q88:   16-bit signed, value = raw / 256, range [-128.0, +127.99609375].
// Acc32: 32-bit signed, value = raw / 65536 (Q16.16) -- the exact product
//        format of two Q88 values.
//
// Overflow policy is saturation everywhere (encode, acc_add, rescale).
// Conversion from float rounds to nearest, ties to even.

namespace lstmq {

struct Q88 {
    std::int16_t raw = 0;
    friend constexpr bool operator==(Q88, Q88) = default;
};

struct Acc32 {
    std::int32_t raw = 0;
    friend constexpr bool operator==(Acc32, Acc32) = default;
};

inline constexpr Q88 q88_min{static_cast<std::int16_t>(-32768)};
inline constexpr Q88 q88_max{static_cast<std::int16_t>(32767)};
inline constexpr Q88 q88_one{static_cast<std::int16_t>(256)};

// Rescale rounding for the 32->16 conversion. Truncate is the hardware
// behavior (arithmetic right shift); Nearest (round half away from zero)
// is a runtime option for quantization error studies. Set before spawning
// threads; all built-in oracles assume Truncate.
enum class RescaleRounding { Truncate, Nearest };

inline RescaleRounding g_rescale_rounding = RescaleRounding::Truncate;

inline void set_rescale_rounding(RescaleRounding mode) { g_rescale_rounding = mode; }
inline RescaleRounding rescale_rounding() { return g_rescale_rounding; }

constexpr std::int16_t sat16(std::int64_t v) {
    if (v < -32768) return -32768;
    if (v > 32767) return 32767;
    return static_cast<std::int16_t>(v);
}

constexpr std::int32_t sat32(std::int64_t v) {
    if (v < INT32_MIN) return INT32_MIN;
    if (v > INT32_MAX) return INT32_MAX;
    return static_cast<std::int32_t>(v);
}

// Round to nearest even of x*256, saturated to the 16-bit range. NaN maps
// to zero so corrupt inputs stay deterministic.
inline Q88 encode(double x) {
    if (std::isnan(x)) return Q88{};
    double scaled = x * 256.0;
    if (scaled >= 65536.0) return q88_max;
    if (scaled <= -65536.0) return q88_min;
    double fl = std::floor(scaled);
    double frac = scaled - fl;
    auto n = static_cast<std::int64_t>(fl);
    if (frac > 0.5 || (frac == 0.5 && (n & 1))) ++n;
    return Q88{sat16(n)};
}

constexpr double decode(Q88 q) { return q.raw / 256.0; }

constexpr double decode(Acc32 a) { return a.raw / 65536.0; }

// Exact: |raw| <= 2^15 so the product always fits 32 bits.
constexpr Acc32 mul(Q88 a, Q88 b) {
    return Acc32{static_cast<std::int32_t>(a.raw) * static_cast<std::int32_t>(b.raw)};
}

constexpr Acc32 acc_add(Acc32 a, Acc32 b) {
    return Acc32{sat32(static_cast<std::int64_t>(a.raw) + static_cast<std::int64_t>(b.raw))};
}

// Q8.8 -> Q16.16, exact. Used to fold a bias into an accumulator.
constexpr Acc32 widen(Q88 q) {
    return Acc32{static_cast<std::int32_t>(q.raw) << 8};
}

// Q16.16 -> Q8.8. Truncate mode is an arithmetic shift (rounds toward
// negative infinity: raw -1 >> 8 == -1), then saturation.
inline Q88 rescale(Acc32 a) {
    if (g_rescale_rounding == RescaleRounding::Nearest) {
        std::int64_t v = a.raw;
        std::int64_t r = v >= 0 ? (v + 128) >> 8 : -((-v + 128) >> 8);
        return Q88{sat16(r)};
    }
    return Q88{sat16(static_cast<std::int64_t>(a.raw) >> 8)};
}

}  // namespace lstmq
