#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "lstmq/dataflow.hpp"
#include "lstmq/lstm.hpp"
#include "lstmq/rng.hpp"

// Model container format and the character-level experiment harness.
//
// File layout (all integers little-endian):
//   magic      8 bytes  "LSTMQ88\0"
//   version    u32      currently 1
//   layers     u32
//   per layer  u32 pair input, hidden
//   vocab_size u32      number of characters
//   vocab      vocab_size UTF-8 encoded characters
//   weights    float32 arrays, row-major, in order per layer:
//              W_xi, W_hi, b_i, W_xf, W_hf, b_f, W_xo, W_ho, b_o,
//              W_xc, W_hc, b_c; then projection W (V x H), b (V)
//
// Weights are stored as float32 and quantized to Q8.8 at load; saving a
// loaded model writes the decoded quantized values, so a second load is a
// fixed point.

namespace lstmq {

struct ModelError : std::runtime_error {
    enum class Kind { BadMagic, BadVersion, Truncated, DimMismatch, UnknownChar, Io };
    Kind kind;
    ModelError(Kind k, const std::string& msg) : std::runtime_error(msg), kind(k) {}
};

struct Vocab {
    std::vector<std::string> chars;  // one UTF-8 codepoint per entry
    std::unordered_map<std::string, int> index;

    int size() const { return static_cast<int>(chars.size()); }
    int lookup(const std::string& ch) const;  // throws ModelError::UnknownChar

    static Vocab from_characters(const std::string& utf8);  // splits into codepoints
};

struct FloatProjection {
    std::vector<float> w;  // V x H row-major
    std::vector<float> b;  // V
    int vocab = 0;
    int hidden = 0;
};

struct FloatModel {
    std::vector<FloatLayer> layers;
    FloatProjection projection;
    Vocab vocab;
};

struct Model {
    FloatModel source;                 // pristine float weights (oracle side)
    std::vector<LayerParams> layers;   // quantized, padded, bias folded
    ProjectionParams projection;       // quantized, bias folded

    const Vocab& vocab() const { return source.vocab; }
};

// Quantization: encode every weight, pad W_x columns to P = max(input, H),
// fold the bias into the last column.
LayerParams make_layer_params(const FloatLayer& fl);
ProjectionParams make_projection_params(const FloatProjection& fp);

Model load_model(std::span<const std::uint8_t> bytes);
Model load_model_file(const std::string& path);
std::vector<std::uint8_t> save_model(const Model& m);
std::vector<std::uint8_t> save_float_model(const FloatModel& m);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

std::vector<Q88> one_hot(const Vocab& v, const std::string& ch);

enum class SampleMode { Argmax, Multinomial };

struct SamplerConfig {
    SampleMode mode = SampleMode::Argmax;
    double temperature = 1.0;  // Multinomial only
    std::uint64_t rng_seed = 0;
};

// Argmax: smallest index attaining the max raw value. Multinomial:
// softmax over decoded logits / temperature, sampled from rng.
int sample_next(std::span<const Acc32> logits, const SamplerConfig& cfg, SplitMix64& rng);

enum class Backend { Functional, Dataflow };

struct GenerateResult {
    std::string text;
    PerfCounters counters;  // populated by the dataflow backend
    // Observed raw output ranges (functional backend).
    std::int16_t h_min = 32767, h_max = -32768;
    std::int16_t sigmoid_min = 32767, sigmoid_max = -32768;
    std::int16_t tanh_min = 32767, tanh_max = -32768;
};

// Runs n timesteps from the seed character, feeding each sampled character
// back as the next input.
GenerateResult generate(const Model& model, const std::string& seed_char, int n,
                        const SamplerConfig& cfg, Backend backend);

// Fixed-point layer stack and the double oracle driven by the same input
// characters (sampled from the fixed-point logits); per-step percentage
// errors over the concatenation of all layers' c respectively h vectors.
struct CompareResult {
    ErrorSeries c_err;
    ErrorSeries h_err;
};

CompareResult compare_fixed_vs_float(const Model& model, const std::string& seed_char, int steps,
                                     const SamplerConfig& cfg);

// Dataflow vs functional backend over the same sampled sequence; match is
// bitwise over h, c and logits at every step. tamper flips one weight
// stream lane to force a divergence.
struct VerifyResult {
    bool match = true;
    PerfCounters counters;
    std::uint64_t steps = 0;
};

VerifyResult verify_backends(const Model& model, const std::string& seed_char, int steps,
                             const SamplerConfig& cfg, bool tamper = false);

}  // namespace lstmq
