#include "lstmq/model_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace lstmq {

namespace {

constexpr char kMagic[8] = {'L', 'S', 'T', 'M', 'Q', '8', '8', '\0'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kMaxDim = 65536;
constexpr std::uint32_t kMaxLayers = 64;

[[noreturn]] void fail(ModelError::Kind k, const std::string& msg) { throw ModelError(k, msg); }

struct Reader {
    std::span<const std::uint8_t> bytes;
    std::size_t pos = 0;

    void need(std::size_t n) {
        if (bytes.size() - pos < n) fail(ModelError::Kind::Truncated, "model file truncated");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes[pos + i]) << (8 * i);
        pos += 4;
        return v;
    }
    float f32() {
        std::uint32_t v = u32();
        return std::bit_cast<float>(v);
    }
    void f32_array(std::vector<float>& out, std::size_t count) {
        out.resize(count);
        for (std::size_t i = 0; i < count; ++i) out[i] = f32();
    }
    std::uint8_t byte() {
        need(1);
        return bytes[pos++];
    }
};

struct Writer {
    std::vector<std::uint8_t> bytes;

    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float f) { u32(std::bit_cast<std::uint32_t>(f)); }
    void f32_array(const std::vector<float>& v) {
        for (float f : v) f32(f);
    }
    void raw(const void* p, std::size_t n) {
        const auto* b = static_cast<const std::uint8_t*>(p);
        bytes.insert(bytes.end(), b, b + n);
    }
};

std::size_t utf8_seq_len(std::uint8_t b) {
    if (b < 0x80) return 1;
    if ((b >> 5) == 0x6) return 2;
    if ((b >> 4) == 0xe) return 3;
    if ((b >> 3) == 0x1e) return 4;
    return 0;
}

std::string read_codepoint(Reader& r) {
    std::uint8_t first = r.byte();
    std::size_t len = utf8_seq_len(first);
    if (len == 0) fail(ModelError::Kind::Truncated, "invalid UTF-8 in vocab");
    std::string out(1, static_cast<char>(first));
    for (std::size_t i = 1; i < len; ++i) {
        std::uint8_t b = r.byte();
        if ((b >> 6) != 0x2) fail(ModelError::Kind::Truncated, "invalid UTF-8 in vocab");
        out.push_back(static_cast<char>(b));
    }
    return out;
}

}  // namespace

int Vocab::lookup(const std::string& ch) const {
    auto it = index.find(ch);
    if (it == index.end()) {
        fail(ModelError::Kind::UnknownChar, "character not in vocabulary");
    }
    return it->second;
}

Vocab Vocab::from_characters(const std::string& utf8) {
    Vocab v;
    Reader r{std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(utf8.data()), utf8.size())};
    while (r.pos < utf8.size()) {
        std::string ch = read_codepoint(r);
        if (!v.index.emplace(ch, v.size()).second) {
            fail(ModelError::Kind::DimMismatch, "duplicate vocabulary character");
        }
        v.chars.push_back(std::move(ch));
    }
    return v;
}

LayerParams make_layer_params(const FloatLayer& fl) {
    const int in = fl.input_size;
    const int h = fl.hidden;
    const int p = std::max(in, h);
    LayerParams lp;
    lp.input_size = in;
    lp.padded_input = p;
    lp.hidden = h;

    auto fill = [&](const FloatGate& g, Nonlin act) {
        GateParams gp;
        gp.activation = act;
        gp.w_combined = QMatrix(h, p + h + 1);
        for (int r = 0; r < h; ++r) {
            for (int j = 0; j < in; ++j) {
                gp.w_combined.at(r, j) = encode(g.wx[static_cast<std::size_t>(r) * in + j]);
            }
            for (int j = 0; j < h; ++j) {
                gp.w_combined.at(r, p + j) = encode(g.wh[static_cast<std::size_t>(r) * h + j]);
            }
            gp.w_combined.at(r, p + h) = encode(g.b[r]);
        }
        return gp;
    };

    lp.gate_i = fill(fl.gate_i, Nonlin::Sigmoid);
    lp.gate_f = fill(fl.gate_f, Nonlin::Sigmoid);
    lp.gate_o = fill(fl.gate_o, Nonlin::Sigmoid);
    lp.gate_c = fill(fl.gate_c, Nonlin::Tanh);
    return lp;
}

ProjectionParams make_projection_params(const FloatProjection& fp) {
    ProjectionParams pp;
    pp.w = QMatrix(fp.vocab, fp.hidden + 1);
    for (int r = 0; r < fp.vocab; ++r) {
        for (int j = 0; j < fp.hidden; ++j) {
            pp.w.at(r, j) = encode(fp.w[static_cast<std::size_t>(r) * fp.hidden + j]);
        }
        pp.w.at(r, fp.hidden) = encode(fp.b[r]);
    }
    return pp;
}

Model load_model(std::span<const std::uint8_t> bytes) {
    Reader r{bytes};
    r.need(8);
    if (std::memcmp(bytes.data(), kMagic, 8) != 0) {
        fail(ModelError::Kind::BadMagic, "not a LSTMQ88 model file");
    }
    r.pos = 8;
    if (std::uint32_t v = r.u32(); v != kVersion) {
        fail(ModelError::Kind::BadVersion, "unsupported model version " + std::to_string(v));
    }

    std::uint32_t layer_count = r.u32();
    if (layer_count == 0 || layer_count > kMaxLayers) {
        fail(ModelError::Kind::DimMismatch, "bad layer count");
    }
    std::vector<std::pair<std::uint32_t, std::uint32_t>> dims(layer_count);
    for (auto& [in, hidden] : dims) {
        in = r.u32();
        hidden = r.u32();
        if (in == 0 || hidden == 0 || in > kMaxDim || hidden > kMaxDim) {
            fail(ModelError::Kind::DimMismatch, "bad layer dims");
        }
    }
    for (std::size_t l = 1; l < dims.size(); ++l) {
        if (dims[l].first != dims[l - 1].second) {
            fail(ModelError::Kind::DimMismatch, "layer input does not match previous hidden size");
        }
    }

    std::uint32_t vocab_size = r.u32();
    if (vocab_size == 0 || vocab_size > kMaxDim) {
        fail(ModelError::Kind::DimMismatch, "bad vocab size");
    }
    FloatModel fm;
    for (std::uint32_t i = 0; i < vocab_size; ++i) {
        std::string ch = read_codepoint(r);
        if (!fm.vocab.index.emplace(ch, fm.vocab.size()).second) {
            fail(ModelError::Kind::DimMismatch, "duplicate vocabulary character");
        }
        fm.vocab.chars.push_back(std::move(ch));
    }
    if (dims.front().first != vocab_size) {
        fail(ModelError::Kind::DimMismatch, "first layer input does not match vocab size");
    }

    for (auto [in, hidden] : dims) {
        FloatLayer fl;
        fl.input_size = static_cast<int>(in);
        fl.hidden = static_cast<int>(hidden);
        for (FloatGate* g : {&fl.gate_i, &fl.gate_f, &fl.gate_o, &fl.gate_c}) {
            std::vector<float> wx, wh, b;
            r.f32_array(wx, static_cast<std::size_t>(hidden) * in);
            r.f32_array(wh, static_cast<std::size_t>(hidden) * hidden);
            r.f32_array(b, hidden);
            g->wx.assign(wx.begin(), wx.end());
            g->wh.assign(wh.begin(), wh.end());
            g->b.assign(b.begin(), b.end());
        }
        fm.layers.push_back(std::move(fl));
    }

    const std::uint32_t h_last = dims.back().second;
    fm.projection.vocab = static_cast<int>(vocab_size);
    fm.projection.hidden = static_cast<int>(h_last);
    r.f32_array(fm.projection.w, static_cast<std::size_t>(vocab_size) * h_last);
    r.f32_array(fm.projection.b, vocab_size);

    if (r.pos != bytes.size()) {
        fail(ModelError::Kind::DimMismatch, "file length does not match declared dims");
    }

    Model m;
    m.layers.reserve(fm.layers.size());
    for (const auto& fl : fm.layers) m.layers.push_back(make_layer_params(fl));
    m.projection = make_projection_params(fm.projection);
    m.source = std::move(fm);
    return m;
}

Model load_model_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ModelError::Kind::Io, "cannot open " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return load_model(bytes);
}

std::vector<std::uint8_t> save_float_model(const FloatModel& m) {
    Writer w;
    w.raw(kMagic, 8);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(m.layers.size()));
    for (const auto& fl : m.layers) {
        w.u32(static_cast<std::uint32_t>(fl.input_size));
        w.u32(static_cast<std::uint32_t>(fl.hidden));
    }
    w.u32(static_cast<std::uint32_t>(m.vocab.size()));
    for (const auto& ch : m.vocab.chars) w.raw(ch.data(), ch.size());
    for (const auto& fl : m.layers) {
        for (const FloatGate* g : {&fl.gate_i, &fl.gate_f, &fl.gate_o, &fl.gate_c}) {
            for (double v : g->wx) w.f32(static_cast<float>(v));
            for (double v : g->wh) w.f32(static_cast<float>(v));
            for (double v : g->b) w.f32(static_cast<float>(v));
        }
    }
    for (float v : m.projection.w) w.f32(v);
    for (float v : m.projection.b) w.f32(v);
    return std::move(w.bytes);
}

std::vector<std::uint8_t> save_model(const Model& m) {
    // Emit the decoded quantized weights: a reload quantizes to the same
    // raw values, so save/load is idempotent after the first quantization.
    FloatModel out;
    out.vocab = m.source.vocab;
    for (const auto& lp : m.layers) {
        FloatLayer fl;
        fl.input_size = lp.input_size;
        fl.hidden = lp.hidden;
        auto strip = [&](const GateParams& gp) {
            FloatGate g;
            const int p = lp.padded_input;
            for (int r = 0; r < lp.hidden; ++r) {
                for (int j = 0; j < lp.input_size; ++j) g.wx.push_back(decode(gp.w_combined.at(r, j)));
                for (int j = 0; j < lp.hidden; ++j) g.wh.push_back(decode(gp.w_combined.at(r, p + j)));
            }
            for (int r = 0; r < lp.hidden; ++r) g.b.push_back(decode(gp.w_combined.at(r, p + lp.hidden)));
            return g;
        };
        fl.gate_i = strip(lp.gate_i);
        fl.gate_f = strip(lp.gate_f);
        fl.gate_o = strip(lp.gate_o);
        fl.gate_c = strip(lp.gate_c);
        out.layers.push_back(std::move(fl));
    }
    out.projection.vocab = m.projection.w.rows;
    out.projection.hidden = m.projection.w.cols - 1;
    for (int r = 0; r < m.projection.w.rows; ++r) {
        for (int j = 0; j < m.projection.w.cols - 1; ++j) {
            out.projection.w.push_back(static_cast<float>(decode(m.projection.w.at(r, j))));
        }
    }
    for (int r = 0; r < m.projection.w.rows; ++r) {
        out.projection.b.push_back(static_cast<float>(decode(m.projection.w.at(r, m.projection.w.cols - 1))));
    }
    return save_float_model(out);
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ModelError::Kind::Io, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ModelError::Kind::Io, "short write to " + path);
}

std::vector<Q88> one_hot(const Vocab& v, const std::string& ch) {
    std::vector<Q88> out(static_cast<std::size_t>(v.size()));
    out[static_cast<std::size_t>(v.lookup(ch))] = q88_one;
    return out;
}

int sample_next(std::span<const Acc32> logits, const SamplerConfig& cfg, SplitMix64& rng) {
    if (logits.empty()) throw std::invalid_argument("sample_next: empty logits");
    if (cfg.mode == SampleMode::Argmax) {
        int best = 0;
        for (int k = 1; k < static_cast<int>(logits.size()); ++k) {
            if (logits[k].raw > logits[best].raw) best = k;
        }
        return best;
    }
    // softmax in double precision over decoded logits / temperature
    double max_l = -1e300;
    for (Acc32 l : logits) max_l = std::max(max_l, decode(l) / cfg.temperature);
    std::vector<double> p(logits.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        p[k] = std::exp(decode(logits[k]) / cfg.temperature - max_l);
        sum += p[k];
    }
    double u = rng.next_double() * sum;
    double acc = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        acc += p[k];
        if (u < acc) return static_cast<int>(k);
    }
    return static_cast<int>(logits.size()) - 1;
}

namespace {

std::vector<double> one_hot_double(int size, int idx) {
    std::vector<double> v(static_cast<std::size_t>(size), 0.0);
    v[static_cast<std::size_t>(idx)] = 1.0;
    return v;
}

}  // namespace

GenerateResult generate(const Model& model, const std::string& seed_char, int n,
                        const SamplerConfig& cfg, Backend backend) {
    GenerateResult out;
    if (n <= 0) return out;
    const Vocab& vocab = model.vocab();
    int current = vocab.lookup(seed_char);
    SplitMix64 rng(cfg.rng_seed);

    if (backend == Backend::Functional) {
        PwlTables tables = build_tables();
        std::vector<LstmState> states;
        for (const auto& lp : model.layers) states.emplace_back(lp.hidden);
        StepTrace trace;
        for (int t = 0; t < n; ++t) {
            std::vector<Q88> x = one_hot(vocab, vocab.chars[current]);
            std::span<const Q88> v{x};
            for (std::size_t l = 0; l < model.layers.size(); ++l) {
                lstm_step(model.layers[l], v, states[l], tables, &trace);
                v = states[l].h;
                for (Q88 q : states[l].h) {
                    out.h_min = std::min(out.h_min, q.raw);
                    out.h_max = std::max(out.h_max, q.raw);
                }
            }
            auto logits = projection(model.projection, v);
            current = sample_next(logits, cfg, rng);
            out.text += vocab.chars[current];
        }
        out.sigmoid_min = trace.sigmoid_min;
        out.sigmoid_max = trace.sigmoid_max;
        out.tanh_min = trace.tanh_min;
        out.tanh_max = trace.tanh_max;
        return out;
    }

    EngineConfig ec;
    ec.hidden = model.layers.front().hidden;
    ec.padded_input = model.layers.front().padded_input;
    Engine engine(ec);
    std::vector<PackedLayer> packed;
    for (const auto& lp : model.layers) packed.push_back(pack_weights(lp));
    PackedProjection proj = pack_projection(model.projection);
    std::vector<LstmState> states;
    for (const auto& lp : model.layers) states.emplace_back(lp.hidden);

    for (int t = 0; t < n; ++t) {
        std::vector<Q88> x = one_hot(vocab, vocab.chars[current]);
        std::span<const Q88> v{x};
        for (std::size_t l = 0; l < packed.size(); ++l) {
            engine.run_timestep(packed[l], v, states[l]);
            v = states[l].h;
        }
        auto logits = engine.run_projection(proj, v);
        current = sample_next(logits, cfg, rng);
        out.text += vocab.chars[current];
    }
    out.counters = engine.counters();
    return out;
}

CompareResult compare_fixed_vs_float(const Model& model, const std::string& seed_char, int steps,
                                     const SamplerConfig& cfg) {
    const Vocab& vocab = model.vocab();
    int current = vocab.lookup(seed_char);
    SplitMix64 rng(cfg.rng_seed);
    PwlTables tables = build_tables();

    std::vector<LstmState> fixed_states;
    std::vector<FloatState> float_states;
    for (const auto& lp : model.layers) fixed_states.emplace_back(lp.hidden);
    for (const auto& fl : model.source.layers) float_states.emplace_back(fl.hidden);

    std::vector<std::vector<Q88>> c_fixed, h_fixed;
    std::vector<std::vector<double>> c_float, h_float;

    for (int t = 0; t < steps; ++t) {
        std::vector<Q88> x = one_hot(vocab, vocab.chars[current]);
        std::vector<double> xf = one_hot_double(vocab.size(), current);

        std::span<const Q88> v{x};
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            lstm_step(model.layers[l], v, fixed_states[l], tables);
            v = fixed_states[l].h;
        }
        std::span<const double> vf{xf};
        std::vector<double> carry;
        for (std::size_t l = 0; l < model.source.layers.size(); ++l) {
            float_oracle_step(model.source.layers[l], vf, float_states[l]);
            carry = float_states[l].h;
            vf = carry;
        }

        std::vector<Q88> cq, hq;
        std::vector<double> cd, hd;
        for (std::size_t l = 0; l < fixed_states.size(); ++l) {
            cq.insert(cq.end(), fixed_states[l].c.begin(), fixed_states[l].c.end());
            hq.insert(hq.end(), fixed_states[l].h.begin(), fixed_states[l].h.end());
            cd.insert(cd.end(), float_states[l].c.begin(), float_states[l].c.end());
            hd.insert(hd.end(), float_states[l].h.begin(), float_states[l].h.end());
        }
        c_fixed.push_back(std::move(cq));
        h_fixed.push_back(std::move(hq));
        c_float.push_back(std::move(cd));
        h_float.push_back(std::move(hd));

        auto logits = projection(model.projection, v);
        current = sample_next(logits, cfg, rng);
    }

    return CompareResult{avg_pct_error(c_fixed, c_float), avg_pct_error(h_fixed, h_float)};
}

VerifyResult verify_backends(const Model& model, const std::string& seed_char, int steps,
                             const SamplerConfig& cfg, bool tamper) {
    const Vocab& vocab = model.vocab();
    int current = vocab.lookup(seed_char);
    SplitMix64 rng(cfg.rng_seed);
    PwlTables tables = build_tables();

    EngineConfig ec;
    ec.hidden = model.layers.front().hidden;
    ec.padded_input = model.layers.front().padded_input;
    Engine engine(ec);
    std::vector<PackedLayer> packed;
    for (const auto& lp : model.layers) packed.push_back(pack_weights(lp));
    if (tamper && !packed.empty()) {
        // Flip a high bit in the first row's output-gate bias lane; a
        // low-bit flip could vanish in the rescale truncation.
        PackedLayer& p0 = packed.front();
        std::size_t bias_idx = static_cast<std::size_t>(p0.padded_input) + p0.hidden;
        Beat32& beat = p0.gate_o.beats[bias_idx / 2];
        Q88& lane = bias_idx % 2 == 0 ? beat.lane_lo : beat.lane_hi;
        lane.raw ^= 0x4000;
    }
    PackedProjection proj = pack_projection(model.projection);

    std::vector<LstmState> fn_states, df_states;
    for (const auto& lp : model.layers) {
        fn_states.emplace_back(lp.hidden);
        df_states.emplace_back(lp.hidden);
    }

    VerifyResult out;
    for (int t = 0; t < steps; ++t) {
        std::vector<Q88> x = one_hot(vocab, vocab.chars[current]);

        std::span<const Q88> v{x};
        for (std::size_t l = 0; l < model.layers.size(); ++l) {
            lstm_step(model.layers[l], v, fn_states[l], tables);
            v = fn_states[l].h;
        }
        auto fn_logits = projection(model.projection, v);

        std::span<const Q88> vd{x};
        for (std::size_t l = 0; l < packed.size(); ++l) {
            engine.run_timestep(packed[l], vd, df_states[l]);
            vd = df_states[l].h;
        }
        auto df_logits = engine.run_projection(proj, vd);

        bool step_match = fn_logits == df_logits;
        for (std::size_t l = 0; l < fn_states.size() && step_match; ++l) {
            step_match = fn_states[l].c == df_states[l].c && fn_states[l].h == df_states[l].h;
        }
        out.steps = static_cast<std::uint64_t>(t) + 1;
        if (!step_match) {
            out.match = false;
            break;
        }
        current = sample_next(df_logits, cfg, rng);
    }
    out.counters = engine.counters();
    return out;
}

}  // namespace lstmq
