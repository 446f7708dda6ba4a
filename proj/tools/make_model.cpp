// Writes a random-weight model file. Weights are uniform in
// [-bound, bound] from a fixed seed, so a given flag set always produces
// identical bytes; the committed test fixtures come from this tool.

#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "lstmq/model_io.hpp"
#include "lstmq/rng.hpp"

namespace {

std::string default_charset(int vocab) {
    // first 65 characters: the character-level experiment vocabulary
    std::string s = "\n !$&',-.3:;?";
    for (char c = 'A'; c <= 'Z'; ++c) s.push_back(c);
    for (char c = 'a'; c <= 'z'; ++c) s.push_back(c);
    for (char c = '!'; c <= '~' && static_cast<int>(s.size()) < vocab; ++c) {
        if (s.find(c) == std::string::npos) s.push_back(c);
    }
    return s.substr(0, static_cast<std::size_t>(vocab));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"generate a random LSTMQ88 model file"};
    std::string out_path;
    int hidden = 128;
    int layers = 2;
    int vocab = 65;
    double bound = 0.5;
    std::uint64_t seed = 1;
    std::string charset;
    app.add_option("-o,--out", out_path, "output file")->required();
    app.add_option("--hidden", hidden, "hidden size")->check(CLI::PositiveNumber);
    app.add_option("--layers", layers, "layer count")->check(CLI::PositiveNumber);
    app.add_option("--vocab", vocab, "vocabulary size")->check(CLI::PositiveNumber);
    app.add_option("--bound", bound, "uniform weight bound");
    app.add_option("--seed", seed, "rng seed");
    app.add_option("--charset", charset, "explicit vocabulary characters");
    CLI11_PARSE(app, argc, argv);

    lstmq::SplitMix64 rng(seed);
    lstmq::FloatModel m;
    m.vocab = lstmq::Vocab::from_characters(charset.empty() ? default_charset(vocab) : charset);
    if (m.vocab.size() != vocab) {
        std::fprintf(stderr, "charset construction failed for vocab %d\n", vocab);
        return 1;
    }

    int in = vocab;
    for (int l = 0; l < layers; ++l) {
        lstmq::FloatLayer fl;
        fl.input_size = in;
        fl.hidden = hidden;
        for (lstmq::FloatGate* g : {&fl.gate_i, &fl.gate_f, &fl.gate_o, &fl.gate_c}) {
            g->wx.resize(static_cast<std::size_t>(hidden) * in);
            g->wh.resize(static_cast<std::size_t>(hidden) * hidden);
            g->b.resize(hidden);
            for (auto& v : g->wx) v = rng.next_range(-bound, bound);
            for (auto& v : g->wh) v = rng.next_range(-bound, bound);
            for (auto& v : g->b) v = rng.next_range(-bound, bound);
        }
        m.layers.push_back(std::move(fl));
        in = hidden;
    }
    m.projection.vocab = vocab;
    m.projection.hidden = hidden;
    m.projection.w.resize(static_cast<std::size_t>(vocab) * hidden);
    m.projection.b.resize(vocab);
    for (auto& v : m.projection.w) v = static_cast<float>(rng.next_range(-bound, bound));
    for (auto& v : m.projection.b) v = static_cast<float>(rng.next_range(-bound, bound));

    try {
        lstmq::write_file(out_path, lstmq::save_float_model(m));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 2;
    }
    return 0;
}
