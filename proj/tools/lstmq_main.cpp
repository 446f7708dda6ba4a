// lstmq: character-level LSTM inference in Q8.8, with a streaming engine
// model and performance accounting.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 verification
// failure (streaming engine diverged from the functional reference).

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <string>

#include "lstmq/model_io.hpp"
#include "lstmq/perf.hpp"
#include "lstmq/pwl.hpp"

using nlohmann::json;
using namespace lstmq;

namespace {

json counters_to_json(const PerfCounters& c) {
    return json{{"cycles_stage1", c.cycles_stage1},
                {"cycles_stage2", c.cycles_stage2},
                {"cycles_stage3", c.cycles_stage3},
                {"cycles_projection", c.cycles_projection},
                {"total_cycles", c.total_cycles()},
                {"mac_ops", c.mac_ops},
                {"ewise_ops", c.ewise_ops},
                {"proj_ops", c.proj_ops},
                {"bytes_in", c.bytes_in},
                {"bytes_out", c.bytes_out},
                {"layer_steps", c.layer_steps},
                {"timesteps", c.timesteps}};
}

json report_to_json(const PerfReport& r) {
    return json{{"hidden", r.hidden},
                {"padded_input", r.padded_input},
                {"clock_hz", r.clock_hz},
                {"mac_ops_per_layer", r.mac_ops_layer},
                {"ewise_ops_per_layer", r.ewise_ops_layer},
                {"ops_per_layer", r.ops_layer},
                {"total_mac_ops", r.total_mac_ops},
                {"total_ewise_ops", r.total_ewise_ops},
                {"total_proj_ops", r.total_proj_ops},
                {"total_ops", r.total_ops_count},
                {"modeled_cycles", r.modeled_cycles},
                {"modeled_time_s", r.modeled_time_s},
                {"throughput_ops_s", r.throughput_ops_s},
                {"peak_bw_in_bps", r.peak_bw_in_bps},
                {"peak_bw_out_bps", r.peak_bw_out_bps},
                {"port_ceiling_bps", r.port_ceiling_bps},
                {"measured_ops_s", r.measured_ops_s},
                {"reported_peak_bw_bps", r.reported_peak_bw_bps}};
}

json series_to_json(const ErrorSeries& e) {
    return json{{"mean", e.mean}, {"best", e.best}, {"worst", e.worst}, {"per_step", e.per_step}};
}

std::string pick_seed(const Model& m, const std::string& flag) {
    return flag.empty() ? m.vocab().chars.front() : flag;
}

int run(int argc, char** argv) {
    CLI::App app{"Q8.8 LSTM inference and streaming engine model"};
    app.require_subcommand(1);

    std::string model_path, seed_char;
    int length = 1000;
    std::string mode = "argmax";
    double temperature = 1.0;
    std::uint64_t rng_seed = 0;
    std::string backend = "functional";
    bool as_json = false;
    bool tamper = false;

    auto add_model_opts = [&](CLI::App* sub, int default_length, bool allow_zero) {
        sub->add_option("model", model_path, "model file")->required();
        sub->add_option("--seed-char", seed_char, "seed character (default: first vocab entry)");
        sub->add_option("--length", length, "timesteps to run")
            ->default_val(default_length)
            ->check(allow_zero ? CLI::NonNegativeNumber : CLI::PositiveNumber);
        sub->add_option("--rng-seed", rng_seed, "sampler rng seed");
        return sub;
    };

    auto* gen = add_model_opts(app.add_subcommand("generate", "sample text from a seed character"),
                               1000, /*allow_zero=*/true);
    gen->add_option("--mode", mode, "argmax|multinomial")
        ->check(CLI::IsMember({"argmax", "multinomial"}));
    gen->add_option("--temperature", temperature, "softmax temperature (multinomial)")
        ->check(CLI::PositiveNumber);
    gen->add_option("--backend", backend, "functional|dataflow")
        ->check(CLI::IsMember({"functional", "dataflow"}));

    auto* cmp = add_model_opts(
        app.add_subcommand("compare", "fixed-point vs double-precision error report"), 100,
        /*allow_zero=*/false);
    cmp->add_flag("--json", as_json, "machine-readable output");

    auto* sim = add_model_opts(
        app.add_subcommand("simulate", "run the streaming engine and verify against the reference"),
        10, /*allow_zero=*/false);
    sim->add_flag("--json", as_json, "machine-readable output");
    sim->add_flag("--tamper", tamper, "corrupt one weight stream lane (verification test hook)");

    int hidden = 128, input = 0, layers = 2, steps = 1000;
    std::uint64_t clock_hz = kDefaultClockHz, latency = 16;
    auto* bench = app.add_subcommand("bench", "analytic ops/bandwidth/timing model");
    bench->add_option("--hidden", hidden, "hidden size")->check(CLI::PositiveNumber);
    bench->add_option("--input", input, "input size before padding (default: hidden)");
    bench->add_option("--layers", layers, "layer count")->check(CLI::PositiveNumber);
    bench->add_option("--steps", steps, "timesteps")->check(CLI::PositiveNumber);
    bench->add_option("--clock-hz", clock_hz, "engine clock")->check(CLI::PositiveNumber);
    bench->add_option("--latency", latency, "fixed pipeline latency per stage");
    bench->add_flag("--json", as_json, "machine-readable output");

    std::string function = "tanh";
    auto* dump = app.add_subcommand("pwl-dump", "print a nonlinearity table");
    dump->add_option("--function", function, "tanh|sigmoid")
        ->check(CLI::IsMember({"tanh", "sigmoid"}));
    dump->add_flag("--json", as_json, "machine-readable output");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    if (gen->parsed()) {
        Model m = load_model_file(model_path);
        SamplerConfig cfg;
        cfg.mode = mode == "argmax" ? SampleMode::Argmax : SampleMode::Multinomial;
        cfg.temperature = temperature;
        cfg.rng_seed = rng_seed;
        Backend be = backend == "functional" ? Backend::Functional : Backend::Dataflow;
        GenerateResult r = generate(m, pick_seed(m, seed_char), length, cfg, be);
        std::cout << r.text;
        if (be == Backend::Dataflow) {
            std::cerr << "mac_ops " << r.counters.mac_ops << "  ewise_ops " << r.counters.ewise_ops
                      << "  total_cycles " << r.counters.total_cycles() << "\n";
        }
        return 0;
    }

    if (cmp->parsed()) {
        Model m = load_model_file(model_path);
        SamplerConfig cfg;
        cfg.rng_seed = rng_seed;
        CompareResult r = compare_fixed_vs_float(m, pick_seed(m, seed_char), length, cfg);
        if (as_json) {
            std::cout << json{{"steps", length},
                              {"c", series_to_json(r.c_err)},
                              {"h", series_to_json(r.h_err)}}
                             .dump(2)
                      << "\n";
        } else {
            std::printf("percentage error vs double precision, %d steps\n", length);
            std::printf("  c: mean %.4f%%  best %.4f%%  worst %.4f%%\n", r.c_err.mean,
                        r.c_err.best, r.c_err.worst);
            std::printf("  h: mean %.4f%%  best %.4f%%  worst %.4f%%\n", r.h_err.mean,
                        r.h_err.best, r.h_err.worst);
        }
        return 0;
    }

    if (sim->parsed()) {
        Model m = load_model_file(model_path);
        SamplerConfig cfg;
        cfg.rng_seed = rng_seed;
        VerifyResult r = verify_backends(m, pick_seed(m, seed_char), length, cfg, tamper);
        EngineConfig ec;
        ec.hidden = m.layers.front().hidden;
        ec.padded_input = m.layers.front().padded_input;
        PerfReport report = timing_model(ec, r.counters);
        if (as_json) {
            std::cout << json{{"match", r.match},
                              {"steps", r.steps},
                              {"counters", counters_to_json(r.counters)},
                              {"report", report_to_json(report)}}
                             .dump(2)
                      << "\n";
        } else {
            std::printf("engine vs functional reference: %s after %llu step(s)\n",
                        r.match ? "bit-exact" : "MISMATCH",
                        static_cast<unsigned long long>(r.steps));
            print_report(std::cout, report);
        }
        return r.match ? 0 : 3;
    }

    if (bench->parsed()) {
        int padded = input > 0 ? std::max(input, hidden) : hidden;
        PerfReport r = analytic_report(hidden, padded, layers, steps, clock_hz, latency);
        if (as_json) {
            std::cout << report_to_json(r).dump(2) << "\n";
        } else {
            std::printf("analytic model, %d layer(s) x %d step(s)\n", layers, steps);
            print_report(std::cout, r);
        }
        return 0;
    }

    if (dump->parsed()) {
        PwlTable t = build_table(function == "tanh" ? Nonlin::Tanh : Nonlin::Sigmoid);
        double err = max_abs_error(t);
        if (as_json) {
            json segs = json::array();
            for (const auto& s : t.segments) {
                segs.push_back(json{{"a", s.a.raw}, {"b", s.b.raw}, {"x_lo", s.x_lo.raw},
                                    {"x_hi", s.x_hi.raw}});
            }
            std::cout << json{{"function", function},
                              {"clamp_lo", t.clamp_lo.raw},
                              {"clamp_hi", t.clamp_hi.raw},
                              {"max_abs_error", err},
                              {"segments", segs}}
                             .dump(2)
                      << "\n";
        } else {
            std::printf("# %s: a b x_lo x_hi (raw Q8.8)\n", function.c_str());
            for (const auto& s : t.segments) {
                std::printf("%d %d %d %d\n", s.a.raw, s.b.raw, s.x_lo.raw, s.x_hi.raw);
            }
            std::printf("clamp_lo %d clamp_hi %d\n", t.clamp_lo.raw, t.clamp_hi.raw);
            std::printf("max_abs_error %.6f\n", err);
        }
        return 0;
    }

    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const ModelError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const SimFault& e) {
        std::fprintf(stderr, "engine fault: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
